#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spnrank/csv.hpp"
#include "spnrank/error.hpp"
#include "spnrank/files.hpp"
#include "spnrank/mtl/model.hpp"

namespace spnrank::mtl {

// Task file: header "label,f_0,...,f_{d-1}", one example per line, label ±1.
inline Task load_task_csv(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() < 2 || f[0] != "label") reader.fail("expected header 'label,f_0,...'");
  const std::size_t d = f.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (f[j + 1] != "f_" + std::to_string(j)) reader.fail("feature column " + std::to_string(j) + " must be named f_" + std::to_string(j));
  }
  std::vector<double> labels, values;
  while (reader.next(f)) {
    if (f.size() != d + 1) reader.fail("expected " + std::to_string(d + 1) + " fields, got " + std::to_string(f.size()));
    const int label = reader.number<int>(f[0], "label");
    if (label != 1 && label != -1) reader.fail("label must be -1 or 1");
    labels.push_back(label);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = reader.number<double>(f[j + 1], "feature");
      if (!std::isfinite(v)) reader.fail("non-finite feature");
      values.push_back(v);
    }
  }
  Task t;
  t.y = Eigen::Map<const Vector>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  t.x = Eigen::Map<const Examples>(values.data(), static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(d));
  return t;
}

inline std::string task_to_csv(const Task& t) {
  std::string out = "label";
  for (Eigen::Index j = 0; j < t.x.cols(); ++j) out += ",f_" + std::to_string(j);
  out += '\n';
  for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
    out += t.y[i] > 0 ? "1" : "-1";
    for (Eigen::Index j = 0; j < t.x.cols(); ++j) out += "," + format_double(t.x(i, j));
    out += '\n';
  }
  return out;
}

inline void save_task_csv(const std::string& path, const Task& t) { write_text_file(path, task_to_csv(t)); }

inline TrainSet load_tasks(const std::vector<std::string>& paths) {
  TrainSet data;
  for (const auto& p : paths) data.push_back(load_task_csv(p));
  feature_dimension(data);
  return data;
}

// {"groups": [[0, 1], [2]]}
inline TaskGroups groups_from_json(const std::string& text, std::size_t tasks) {
  TaskGroups g;
  g.tasks = tasks;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [key, _] : j.items()) {
      if (key != "groups") throw DataError("groups file: unknown key '" + key + "'");
    }
    g.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed groups file: ") + e.what());
  }
  try {
    g.validate();
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  return g;
}

inline std::string groups_to_json(const TaskGroups& g) {
  return nlohmann::json{{"groups", g.groups}}.dump() + "\n";
}

namespace detail {

inline nlohmann::json rows_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Matrix json_rows(const nlohmann::json& rows, Eigen::Index r, Eigen::Index c, const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != r) throw DataError(std::string("model ") + name + ": wrong row count");
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto v = rows[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != c) throw DataError(std::string("model ") + name + ": wrong column count");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = v[static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace detail

inline std::string model_to_json(const Model& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["dimension"] = m.dimension();
  j["latent"] = m.latent();
  j["tasks"] = m.tasks();
  j["hyper"] = {{"mu", m.hyper.mu}, {"gamma", m.hyper.gamma}, {"lambda", m.hyper.lambda}};
  j["groups"] = m.groups.groups;
  j["L"] = detail::rows_json(m.L);
  j["S"] = detail::rows_json(m.S);
  return j.dump() + "\n";
}

inline Model model_from_json(const std::string& text) {
  Model m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw DataError("unsupported attribute model version");
    const auto d = j.at("dimension").get<Eigen::Index>();
    const auto k = j.at("latent").get<Eigen::Index>();
    const auto tasks = j.at("tasks").get<Eigen::Index>();
    m.hyper.mu = j.at("hyper").at("mu").get<double>();
    m.hyper.gamma = j.at("hyper").at("gamma").get<double>();
    m.hyper.lambda = j.at("hyper").at("lambda").get<double>();
    m.groups.tasks = static_cast<std::size_t>(tasks);
    m.groups.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
    m.L = detail::json_rows(j.at("L"), d, k, "L");
    m.S = detail::json_rows(j.at("S"), k, tasks, "S");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed attribute model: ") + e.what());
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw DataError(std::string("attribute model: ") + e.what());
  }
  return m;
}

inline void save_model(const std::string& path, const Model& m) { write_text_file(path, model_to_json(m)); }
inline Model load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

}  // namespace spnrank::mtl
