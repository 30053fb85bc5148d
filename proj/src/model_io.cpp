#include "adaptis/model_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "adaptis/errors.hpp"

namespace adaptis {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* key) {
  if (!doc.is_object()) throw ValidationError("", "expected a JSON object");
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(fmt::format("/{}", key), "missing field");
  return *it;
}

Matrix matrix_field(const json& doc, const char* key, std::size_t n) {
  const json& rows = require(doc, key);
  if (!rows.is_array() || rows.size() != n)
    throw ValidationError(fmt::format("/{}", key), fmt::format("expected an array of {} rows", n));
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = rows[i];
    if (!row.is_array() || row.size() != n)
      throw ValidationError(fmt::format("/{}/{}", key, i), fmt::format("expected an array of {} numbers", n));
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j].is_number())
        throw ValidationError(fmt::format("/{}/{}/{}", key, i, j), "expected a number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t count_field(const json& doc, const char* key) {
  const json& v = require(doc, key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ValidationError(fmt::format("/{}", key), "expected a nonnegative integer");
  return v.get<std::size_t>();
}

}  // namespace

MarkovRewardModel model_from_json(const json& doc) {
  const std::size_t n = count_field(doc, "n_states");
  if (n == 0) throw ValidationError("/n_states", "must be positive");
  const json& abs = require(doc, "absorbing");
  if (!abs.is_array()) throw ValidationError("/absorbing", "expected an array of state indices");
  std::vector<State> absorbing;
  for (std::size_t i = 0; i < abs.size(); ++i) {
    if (!abs[i].is_number_integer() || abs[i].get<long long>() < 0 || abs[i].get<std::size_t>() >= n)
      throw ValidationError(fmt::format("/absorbing/{}", i), fmt::format("expected a state index below {}", n));
    absorbing.push_back(abs[i].get<State>());
  }
  return MarkovRewardModel(matrix_field(doc, "P", n), matrix_field(doc, "s", n), matrix_field(doc, "beta", n),
                           std::move(absorbing));
}

json model_to_json(const MarkovRewardModel& model) {
  return {{"n_states", model.n_states()},
          {"absorbing", model.absorbing()},
          {"P", matrix_json(model.transition())},
          {"s", matrix_json(model.reward())},
          {"beta", matrix_json(model.discount())}};
}

EigenModel eigen_model_from_json(const json& doc) {
  const std::size_t d = count_field(doc, "d");
  return EigenModel(matrix_field(doc, "P", d + 1));
}

json eigen_model_to_json(const EigenModel& model) {
  return {{"d", model.d()}, {"P", matrix_json(model.transition())}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("", fmt::format("cannot read file {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("", fmt::format("{}: malformed JSON ({})", path.string(), e.what()));
  }
}

MarkovRewardModel load_model_file(const std::filesystem::path& path) {
  MarkovRewardModel model = model_from_json(read_json_file(path));
  if (const auto problems = validate_model(model); !problems.empty())
    throw ValidationError(problems.front().path, fmt::format("{} ({} violation(s) in {})", problems.front().message,
                                                             problems.size(), path.string()));
  return model;
}

EigenModel load_eigen_model_file(const std::filesystem::path& path) {
  EigenModel model = eigen_model_from_json(read_json_file(path));
  if (const auto problems = validate_eigen_model(model); !problems.empty())
    throw ValidationError(problems.front().path, fmt::format("{} ({} violation(s) in {})", problems.front().message,
                                                             problems.size(), path.string()));
  return model;
}

}  // namespace adaptis
