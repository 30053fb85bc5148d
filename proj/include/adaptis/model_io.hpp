#pragma once

#include <filesystem>

#include <json.hpp>

#include "adaptis/chain_model.hpp"
#include "adaptis/eigenvalue.hpp"

namespace adaptis {

/// {"n_states": n, "absorbing": [...], "P": [[...]], "s": [[...]], "beta": [[...]]}.
/// Structural problems throw ValidationError carrying the JSON pointer.
MarkovRewardModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const MarkovRewardModel& model);

/// {"d": d, "P": [[...]]} with P of size (d+1) x (d+1).
EigenModel eigen_model_from_json(const nlohmann::json& doc);
nlohmann::json eigen_model_to_json(const EigenModel& model);

/// Reads and parses a JSON file; unreadable or malformed files throw ValidationError.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Parses, then runs validate_model(); any violation throws ValidationError
/// naming the first offending path and the total count.
MarkovRewardModel load_model_file(const std::filesystem::path& path);
EigenModel load_eigen_model_file(const std::filesystem::path& path);

}  // namespace adaptis
