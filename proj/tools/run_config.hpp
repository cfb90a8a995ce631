#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tspipe::cli {

using Json = nlohmann::ordered_json;

/// Invalid or inconsistent run configuration (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every accepted key with its default value. Keys outside this tree are
/// rejected; string-valued keys also accept null.
Json default_config();

/// Defaults, then the file's values, then `path=value` overrides (dotted
/// paths, value parsed as JSON when possible, else taken as a string).
Json resolve_config(const Json& file_values, const std::vector<std::string>& overrides);

/// Cross-field checks (split fractions, window < max_seq_len, task/metric
/// agreement, known method names). Throws ConfigError.
void validate_config(const Json& config);

Json read_json_file(const std::filesystem::path& path);

}  // namespace tspipe::cli
