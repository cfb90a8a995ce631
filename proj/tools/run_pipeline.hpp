#pragma once

#include "run_config.hpp"

#include <filesystem>
#include <iosfwd>

namespace tspipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

/// Executes a validated configuration end to end, writing artifacts into
/// `config.output_dir`. On failure the directory holds `error.json` and no
/// `metrics.json`. Returns the exit status.
int run_pipeline(const Json& config, std::ostream& log);

/// Prints metrics, a prediction excerpt and the top-k global importances of
/// a finished run. Reads only.
int print_report(const std::filesystem::path& run_dir, int top_k, std::ostream& out, std::ostream& err);

}  // namespace tspipe::cli
