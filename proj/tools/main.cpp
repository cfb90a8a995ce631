#include "run_config.hpp"
#include "run_pipeline.hpp"

#include "tspipe/csv_io.hpp"
#include "tspipe/errors.hpp"
#include "tspipe/synth.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace tspipe;
using namespace tspipe::cli;

namespace {

int run_command(const std::string& config_path, const std::vector<std::string>& sets, const std::string& output_dir,
                const std::optional<std::uint64_t>& seed, bool quiet) {
  Json config;
  try {
    Json file = config_path.empty() ? Json::object() : read_json_file(config_path);
    std::vector<std::string> overrides = sets;
    if (!output_dir.empty()) overrides.push_back("output_dir=" + Json(output_dir).dump());
    if (seed) {
      for (const char* k : {"split.seed", "model.seed", "automl.seed"}) overrides.push_back(std::string(k) + "=" + std::to_string(*seed));
    }
    config = resolve_config(file, overrides);
    validate_config(config);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::ostream null_stream(nullptr);
  return run_pipeline(config, quiet ? null_stream : std::clog);
}

std::map<std::string, std::string> parse_params(const std::vector<std::string>& params) {
  std::map<std::string, std::string> out;
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw ParameterError("parameter '" + p + "' is not of the form key=value");
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

int synth_command(const std::string& generator, const std::string& out_dir, const std::string& name, Index test_n,
                  const std::vector<std::string>& params) {
  try {
    SynthParams p = apply_synth_overrides(SynthParams{}, parse_params(params));
    fs::create_directories(out_dir);
    const fs::path dir = out_dir;
    const Dataset train = synthesize(generator, p);
    write_csv(train, dir / (name + "_static_train_data.csv.gz"), dir / (name + "_temporal_train_data_eav.csv.gz"));
    std::cout << "wrote " << train.instances() << " training instances\n";
    if (test_n > 0) {
      SynthParams q = p;
      q.n = test_n;
      q.seed = p.seed + 1;
      q.id_prefix = p.id_prefix + "test";
      const Dataset test = synthesize(generator, q);
      write_csv(test, dir / (name + "_static_test_data.csv.gz"), dir / (name + "_temporal_test_data_eav.csv.gz"));
      std::cout << "wrote " << test.instances() << " test instances\n";
    }
    return kExitOk;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-series prediction pipelines: preprocessing, imputation, feature selection, sequence models, "
               "post-hoc analysis and pipeline search."};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Execute a pipeline configuration end to end");
  std::string config_path, output_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  run->add_option("--config,-c", config_path, "JSON configuration file (defaults apply to absent keys)");
  run->add_option("--set", sets, "Override a configuration key, e.g. --set model.epoch=5 (repeatable)");
  run->add_option("--output-dir,-o", output_dir, "Run directory (overrides output_dir)");
  run->add_option("--seed", seed, "Seed for the split, the model and the search");
  run->add_flag("--quiet,-q", quiet, "Suppress progress output");

  auto* print_defaults = app.add_subcommand("defaults", "Print the default configuration");

  auto* synth = app.add_subcommand("synth", "Write a synthetic benchmark dataset in the CSV input format");
  std::string generator, out_dir, name = "synthetic";
  Index test_n = 0;
  std::vector<std::string> params;
  synth->add_option("generator", generator,
                    "copy-task, piecewise-regime, signal-noise, treatment-rule, imputer-sensitive or combined")
      ->required();
  synth->add_option("--out-dir", out_dir, "Destination directory")->required();
  synth->add_option("--name", name, "File name prefix");
  synth->add_option("--test-n", test_n, "Also write a test set of this many instances (seed + 1)");
  synth->add_option("--param", params, "Generator parameter key=value, e.g. --param n=500 (repeatable)");

  auto* report = app.add_subcommand("report", "Summarize a finished run directory");
  std::string run_dir;
  int top_k = 10;
  report->add_option("run_dir", run_dir, "Run directory")->required();
  report->add_option("--top-k", top_k, "Number of global importances to show")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (*run) return run_command(config_path, sets, output_dir, seed, quiet);
  if (*print_defaults) {
    std::cout << default_config().dump(2) << '\n';
    return kExitOk;
  }
  if (*synth) return synth_command(generator, out_dir, name, test_n, params);
  return print_report(run_dir, top_k, std::cout, std::cerr);
}
