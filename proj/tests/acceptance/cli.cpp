#include "criteria.hpp"

#include "support/fixtures.hpp"

#include "tspipe/csv_io.hpp"

#include <chrono>
#include <cstdlib>

namespace tspipe::acceptance {

namespace {

/// Runs the CLI on the bundled tutorial data; returns the exit status.
int run_cli(const std::string& args, double& seconds) {
  const std::string data = TSPIPE_DATA_DIR;
  std::string cmd = std::string("\"") + TSPIPE_CLI + "\" run -q";
  for (const char* f : {"static_train", "temporal_train", "static_test", "temporal_test"}) {
    const std::string kind = std::string(f).substr(0, std::string(f).find('_'));
    const std::string fold = std::string(f).substr(kind.size() + 1);
    cmd += " --set \"data." + std::string(f) + "=" + data + "/tutorial_" + kind + "_" + fold + "_data" +
           (kind == "temporal" ? "_eav" : "") + ".csv.gz\"";
  }
  cmd += " " + args + " 2>&1";
  const auto start = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return status;
}

Outcome determinism() {
  Checks ck;
  testing::TempDir dir;
  double first = 0, second = 0, frozen = 0;
  const std::string a = (dir / "a").string(), b = (dir / "b").string(), c = (dir / "c").string();
  ck.expect(run_cli("--seed 7 -o \"" + a + "\"", first) == 0, "first run failed");
  ck.expect(run_cli("--seed 7 -o \"" + b + "\"", second) == 0, "second run failed");
  // The frozen configuration reproduces the run by itself.
  ck.expect(run_cli("--config \"" + a + "/config.resolved.json\" -o \"" + c + "\"", frozen) == 0, "frozen-config run failed");
  if (ck.failed() > 0) return ck.outcome("");
  const std::string ma = read_text_file(dir / "a" / "metrics.json");
  ck.expect(ma == read_text_file(dir / "b" / "metrics.json"), "metrics documents differ between identical runs");
  ck.expect(ma == read_text_file(dir / "c" / "metrics.json"), "frozen-config rerun gives a different metrics document");
  ck.expect(read_text_file(dir / "a" / "predictions.csv") == read_text_file(dir / "b" / "predictions.csv"),
            "predictions differ between identical runs");
  const double slowest = std::max({first, second, frozen});
  ck.expect(slowest < 300.0, "a run took " + fixed(slowest, 1) + " s");
  return ck.outcome("identical metrics documents across 2 runs and a frozen-config rerun; slowest run " +
                    fixed(slowest, 1) + " s");
}

}  // namespace

std::vector<Criterion> cli_criteria() { return {{14, "end-to-end determinism", 900, determinism}}; }

}  // namespace tspipe::acceptance
