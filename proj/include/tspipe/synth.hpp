#pragma once

#include "tspipe/dataset.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace tspipe {

/// Knobs shared by all generators. Every instance carries two static
/// features, `age` (numeric) and `admission_type` (EMERGENCY / ELECTIVE /
/// URGENT), and an hourly time grid.
struct SynthParams {
  Index n = 200;           // instances
  Index steps = 24;        // maximum sequence length
  Index min_steps = 0;     // 0: every sequence has `steps` steps
  Index features = 5;      // temporal input features
  double missing = 0.0;    // fraction of input cells left unobserved
  double noise = 0.0;      // label flip probability / additive noise sd
  double offset = 0.0;     // added to every recorded input value after labelling
  std::uint64_t seed = 0;
  std::string label_name = "label";
  std::string id_prefix = "p";

  int lag = 4;                  // copy-task
  Index signal_features = 2;    // signal-noise
  double decay = 0.0;           // signal-noise: weight of non-signal features decays as decay^k
  std::string treatment_name = "treatment";  // treatment-rule
};

/// y[t] = 1{x0[t - lag] > 0}; label cells before `lag` are unobserved.
/// Bayes AUC is 1.0 when noise and missingness are zero.
Dataset synth_copy_task(const SynthParams& p);

/// y[t] = 1{x0[t] > 0} for t < steps/2 and 1{x1[t] > 0} afterwards, each
/// label flipped with probability `noise`. Bayes AUC = 1 - noise per step.
Dataset synth_piecewise_regime(const SynthParams& p);

/// y[t] = 1{sum_d w_d x_d[t] + noise * e > 0} with w_d = 1 for the first
/// `signal_features` features and decay^(d - signal_features + 1) after.
Dataset synth_signal_noise(const SynthParams& p);

/// Binary action a[t] ~ Bernoulli(sigmoid(x0[t])); outcome o[t+1] = a[t]
/// (flipped with probability `noise`), o[0] ~ Bernoulli(1/2). The outcome is
/// `label_name`, the action `treatment_name`.
Dataset synth_treatment_rule(const SynthParams& p);

/// x0 is a per-instance constant c observed at exactly one random step;
/// y[t] = 1{c > 0}. Forward/backward filling recovers c everywhere; constant
/// and interpolating imputers (which need two points) do not.
Dataset synth_imputer_sensitive(const SynthParams& p);

/// `piecewise-regime` whose first-half signal is the sparse per-instance
/// constant of `imputer-sensitive`.
Dataset synth_combined(const SynthParams& p);

/// Dispatch by generator name: copy-task, piecewise-regime, signal-noise,
/// treatment-rule, imputer-sensitive, combined.
Dataset synthesize(const std::string& generator, const SynthParams& p);

/// Applies `key=value` overrides to the parameter block.
SynthParams apply_synth_overrides(SynthParams p, const std::map<std::string, std::string>& overrides);

}  // namespace tspipe
