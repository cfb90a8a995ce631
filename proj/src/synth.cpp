#include "tspipe/synth.hpp"

#include "tspipe/csv_io.hpp"
#include "tspipe/errors.hpp"

#include <cmath>
#include <random>

namespace tspipe {

namespace {

/// Skeleton shared by all generators: ids, static block, time grid, input
/// features x0..x{D-1} ~ N(0, 1) fully observed, plus `extra` trailing
/// variables left unobserved for the generator to fill.
struct Builder {
  const SynthParams& p;
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss{0.0, 1.0};
  std::uniform_real_distribution<double> unif{0.0, 1.0};
  Dataset ds;
  Index extra;

  Builder(const SynthParams& params, const std::vector<std::string>& extra_names)
      : p(params), rng(params.seed), extra(static_cast<Index>(extra_names.size())) {
    if (p.n < 1 || p.steps < 1 || p.features < 0) throw ParameterError("synth: n, steps must be >= 1");
    if (p.missing < 0.0 || p.missing >= 1.0) throw ParameterError("synth: missing must lie in [0, 1)");
    if (p.min_steps > p.steps) throw ParameterError("synth: min_steps exceeds steps");
    const Index d = p.features + extra;
    for (Index j = 0; j < p.features; ++j) ds.temporal_names.push_back("x" + std::to_string(j));
    for (const auto& e : extra_names) ds.temporal_names.push_back(e);
    ds.static_names = {"age", "admission_type"};
    ds.static_features.values.resize(p.n, 2);
    ds.static_features.observed = Mask::Constant(p.n, 2, true);
    ds.static_features.levels = {{}, {"EMERGENCY", "ELECTIVE", "URGENT"}};
    ds.temporal = TemporalTensor::empty(p.n, p.steps, d);
    std::uniform_int_distribution<Index> len_dist(p.min_steps > 0 ? p.min_steps : p.steps, p.steps);
    for (Index i = 0; i < p.n; ++i) {
      ds.ids.push_back(p.id_prefix + std::to_string(i));
      ds.static_features.values(i, 0) = std::round(40.0 + 40.0 * unif(rng));
      ds.static_features.values(i, 1) = static_cast<double>(std::min<int>(2, static_cast<int>(3.0 * unif(rng))));
      const Index len = len_dist(rng);
      ds.temporal.seq_len(i) = static_cast<int>(len);
      auto& v = ds.temporal.values[static_cast<std::size_t>(i)];
      auto& m = ds.temporal.observed[static_cast<std::size_t>(i)];
      for (Index t = 0; t < len; ++t) {
        ds.temporal.time(i, t) = static_cast<double>(t);
        for (Index j = 0; j < p.features; ++j) {
          v(t, j) = gauss(rng);
          m(t, j) = true;
        }
      }
    }
    ds.fold.assign(static_cast<std::size_t>(p.n), Fold::Unassigned);
  }

  Matrix& values(Index i) { return ds.temporal.values[static_cast<std::size_t>(i)]; }
  Mask& observed(Index i) { return ds.temporal.observed[static_cast<std::size_t>(i)]; }
  Index len(Index i) const { return ds.temporal.seq_len(i); }

  void set(Index i, Index t, Index col, double value) {
    values(i)(t, col) = value;
    observed(i)(t, col) = true;
  }

  double flip(double y) { return p.noise > 0.0 && unif(rng) < p.noise ? 1.0 - y : y; }

  /// Hides input cells at the requested rate. Drawn after labels so that the
  /// label process is unaffected by the missingness setting.
  Dataset finish() {
    if (p.offset != 0.0) {
      for (Index i = 0; i < p.n; ++i) {
        for (Index t = 0; t < len(i); ++t) {
          for (Index j = 0; j < p.features; ++j) {
            if (observed(i)(t, j)) values(i)(t, j) += p.offset;
          }
        }
      }
    }
    if (p.missing > 0.0) {
      std::mt19937_64 mrng(p.seed ^ 0x5bd1e995ULL);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Index i = 0; i < p.n; ++i) {
        for (Index t = 0; t < len(i); ++t) {
          for (Index j = 0; j < p.features; ++j) {
            if (observed(i)(t, j) && u(mrng) < p.missing) {
              observed(i)(t, j) = false;
              values(i)(t, j) = kMissing;
            }
          }
        }
      }
    }
    ds.check_consistency();
    return std::move(ds);
  }
};

void require_features(const SynthParams& p, Index k, const char* gen) {
  if (p.features < k) {
    throw ParameterError(std::string("synth ") + gen + ": needs at least " + std::to_string(k) + " features");
  }
}

}  // namespace

Dataset synth_copy_task(const SynthParams& p) {
  require_features(p, 1, "copy-task");
  if (p.lag < 0) throw ParameterError("synth copy-task: lag must be nonnegative");
  Builder b(p, {p.label_name});
  const Index y = p.features;
  for (Index i = 0; i < p.n; ++i) {
    for (Index t = p.lag; t < b.len(i); ++t) b.set(i, t, y, b.flip(b.values(i)(t - p.lag, 0) > 0.0 ? 1.0 : 0.0));
  }
  return b.finish();
}

Dataset synth_piecewise_regime(const SynthParams& p) {
  require_features(p, 2, "piecewise-regime");
  Builder b(p, {p.label_name});
  const Index y = p.features;
  const Index switch_at = p.steps / 2;
  for (Index i = 0; i < p.n; ++i) {
    for (Index t = 0; t < b.len(i); ++t) {
      const Index src = t < switch_at ? 0 : 1;
      b.set(i, t, y, b.flip(b.values(i)(t, src) > 0.0 ? 1.0 : 0.0));
    }
  }
  return b.finish();
}

Dataset synth_signal_noise(const SynthParams& p) {
  require_features(p, std::max<Index>(1, p.signal_features), "signal-noise");
  Builder b(p, {p.label_name});
  const Index y = p.features;
  Vector w = Vector::Zero(p.features);
  for (Index d = 0; d < p.features; ++d) {
    w(d) = d < p.signal_features ? 1.0 : std::pow(p.decay, static_cast<double>(d - p.signal_features + 1));
  }
  for (Index i = 0; i < p.n; ++i) {
    for (Index t = 0; t < b.len(i); ++t) {
      const double s = b.values(i).row(t).head(p.features).dot(w) + p.noise * b.gauss(b.rng);
      b.set(i, t, y, s > 0.0 ? 1.0 : 0.0);
    }
  }
  return b.finish();
}

Dataset synth_treatment_rule(const SynthParams& p) {
  require_features(p, 1, "treatment-rule");
  Builder b(p, {p.treatment_name, p.label_name});
  const Index a = p.features;
  const Index o = p.features + 1;
  for (Index i = 0; i < p.n; ++i) {
    for (Index t = 0; t < b.len(i); ++t) {
      const double prob = 1.0 / (1.0 + std::exp(-b.values(i)(t, 0)));
      b.set(i, t, a, b.unif(b.rng) < prob ? 1.0 : 0.0);
    }
    b.set(i, 0, o, b.unif(b.rng) < 0.5 ? 1.0 : 0.0);
    for (Index t = 1; t < b.len(i); ++t) b.set(i, t, o, b.flip(b.values(i)(t - 1, a)));
  }
  return b.finish();
}

Dataset synth_imputer_sensitive(const SynthParams& p) {
  require_features(p, 1, "imputer-sensitive");
  Builder b(p, {p.label_name});
  const Index y = p.features;
  for (Index i = 0; i < p.n; ++i) {
    const double c = b.gauss(b.rng);
    std::uniform_int_distribution<Index> at(0, b.len(i) - 1);
    const Index seen = at(b.rng);
    for (Index t = 0; t < b.len(i); ++t) {
      b.values(i)(t, 0) = t == seen ? c : kMissing;
      b.observed(i)(t, 0) = t == seen;
      b.set(i, t, y, b.flip(c > 0.0 ? 1.0 : 0.0));
    }
  }
  return b.finish();
}

Dataset synth_combined(const SynthParams& p) {
  require_features(p, 2, "combined");
  Builder b(p, {p.label_name});
  const Index y = p.features;
  const Index switch_at = p.steps / 2;
  for (Index i = 0; i < p.n; ++i) {
    const double c = b.gauss(b.rng);
    std::uniform_int_distribution<Index> at(0, b.len(i) - 1);
    const Index seen = at(b.rng);
    for (Index t = 0; t < b.len(i); ++t) {
      b.values(i)(t, 0) = t == seen ? c : kMissing;
      b.observed(i)(t, 0) = t == seen;
      const double signal = t < switch_at ? c : b.values(i)(t, 1);
      b.set(i, t, y, b.flip(signal > 0.0 ? 1.0 : 0.0));
    }
  }
  return b.finish();
}

Dataset synthesize(const std::string& generator, const SynthParams& p) {
  if (generator == "copy-task") return synth_copy_task(p);
  if (generator == "piecewise-regime") return synth_piecewise_regime(p);
  if (generator == "signal-noise") return synth_signal_noise(p);
  if (generator == "treatment-rule") return synth_treatment_rule(p);
  if (generator == "imputer-sensitive") return synth_imputer_sensitive(p);
  if (generator == "combined") return synth_combined(p);
  throw ParameterError("unknown generator '" + generator +
                       "' (expected copy-task, piecewise-regime, signal-noise, treatment-rule, imputer-sensitive or "
                       "combined)");
}

SynthParams apply_synth_overrides(SynthParams p, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, value] : overrides) {
    double v = 0.0;
    const bool numeric = parse_number(value, v);
    const auto need = [&]() {
      if (!numeric) throw ParameterError("synth parameter '" + key + "' needs a number, got '" + value + "'");
      return v;
    };
    const auto need_count = [&]() {
      const double x = need();
      if (x < 0 || x != std::floor(x)) throw ParameterError("synth parameter '" + key + "' must be a whole number");
      return static_cast<Index>(x);
    };
    if (key == "n") p.n = need_count();
    else if (key == "steps" || key == "T") p.steps = need_count();
    else if (key == "min_steps") p.min_steps = need_count();
    else if (key == "features" || key == "D") p.features = need_count();
    else if (key == "missing") p.missing = need();
    else if (key == "noise") p.noise = need();
    else if (key == "seed") p.seed = static_cast<std::uint64_t>(need_count());
    else if (key == "lag") p.lag = static_cast<int>(need_count());
    else if (key == "signal_features") p.signal_features = need_count();
    else if (key == "decay") p.decay = need();
    else if (key == "offset") p.offset = need();
    else if (key == "label_name") p.label_name = value;
    else if (key == "treatment_name") p.treatment_name = value;
    else if (key == "id_prefix") p.id_prefix = value;
    else throw ParameterError("unknown synth parameter '" + key + "'");
  }
  return p;
}

}  // namespace tspipe
