#include "criteria.hpp"

#include "support/fixtures.hpp"

#include "tspipe/csv_io.hpp"
#include "tspipe/errors.hpp"
#include "tspipe/feature_selection.hpp"
#include "tspipe/imputation.hpp"
#include "tspipe/metrics.hpp"
#include "tspipe/models.hpp"
#include "tspipe/pathways.hpp"
#include "tspipe/posthoc.hpp"
#include "tspipe/preprocessing.hpp"
#include "tspipe/recurrent_net.hpp"
#include "tspipe/split.hpp"
#include "tspipe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <iomanip>
#include <random>
#include <set>

namespace tspipe::acceptance {

namespace {

using testing::same_bits;

/// Random raw data with four static columns (two extra numeric ones with
/// holes) on top of the shared fixture.
Dataset raw_dataset(std::mt19937_64& rng, Index n, Index steps, Index features, double missing) {
  Dataset ds = testing::random_dataset(rng, n, steps, features, missing);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto& st = ds.static_features;
  st.values.conservativeResize(n, 4);
  st.observed.conservativeResize(n, 4);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 2; j < 4; ++j) {
      st.observed(i, j) = u(rng) >= missing;
      st.values(i, j) = st.observed(i, j) ? g(rng) + static_cast<double>(j) * st.values(i, 1) : kMissing;
    }
  }
  st.levels.resize(4);
  ds.static_names.insert(ds.static_names.end(), {"s1", "s2"});
  return ds;
}

std::vector<Index> shuffled(Index n, std::mt19937_64& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

void component_contract(Checks& ck, const std::string& label, const Component& proto, const Dataset& ds,
                        std::mt19937_64& rng) {
  std::string why;
  auto fresh = proto.clone_unfitted();
  bool threw = false;
  try {
    fresh->transform(ds);
  } catch (const ContractError&) {
    threw = true;
  }
  ck.expect(threw, label + ": transform before fit did not raise");

  auto a = proto.clone_unfitted();
  const Dataset fa = a->fit_transform(ds);
  auto b = proto.clone_unfitted();
  b->fit(ds);
  const Dataset fb = b->transform(ds);
  bool ok = same_dataset(fa, fb, &why);
  ck.expect(ok, label + ": fit_transform differs from fit then transform (" + why + ")");

  const Dataset test = slice_fold(ds, Fold::Test);
  const Dataset tt = b->transform(test);
  const auto perm = shuffled(test.instances(), rng);
  ok = same_dataset(b->transform(permuted(test, perm)), permuted(tt, perm), &why);
  ck.expect(ok, label + ": test transform depends on row order (" + why + ")");
  ok = same_dataset(tt, slice_fold(fb, Fold::Test), &why);
  ck.expect(ok, label + ": test transform depends on the other rows (" + why + ")");
}

bool same_predictions(const SequenceArray& a, const SequenceArray& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
    for (Index k = 0; k < a[i].size(); ++k)
      if (!same_bits(a[i].data()[k], b[i].data()[k])) return false;
  }
  return true;
}

void predictor_contract(Checks& ck, const std::string& label, const Predictor& proto, const Dataset& ds,
                        std::mt19937_64& rng) {
  auto fresh = proto.clone_unfitted("fresh");
  bool threw = false;
  try {
    fresh->predict(ds);
  } catch (const Error&) {
    threw = true;
  }
  ck.expect(threw, label + ": predict before fit did not raise");

  auto a = proto.clone_unfitted("a");
  auto b = proto.clone_unfitted("b");
  a->fit(ds);
  b->fit(ds);
  ck.expect(same_predictions(a->predict(ds), b->predict(ds)), label + ": refit is not reproducible");

  const Dataset test = slice_fold(ds, Fold::Test);
  const auto pt = a->predict(test);
  const auto perm = shuffled(test.instances(), rng);
  SequenceArray reordered;
  for (Index r : perm) reordered.push_back(pt[static_cast<std::size_t>(r)]);
  ck.expect(same_predictions(a->predict(permuted(test, perm)), reordered), label + ": predictions depend on row order");
  const auto full = a->predict(ds);
  SequenceArray test_rows;
  for (Index r : ds.rows_in(Fold::Test)) test_rows.push_back(full[static_cast<std::size_t>(r)]);
  ck.expect(same_predictions(pt, test_rows), label + ": predictions depend on the other rows");
}

Outcome contracts() {
  std::mt19937_64 rng(101);
  Checks ck;
  const Dataset raw = train_val_test_split(raw_dataset(rng, 80, 10, 4, 0.3), 0.2, 0.3, 1);

  ProblemSpec reg;
  reg.label_names = {"f0"};
  reg.max_seq_len = 8;
  reg.window = 2;
  reg.task = Task::Regression;
  reg.metric = MetricName::Mse;

  std::vector<std::pair<std::string, std::unique_ptr<Component>>> on_raw;
  on_raw.emplace_back("filter-negative", std::make_unique<FilterNegative>());
  on_raw.emplace_back("one-hot", std::make_unique<OneHotEncoder>(std::vector<std::string>{"kind"}));
  for (auto m : {NormalizationMode::MinMax, NormalizationMode::Standard, NormalizationMode::None})
    on_raw.emplace_back("normalizer " + to_string(m), std::make_unique<Normalizer>(m));
  on_raw.emplace_back("normalizer with exclusions",
                      std::make_unique<Normalizer>(NormalizationMode::Standard, std::vector<std::string>{"f0"}));
  on_raw.emplace_back("problem maker", std::make_unique<ProblemMaker>(reg));
  for (auto m : {StaticImputation::Mean, StaticImputation::Median, StaticImputation::Knn, StaticImputation::MiceLite})
    on_raw.emplace_back("static imputer " + to_string(m), std::make_unique<StaticImputer>(m));
  for (auto m : {TemporalImputation::Mean, TemporalImputation::Median, TemporalImputation::Locf,
                 TemporalImputation::Linear, TemporalImputation::CubicSpline})
    on_raw.emplace_back("temporal imputer " + to_string(m), std::make_unique<TemporalImputer>(m));
  on_raw.emplace_back("composer", std::make_unique<PipelineComposer>(compose(
                                      FilterNegative{}, OneHotEncoder({"kind"}), Normalizer(NormalizationMode::MinMax),
                                      StaticImputer(StaticImputation::Median),
                                      TemporalImputer(TemporalImputation::Locf), ProblemMaker(reg))));
  for (const auto& [label, c] : on_raw) component_contract(ck, label, *c, raw, rng);

  // Selectors and imputers on a complete supervised problem.
  Dataset prob = make_problem(raw, reg);
  prob = StaticImputer(StaticImputation::Median).fit_transform(prob);
  prob = TemporalImputer(TemporalImputation::Linear).fit_transform(prob);
  for (auto m : {SelectionMethod::None, SelectionMethod::GreedyAddition, SelectionMethod::GreedyDeletion,
                 SelectionMethod::RecursiveAddition, SelectionMethod::RecursiveDeletion}) {
    for (auto k : {FeatureKind::Static, FeatureKind::Temporal}) {
      FeatureSelector sel(m, k, 2);
      component_contract(ck, "selector " + sel.name(), sel, prob, rng);
    }
  }
  component_contract(ck, "temporal imputer on complete data", TemporalImputer(TemporalImputation::Mean), prob, rng);

  // Predictors: fit is reproducible, predictions are per-row.
  Dataset cls_raw = raw;
  for (auto& v : cls_raw.temporal.values)
    for (Index t = 0; t < v.rows(); ++t)
      if (!std::isnan(v(t, 0))) v(t, 0) = v(t, 0) > 0 ? 1.0 : 0.0;
  ProblemSpec cls = reg;
  cls.task = Task::Classification;
  cls.metric = MetricName::Auc;
  Dataset cprob = make_problem(cls_raw, cls);
  cprob = StaticImputer(StaticImputation::Mean).fit_transform(cprob);
  cprob = TemporalImputer(TemporalImputation::Locf).fit_transform(cprob);
  for (auto cell : {CellType::Linear, CellType::Rnn, CellType::Gru}) {
    ModelConfig c;
    c.model_type = cell;
    c.h_dim = 6;
    c.epoch = 3;
    predictor_contract(ck, "sequence model " + to_string(cell), SequenceModel(c), cprob, rng);
  }
  SynthParams tp;
  tp.n = 60;
  tp.steps = 8;
  tp.label_name = "outcome";
  ProblemSpec ts;
  ts.label_names = {"outcome"};
  ts.treatment_names = {"treatment"};
  ts.window = 1;
  ts.max_seq_len = 8;
  const Dataset tprob = train_val_test_split(make_problem(synth_treatment_rule(tp), ts), 0.2, 0.3, 2);
  TreatmentConfig tc;
  tc.base.h_dim = 6;
  tc.base.epoch = 3;
  tc.projection_horizon = 2;
  predictor_contract(ck, "treatment model", TreatmentModel(tc), tprob, rng);

  return ck.outcome("28 components and 4 predictors honour the fit/transform contract");
}

/// `loaded` with its categorical codes re-expressed in `source`'s level
/// vocabulary (the loader numbers levels by first appearance and drops
/// unused ones).
Dataset in_vocabulary(Dataset loaded, const Dataset& source) {
  auto& st = loaded.static_features;
  for (Index j = 0; j < st.values.cols(); ++j) {
    const auto& from = st.levels[static_cast<std::size_t>(j)];
    const auto& to = source.static_features.levels[static_cast<std::size_t>(j)];
    if (from.empty()) continue;
    for (Index i = 0; i < st.values.rows(); ++i) {
      if (!st.observed(i, j)) continue;
      const auto& level = from[static_cast<std::size_t>(st.values(i, j))];
      const auto it = std::find(to.begin(), to.end(), level);
      st.values(i, j) = it == to.end() ? -1.0 : static_cast<double>(it - to.begin());
    }
  }
  st.levels = source.static_features.levels;
  return loaded;
}

Outcome loader_round_trip() {
  Checks ck;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> n(1, 40), steps(1, 12), feats(1, 5);
    Dataset raw = raw_dataset(rng, n(rng), steps(rng), feats(rng), 0.1 * static_cast<double>(seed % 6));
    raw.temporal_names[0] = "heart rate, \"bpm\"";
    raw.static_features.levels[1] = {"ELECTIVE", "EMERGENCY", "URGENT, \"triage\""};
    for (const char* ext : {".csv", ".csv.gz"}) {
      testing::TempDir dir;
      const auto s1 = dir / (std::string("s1") + ext), t1 = dir / (std::string("t1") + ext);
      const auto s2 = dir / (std::string("s2") + ext), t2 = dir / (std::string("t2") + ext);
      write_csv(raw, s1, t1);
      const Dataset once = load_csv(s1, t1);
      write_csv(once, s2, t2);
      const Dataset twice = load_csv(s2, t2);
      std::string why;
      bool ok = testing::raw_equal(once, twice, &why);
      ck.expect(ok, "seed " + std::to_string(seed) + ext + ": reload differs (" + why + ")");
      ok = testing::raw_equal(raw, in_vocabulary(once, raw), &why);
      ck.expect(ok, "seed " + std::to_string(seed) + ext + ": first load differs from the source (" + why + ")");
    }
  }
  return ck.outcome("20 random datasets, plain and gzip, identical after export and reload");
}

Outcome problem_alignment() {
  Checks ck;
  std::mt19937_64 rng(303);
  int identity_cases = 0;
  for (int c = 0; c < 500; ++c) {
    std::uniform_int_distribution<Index> n(1, 12), steps(1, 16), feats(2, 4);
    const Dataset raw = testing::random_dataset(rng, n(rng), steps(rng), feats(rng), 0.3);
    const Index d = raw.temporal.features();
    const Index label = std::uniform_int_distribution<Index>(0, d - 1)(rng);
    ProblemSpec spec;
    spec.max_seq_len = std::uniform_int_distribution<int>(1, 16)(rng);
    spec.window = c % 4 == 0 ? 0 : std::uniform_int_distribution<int>(0, spec.max_seq_len - 1)(rng);
    spec.task = Task::Regression;
    spec.metric = MetricName::Mse;
    spec.label_names = {raw.temporal_names[static_cast<std::size_t>(label)]};
    identity_cases += spec.window == 0;
    const Dataset out = make_problem(raw, spec);
    const std::string tag = "case " + std::to_string(c);
    for (Index i = 0; i < raw.instances(); ++i) {
      const auto si = static_cast<std::size_t>(i);
      const Index len = raw.temporal.seq_len(i);
      const Index kept = std::min<Index>(len, spec.max_seq_len);
      const Index first = len - kept;
      // Oracle: the label feature after truncation, read `window` steps ahead.
      const auto& y = out.labels->values[si];
      const auto& valid = out.labels->valid[si];
      bool ok = out.temporal.seq_len(i) == kept && y.rows() == spec.max_seq_len;
      for (Index t = 0; ok && t < spec.max_seq_len; ++t) {
        const Index src = t + spec.window;
        const bool want = src < kept && raw.temporal.observed[si](first + src, label);
        ok = valid(t, 0) == want && (!want || same_bits(y(t, 0), raw.temporal.values[si](first + src, label)));
        if (ok && spec.window == 0 && t < kept) {
          ok = same_bits(out.temporal.time(i, t), raw.temporal.time(i, first + t)) &&
               valid(t, 0) == raw.temporal.observed[si](first + t, label);
        }
      }
      ck.expect(ok, tag + " instance " + std::to_string(i) + " misaligned");
    }
  }
  return ck.outcome("500 random cases (" + std::to_string(identity_cases) + " with window 0) match the shift oracle");
}

void imputation_properties(Checks& ck, const std::string& label, Component& imp, const Dataset& ds, bool temporal) {
  imp.fit(ds);
  const Dataset out = imp.transform(ds);
  bool preserved = true, complete = true;
  for (Index i = 0; i < ds.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (temporal) {
      for (Index t = 0; t < ds.temporal.seq_len(i); ++t) {
        for (Index j = 0; j < ds.temporal.features(); ++j) {
          const double v = out.temporal.values[si](t, j);
          complete = complete && out.temporal.observed[si](t, j) && std::isfinite(v);
          if (ds.temporal.observed[si](t, j)) preserved = preserved && same_bits(v, ds.temporal.values[si](t, j));
        }
      }
    } else {
      for (Index j = 0; j < ds.static_features.values.cols(); ++j) {
        const double v = out.static_features.values(i, j);
        complete = complete && out.static_features.observed(i, j) && std::isfinite(v);
        if (ds.static_features.observed(i, j)) preserved = preserved && same_bits(v, ds.static_features.values(i, j));
      }
    }
  }
  ck.expect(preserved, label + ": an observed cell changed");
  ck.expect(complete, label + ": output has holes");
  std::string why;
  const bool ok = same_dataset(imp.transform(out), out, &why);
  ck.expect(ok, label + ": not idempotent (" + why + ")");
}

Outcome imputation() {
  Checks ck;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(400 + seed);
    const Dataset ds = train_val_test_split(raw_dataset(rng, 120, 12, 4, 0.1 + 0.15 * static_cast<double>(seed)), 0.2, 0.2, seed);
    const std::string tag = "seed " + std::to_string(seed) + " ";
    for (auto m : {TemporalImputation::Mean, TemporalImputation::Median, TemporalImputation::Locf,
                   TemporalImputation::Linear, TemporalImputation::CubicSpline}) {
      TemporalImputer imp(m);
      imputation_properties(ck, tag + "temporal " + to_string(m), imp, ds, true);
    }
    for (auto m : {StaticImputation::Mean, StaticImputation::Median, StaticImputation::Knn, StaticImputation::MiceLite}) {
      StaticImputer imp(m);
      imputation_properties(ck, tag + "static " + to_string(m), imp, ds, false);
    }
  }

  // Affine series: interior holes are recovered exactly by linear interpolation.
  std::mt19937_64 rng(450);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset ds = testing::random_dataset(rng, 200, 20, 3, 0.0);
  double worst = 0.0;
  Index interior = 0;
  for (Index i = 0; i < ds.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    for (Index j = 0; j < 3; ++j) {
      const double a = 5.0 + 5.0 * u(rng), b = (u(rng) - 0.5) * 0.4;
      for (Index t = 0; t < ds.temporal.seq_len(i); ++t) {
        ds.temporal.values[si](t, j) = a + b * ds.temporal.time(i, t);
        ds.temporal.observed[si](t, j) = u(rng) >= 0.5;
      }
    }
  }
  TemporalImputer lin(TemporalImputation::Linear);
  const Dataset out = lin.fit_transform(ds);
  for (Index i = 0; i < ds.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    for (Index j = 0; j < 3; ++j) {
      std::vector<Index> obs;
      for (Index t = 0; t < ds.temporal.seq_len(i); ++t)
        if (ds.temporal.observed[si](t, j)) obs.push_back(t);
      if (obs.size() < 2) continue;
      // Recover the generating line from two observed points.
      const double t0 = ds.temporal.time(i, obs.front()), t1 = ds.temporal.time(i, obs.back());
      const double y0 = ds.temporal.values[si](obs.front(), j), y1 = ds.temporal.values[si](obs.back(), j);
      for (Index t = obs.front() + 1; t < obs.back(); ++t) {
        if (ds.temporal.observed[si](t, j)) continue;
        const double at = ds.temporal.time(i, t);
        const double want = y0 + (y1 - y0) * (at - t0) / (t1 - t0);
        worst = std::max(worst, std::abs(out.temporal.values[si](t, j) - want) / std::abs(want));
        ++interior;
      }
    }
  }
  ck.expect(interior > 500, "too few interior holes (" + std::to_string(interior) + ")");
  ck.expect(worst <= 1e-12, "affine interpolation relative error " + sci(worst));
  return ck.outcome("5 temporal and 4 static methods on 5 datasets; affine max rel. err " + sci(worst) + " over " + std::to_string(interior) + " interior cells");
}

std::optional<double> auc_oracle(const std::vector<double>& s, const std::vector<double>& y) {
  double pos = 0, neg = 0, wins = 0;
  for (std::size_t i = 0; i < s.size(); ++i) (y[i] > 0.5 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] > 0.5 && y[j] < 0.5) wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
  return wins / (pos * neg);
}

std::optional<double> apr_oracle(const std::vector<double>& s, const std::vector<double>& y) {
  double pos = 0;
  for (double v : y) pos += v > 0.5;
  if (pos == 0) return std::nullopt;
  std::vector<double> thresholds = s;
  std::sort(thresholds.rbegin(), thresholds.rend());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double ap = 0, prev_recall = 0;
  for (double th : thresholds) {
    double tp = 0, k = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= th) {
        k += 1;
        tp += y[i] > 0.5;
      }
    }
    ap += (tp / pos - prev_recall) * (tp / k);
    prev_recall = tp / pos;
  }
  return ap;
}

bool close(const std::optional<double>& a, const std::optional<double>& b, double tol) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= tol;
}

Outcome metric_oracles() {
  Checks ck;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int ties = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto m = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 100)(rng));
    const int range = std::uniform_int_distribution<int>(1, 1000)(rng);
    const double p = u(rng);
    std::vector<double> s(m), y(m);
    for (std::size_t i = 0; i < m; ++i) {
      // Dyadic grid scores: exact under the transforms below, ties likely for small ranges.
      s[i] = std::uniform_int_distribution<int>(-range, range)(rng) / 64.0;
      y[i] = u(rng) < p ? 1.0 : 0.0;
    }
    ties += std::set<double>(s.begin(), s.end()).size() < m;
    const auto fa = auc(s, y), oa = auc_oracle(s, y);
    const auto fp = average_precision(s, y), op = apr_oracle(s, y);
    ck.expect(close(fa, oa, 1e-12), "auc differs from the pairwise oracle in case " + std::to_string(c));
    ck.expect(close(fp, op, 1e-12), "apr differs from the direct oracle in case " + std::to_string(c));
    if (fa && oa) worst = std::max(worst, std::abs(*fa - *oa));
    if (fp && op) worst = std::max(worst, std::abs(*fp - *op));

    std::vector<double> cubic(m), expo(m);
    for (std::size_t i = 0; i < m; ++i) {
      cubic[i] = s[i] * s[i] * s[i] + s[i];
      expo[i] = std::exp(s[i] / 8.0);
    }
    for (const auto* t : {&cubic, &expo}) {
      ck.expect(close(auc(*t, y), fa, 1e-12), "auc changed under a monotone transform in case " + std::to_string(c));
      ck.expect(close(average_precision(*t, y), fp, 1e-12),
                "apr changed under a monotone transform in case " + std::to_string(c));
    }
  }
  return ck.outcome("1000 instances (" + std::to_string(ties) + " with ties), max deviation " + sci(worst));
}

SequenceBatch<double> random_batch(std::mt19937_64& rng, Index batch, Index steps, Index in, Index out, Task task) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SequenceBatch<double> b;
  for (Index t = 0; t < steps; ++t) {
    b.inputs.push_back(Matrix::NullaryExpr(batch, in, [&] { return g(rng); }));
    b.targets.push_back(Matrix::NullaryExpr(batch, out, [&] {
      return task == Task::Classification ? (u(rng) < 0.5 ? 0.0 : 1.0) : g(rng);
    }));
    b.weights.push_back(Matrix::NullaryExpr(batch, out, [&] { return u(rng) < 0.2 ? 0.0 : 1.0; }));
  }
  return b;
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-7) over all
/// parameters. The numeric gradient is the fourth-order central difference
/// with step 1e-4, which keeps round-off below the tolerance for gradients
/// down to about 1e-7.
double gradient_error(CellType cell, Index hidden, Index layers, Index steps, Task task, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Index in = 3, out = 2, batch = 4;
  RecurrentNet net(cell, in, hidden, layers, out, seed);
  const auto b = random_batch(rng, batch, steps, in, out, task);
  const double ridge = 0.05;
  auto grads = net.zeros_like();
  masked_loss(net, b, task, ridge, &grads);
  double worst = 0.0;
  const double h = 1e-4;
  for (std::size_t p = 0; p < net.parameters().size(); ++p) {
    for (Index k = 0; k < net.parameters()[p].size(); ++k) {
      double& w = net.parameters()[p].data()[k];
      const double keep = w;
      const auto loss_at = [&](double offset) {
        w = keep + offset;
        const double l = masked_loss<double>(net, b, task, ridge, nullptr);
        w = keep;
        return l;
      };
      const double numeric = (8.0 * (loss_at(h) - loss_at(-h)) - (loss_at(2 * h) - loss_at(-2 * h))) / (12.0 * h);
      const double analytic = grads[p].data()[k];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-7}));
    }
  }
  return worst;
}

Outcome gradient_checks() {
  Checks ck;
  double worst = 0.0;
  int runs = 0;
  for (auto cell : {CellType::Rnn, CellType::Gru}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(600 + seed);
      const Index hidden = std::uniform_int_distribution<Index>(1, 8)(rng);
      const Index steps = std::uniform_int_distribution<Index>(1, 5)(rng);
      const Index layers = 1 + static_cast<Index>(seed % 2);
      for (auto task : {Task::Classification, Task::Regression}) {
        const double err = gradient_error(cell, hidden, layers, steps, task, seed);
        worst = std::max(worst, err);
        ++runs;
        ck.expect(err <= 1e-4, to_string(cell) + " seed " + std::to_string(seed) + " rel. err " + std::to_string(err));
      }
    }
  }
  return ck.outcome(std::to_string(runs) + " networks (rnn, gru; 20 seeds; h <= 8, T <= 5), max rel. err " +
                    sci(worst));
}

Outcome calibration() {
  Checks ck;
  double worst_slope = 0.0, worst_auc = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(700 + seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 20000;
    std::vector<double> y(n), over(n);
    for (int i = 0; i < n; ++i) {
      const double p = u(rng);
      y[i] = u(rng) < p ? 1.0 : 0.0;
      over[i] = 1.0 / (1.0 + std::exp(-3.0 * clipped_logit(p)));
    }
    PlattCalibrator cal;
    cal.fit(over, y);
    std::vector<double> mapped(n);
    for (int i = 0; i < n; ++i) mapped[i] = cal.apply(over[i]);
    const double d_auc = std::abs(*auc(mapped, y) - *auc(over, y));
    const double d_slope = std::abs(cal.slope() - 1.0 / 3.0);
    worst_auc = std::max(worst_auc, d_auc);
    worst_slope = std::max(worst_slope, d_slope);
    ck.expect(d_auc <= 1e-12, "seed " + std::to_string(seed) + ": auc moved by " + std::to_string(d_auc));
    ck.expect(d_slope <= 0.05, "seed " + std::to_string(seed) + ": slope " + std::to_string(cal.slope()));
  }
  return ck.outcome("5 seeds at N=20000, max |a - 1/3| " + fixed(worst_slope) + ", max auc shift " + sci(worst_auc));
}

}  // namespace

std::vector<Criterion> core_criteria() {
  return {
      {1, "component contracts", 120, contracts},
      {2, "loader round trip", 30, loader_round_trip},
      {3, "problem-maker alignment", 60, problem_alignment},
      {4, "imputation properties", 120, imputation},
      {5, "metric oracles", 60, metric_oracles},
      {6, "gradient checks", 120, gradient_checks},
      {13, "calibration", 60, calibration},
  };
}

}  // namespace tspipe::acceptance
