#include "doctest.h"
#include "support/fixtures.hpp"

#include "tspipe/errors.hpp"
#include "tspipe/imputation.hpp"
#include "tspipe/metrics.hpp"
#include "tspipe/pathways.hpp"
#include "tspipe/preprocessing.hpp"
#include "tspipe/split.hpp"
#include "tspipe/synth.hpp"

#include <cmath>
#include <random>

using namespace tspipe;
using tspipe::testing::TempDir;

namespace {

Dataset treatment_problem(Index n, std::uint64_t seed, bool zero_actions = false, bool as_feature = false) {
  SynthParams p;
  p.n = n;
  p.steps = 12;
  p.seed = seed;
  p.label_name = "outcome";
  Dataset raw = synth_treatment_rule(p);
  if (zero_actions) {
    const Index a = *find_name(raw.temporal_names, "treatment");
    for (auto& v : raw.temporal.values) v.col(a).setZero();
  }
  ProblemSpec spec;
  spec.label_names = {"outcome"};
  if (!as_feature) spec.treatment_names = {"treatment"};
  spec.window = 1;
  Normalizer norm(NormalizationMode::Standard, {"outcome", "treatment"});
  return train_val_test_split(make_problem(norm.fit_transform(raw), spec), 0.2, 0.2, seed);
}

TreatmentConfig small_config(int horizon = 3) {
  TreatmentConfig c;
  c.base.h_dim = 16;
  c.base.epoch = 15;
  c.base.learning_rate = 0.01;
  c.projection_horizon = horizon;
  return c;
}

Dataset sensing_problem(Index n, std::uint64_t seed, Index signal, double decay) {
  SynthParams p;
  p.n = n;
  p.steps = 8;
  p.features = 10;
  p.signal_features = signal;
  p.decay = decay;
  p.noise = 0.5;
  p.seed = seed;
  ProblemSpec spec;
  spec.label_names = {"label"};
  Normalizer norm(NormalizationMode::Standard, {"label"});
  return train_val_test_split(make_problem(norm.fit_transform(synth_signal_noise(p)), spec), 0.2, 0.2, seed);
}

}  // namespace

TEST_CASE("treatment model requires actions and a recurrent cell") {
  const Dataset plain = treatment_problem(20, 1, false, true);
  TreatmentModel m(small_config());
  try {
    m.fit(plain);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("treatment_names") != std::string::npos);
  }
  TreatmentConfig lin = small_config();
  lin.base.model_type = CellType::Linear;
  CHECK_THROWS_AS(TreatmentModel{lin}, ParameterError);
  TreatmentConfig zero = small_config();
  zero.projection_horizon = 0;
  CHECK_THROWS_AS(TreatmentModel{zero}, ParameterError);
}

TEST_CASE("counterfactual queries on the outcome-follows-action rule") {
  const Dataset ds = treatment_problem(300, 2);
  TreatmentModel m(small_config(5));
  m.fit(ds);
  const auto val = ds.rows_in(Fold::Val);
  CHECK(*pooled_metric(MetricName::Auc, *ds.labels, m.predict(ds), &val) >= 0.95);
  for (int h = 1; h <= 3; ++h) {
    const auto f1 = m.predict_factual(ds, h);
    const auto f2 = m.predict_counterfactual(ds, recorded_actions(ds, h), h);
    for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f1[i] == f2[i]);
    const auto ones = m.predict_counterfactual(ds, constant_plan(ds, h, 1.0), h);
    const auto zeros = m.predict_counterfactual(ds, constant_plan(ds, h, 0.0), h);
    int ordered = 0;
    for (std::size_t i = 0; i < ones.size(); ++i) ordered += (ones[i].array() > zeros[i].array()).all();
    CHECK(ordered >= 0.95 * static_cast<double>(ones.size()));
    CHECK(ones[0].rows() == h);
  }
  CHECK_THROWS_AS(m.predict_counterfactual(ds, constant_plan(ds, 6, 1.0), 6), ParameterError);

  // Step 0 of the factual query is the encoder's own per-step prediction.
  const auto full = m.predict(ds);
  const auto f1 = m.predict_factual(ds, 1);
  const auto hl = horizon_labels(ds, 1);
  for (Index i = 0; i < ds.instances(); ++i) {
    Index last = ds.temporal.seq_len(i) - 1;
    while (!ds.labels->valid[static_cast<std::size_t>(i)](last, 0)) --last;
    CHECK(f1[static_cast<std::size_t>(i)](0, 0) == doctest::Approx(full[static_cast<std::size_t>(i)](last, 0)).epsilon(1e-12));
  }
  CHECK(hl.values[0].rows() == 1);
}

TEST_CASE("with zero actions and horizon 1 the encoder is the plain recurrent predictor") {
  const Dataset with_actions = treatment_problem(60, 3, true, false);
  const Dataset as_feature = treatment_problem(60, 3, true, true);
  REQUIRE(as_feature.temporal_names.back() == "treatment");
  TreatmentModel tm(small_config(1));
  tm.fit(with_actions);
  SequenceModel sm(small_config(1).base);
  sm.fit(as_feature);
  REQUIRE(tm.encoder_history().size() == sm.history().size());
  for (std::size_t e = 0; e < sm.history().size(); ++e) {
    CHECK(tm.encoder_history()[e].train_loss == sm.history()[e].train_loss);
    CHECK(tm.encoder_history()[e].val_loss == sm.history()[e].val_loss);
  }
  const auto a = tm.predict(with_actions), b = sm.predict(as_feature);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("treatment model save and load") {
  const Dataset ds = treatment_problem(40, 4);
  TreatmentModel m(small_config(3));
  m.fit(ds);
  TempDir dir;
  m.save(dir / "t.model");
  const auto loaded = load_predictor(dir / "t.model");
  const auto& tm = dynamic_cast<const TreatmentModel&>(*loaded);
  const auto a = m.predict_counterfactual(ds, constant_plan(ds, 3, 1.0), 3);
  const auto b = tm.predict_counterfactual(ds, constant_plan(ds, 3, 1.0), 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("randomize: exact counts, determinism, no-op full budget") {
  const Dataset ds = sensing_problem(40, 5, 2, 0.0);
  SensingPolicy r(SensingKind::Randomize, 0.5, {}, 9);
  r.fit(ds);
  const auto s1 = r.select(ds), s2 = r.select(ds);
  for (Index i = 0; i < ds.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    CHECK(s1[si].count() == static_cast<Index>(std::floor(0.5 * 10 * ds.temporal.seq_len(i))));
    CHECK((s1[si] == s2[si]).all());
  }
  const auto full = r.apply(ds, nullptr, 1.0);
  CHECK(tspipe::testing::raw_equal(full.dataset, ds));
  CHECK_THROWS_AS(SensingPolicy(SensingKind::Randomize, 0.0), ParameterError);
  CHECK_THROWS_AS(SensingPolicy(SensingKind::Randomize, 1.5), ParameterError);
  CHECK_THROWS_AS(r.select(ds, 0.0), ParameterError);
  const std::string csv = selection_to_csv(ds, s1);
  CHECK(csv.rfind("id,time,variable,selected\n", 0) == 0);
}

TEST_CASE("budget feasibility under uneven costs, only measured cells selectable") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  Dataset ds = sensing_problem(30, 6, 2, 0.0);
  for (auto& m : ds.temporal.observed)
    for (Index t = 0; t < m.rows(); ++t) m(t, 3) = (t % 2 == 0) && m(t, 3);
  std::vector<double> costs(10);
  for (auto& c : costs) c = u(rng);
  costs[4] = 0.0;
  for (double b : {0.1, 0.33, 0.7, 0.9}) {
    SensingPolicy r(SensingKind::Randomize, b, costs, 1);
    r.fit(ds);
    const auto sel = r.select(ds);
    for (Index i = 0; i < ds.instances(); ++i) {
      const auto [total, used] = selection_cost(ds, sel, i, costs);
      CHECK(within_budget(used, total, b));
      CHECK_FALSE((sel[static_cast<std::size_t>(i)] && !ds.temporal.observed[static_cast<std::size_t>(i)]).any());
    }
  }
}

TEST_CASE("greedy-voi prefers the signal features") {
  const Dataset ds = sensing_problem(300, 7, 2, 0.0);
  std::vector<std::unique_ptr<SequenceModel>> members;
  std::vector<const Predictor*> refs;
  for (std::uint64_t k = 0; k < 2; ++k) {
    ModelConfig c;
    c.h_dim = 16;
    c.epoch = 15;
    c.learning_rate = 0.01;
    c.seed = k;
    members.push_back(std::make_unique<SequenceModel>(c));
    members.back()->fit(ds);
    refs.push_back(members.back().get());
  }
  SensingPolicy voi(SensingKind::GreedyVoi, 0.3);
  CHECK_THROWS_AS(voi.fit(ds, {refs[0]}), ParameterError);
  voi.fit(ds, refs);
  const Dataset test = slice_fold(ds, Fold::Test);
  const auto sel = voi.select(test);
  Vector rate = Vector::Zero(10);
  for (const auto& m : sel)
    for (Index j = 0; j < 10; ++j) rate(j) += static_cast<double>(m.col(j).count());
  // Leftover budget has to go somewhere, so compare against the mean noise rate.
  const double noise_rate = rate.tail(8).mean();
  CHECK(rate(0) >= 2 * noise_rate);
  CHECK(rate(1) >= 2 * noise_rate);
}
