#include "doctest.h"
#include "support/fixtures.hpp"

#include "tspipe/errors.hpp"
#include "tspipe/metrics.hpp"
#include "tspipe/models.hpp"
#include "tspipe/posthoc.hpp"
#include "tspipe/preprocessing.hpp"
#include "tspipe/split.hpp"
#include "tspipe/synth.hpp"

#include <random>

using namespace tspipe;

namespace {

Dataset copy_problem(Index n, std::uint64_t seed) {
  SynthParams p;
  p.n = n;
  p.seed = seed;
  ProblemSpec spec;
  spec.label_names = {"label"};
  Normalizer norm(NormalizationMode::Standard, {"label"});
  return train_val_test_split(make_problem(norm.fit_transform(synth_copy_task(p)), spec), 0.2, 0.2, seed);
}

ModelConfig copy_config(std::uint64_t seed) {
  ModelConfig c;
  c.epoch = 40;
  c.learning_rate = 0.005;
  c.batch_size = 32;
  c.seed = seed;
  return c;
}

/// A GRU trained once on the copy task, shared by the interpretation tests.
struct CopyFixture {
  Dataset ds = copy_problem(600, 11);
  SequenceModel model{copy_config(11)};
  CopyFixture() { model.fit(ds); }
};

const CopyFixture& copy_fixture() {
  static const CopyFixture f;
  return f;
}

}  // namespace

TEST_CASE("gaussian quantiles") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  CHECK(normal_quantile(0.3) == doctest::Approx(-normal_quantile(0.7)).epsilon(1e-14));
  CHECK_THROWS_AS(normal_quantile(1.0), ParameterError);
}

TEST_CASE("identical members give zero spread; member order does not matter") {
  const Dataset ds = copy_problem(60, 1);
  auto factory = [](std::uint64_t seed) {
    ModelConfig c;
    c.model_type = CellType::Linear;
    c.epoch = 2;
    c.seed = seed;
    return std::make_unique<SequenceModel>(c);
  };
  UncertaintyOptions o;
  o.members = 3;
  o.bootstrap = false;
  o.fresh_seeds = false;
  EnsembleUncertainty e(factory, o);
  e.fit(ds);
  const auto est = e.estimate(ds);
  for (const auto& m : est.stddev) CHECK(m.isZero(0.0));
  CHECK(est.z == doctest::Approx(1.95996).epsilon(1e-5));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<SequenceArray> outs(5, SequenceArray{Matrix(3, 2)});
  for (auto& o2 : outs) o2[0] = Matrix::NullaryExpr(3, 2, [&] { return g(rng); });
  const auto a = summarize_members(outs, 0.9, Task::Regression);
  std::reverse(outs.begin(), outs.end());
  std::swap(outs[1], outs[3]);
  const auto b = summarize_members(outs, 0.9, Task::Regression);
  CHECK(a.stddev[0] == b.stddev[0]);
  CHECK(a.mean[0] == b.mean[0]);
  CHECK((a.half_width[0].array() >= 0).all());

  UncertaintyOptions bad;
  bad.members = 1;
  CHECK_THROWS_AS(EnsembleUncertainty(factory, bad), ParameterError);
}

TEST_CASE("bootstrap ensemble keeps the copy-task accuracy") {
  const Dataset ds = copy_problem(600, 3);
  auto factory = [](std::uint64_t seed) { return std::make_unique<SequenceModel>(copy_config(seed)); };
  SequenceModel single(copy_config(3));
  single.fit(ds);
  UncertaintyOptions o;
  o.members = 3;
  o.seed = 3;
  EnsembleUncertainty e(factory, o);
  e.fit(ds);
  const auto est = e.estimate(ds);
  const auto test = ds.rows_in(Fold::Test);
  const double ens = *pooled_metric(MetricName::Auc, *ds.labels, est.mean, &test);
  const double one = *pooled_metric(MetricName::Auc, *ds.labels, single.predict(ds), &test);
  CHECK(ens >= one - 0.02);
  for (std::size_t i = 0; i < est.mean.size(); ++i) {
    CHECK((est.lower[i].array() >= 0).all());
    CHECK((est.upper[i].array() <= 1).all());
  }
}

TEST_CASE("platt scaling recovers known miscalibration") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 20000;
  std::vector<double> p(n), y(n), over(n);
  for (int i = 0; i < n; ++i) {
    p[i] = u(rng);
    y[i] = u(rng) < p[i] ? 1.0 : 0.0;
    over[i] = 1.0 / (1.0 + std::exp(-3.0 * clipped_logit(p[i])));
  }
  PlattCalibrator cal;
  cal.fit(p, y);
  CHECK(cal.slope() == doctest::Approx(1.0).epsilon(0.08));
  CHECK(std::abs(cal.intercept()) < 0.08);

  PlattCalibrator c3;
  c3.fit(over, y);
  CHECK(std::abs(c3.slope() - 1.0 / 3.0) <= 0.05);

  std::vector<double> mapped(n);
  for (int i = 0; i < n; ++i) mapped[i] = c3.apply(over[i]);
  CHECK(std::abs(*auc(mapped, y) - *auc(over, y)) <= 1e-12);

  double prev = -1.0;
  for (int k = 1; k < 1000; ++k) {
    const double v = c3.apply(k / 1000.0);
    CHECK(v > prev);
    prev = v;
  }
  const std::vector<double> ones(10, 1.0), s(10, 0.3);
  CHECK_THROWS_AS(PlattCalibrator().fit(s, ones), DataError);
}

TEST_CASE("permutation importance: signal dominates, noise is null") {
  const auto& f = copy_fixture();
  const auto test = f.ds.rows_in(Fold::Test);
  const auto imp = interpret_global(f.model, f.ds, test, 5, 1);
  REQUIRE(imp.names.size() == 5 + 2);
  CHECK(imp.names[0] == "x0");
  for (std::size_t j = 1; j < imp.names.size(); ++j) CHECK(imp.mean[0] > imp.mean[j]);
  int null_ok = 0;
  for (std::size_t j = 1; j < imp.names.size(); ++j)
    if (std::abs(imp.mean[j]) <= 2 * imp.std_error[j] + 1e-3) ++null_ok;
  CHECK(null_ok >= static_cast<int>(imp.names.size()) - 2);
  CHECK_THROWS_AS(interpret_global(f.model, f.ds, test, 0), ParameterError);
}

TEST_CASE("occlusion saliency") {
  const auto& f = copy_fixture();
  const auto test = f.ds.rows_in(Fold::Test);
  const std::vector<Index> few(test.begin(), test.begin() + 5);
  const auto imp = interpret_instancewise(f.model, f.ds, few);
  REQUIRE(imp.temporal.size() == few.size());
  CHECK(imp.temporal[0].rows() == f.ds.temporal.steps());
  CHECK(imp.temporal[0].cols() == f.ds.temporal.features());
  CHECK(imp.static_scores.rows() == 5);
  CHECK(imp.static_scores.cols() == f.ds.static_features.values.cols());
  CHECK((imp.temporal[0].array() >= 0).all());

  // A cell that already equals the baseline scores zero.
  Dataset ds = f.ds;
  const Index r = few[0];
  ds.temporal.values[static_cast<std::size_t>(r)](3, 2) = imp.temporal_baseline(2);
  const auto again = interpret_instancewise(f.model, ds, {r});
  CHECK(again.temporal[0](3, 2) == 0.0);

  int hits = 0, total = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const Index row = test[k];
    for (Index t = 4; t < f.ds.temporal.seq_len(row); ++t) {
      const Matrix s = occlusion_for_output(f.model, f.ds, row, t, imp.temporal_baseline);
      Index br = 0, bc = 0;
      s.maxCoeff(&br, &bc);
      hits += br == t - 4 && bc == 0;
      ++total;
    }
  }
  MESSAGE("occlusion hits " << hits << "/" << total);
  CHECK(hits >= 0.9 * total);
}
