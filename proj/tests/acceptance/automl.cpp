#include "criteria.hpp"

#include "support/stubs.hpp"

#include "tspipe/automl.hpp"
#include "tspipe/metrics.hpp"
#include "tspipe/preprocessing.hpp"
#include "tspipe/split.hpp"
#include "tspipe/synth.hpp"

#include <algorithm>

namespace tspipe::acceptance {

namespace {

constexpr Index kSteps = 12;

Dataset piecewise(std::uint64_t seed) {
  SynthParams p;
  p.n = 400;
  p.steps = kSteps;
  p.features = 2;
  p.noise = 0.1;
  p.seed = seed;
  ProblemSpec spec;
  spec.label_names = {"label"};
  spec.max_seq_len = static_cast<int>(kSteps);
  return train_val_test_split(make_problem(synth_piecewise_regime(p), spec), 0.3, 0.2, seed);
}

SearchOptions options(int num_iter, std::uint64_t seed) {
  SearchOptions o;
  o.num_iter = num_iter;
  o.seed = seed;
  return o;
}

double pooled(const Predictor& m, const Dataset& ds, Fold fold) {
  const auto rows = ds.rows_in(fold);
  return *pooled_metric(MetricName::Auc, *ds.labels, m.predict(ds), &rows);
}

Outcome regime_recovery() {
  Checks ck;
  int good = 0;
  std::ostringstream switches;
  const ModelClass both = union_class({testing::reader_class("x0"), testing::reader_class("x1")});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset ds = piecewise(seed);
    const auto r = optimize_stepwise(both, ds, {MetricName::Auc}, options(20, seed));
    const auto& sel = r.ensemble->selection();
    // First step served by the second-half class; every step before it must
    // use the first-half class and every step after it the second-half one.
    Index at = kSteps;
    for (Index t = 0; t < kSteps; ++t) {
      if (r.ensemble->member(sel[static_cast<std::size_t>(t)]).name() == "reader:x1") {
        at = t;
        break;
      }
    }
    bool single = true;
    for (Index t = 0; t < kSteps; ++t) {
      const std::string want = t < at ? "reader:x0" : "reader:x1";
      single = single && r.ensemble->member(sel[static_cast<std::size_t>(t)]).name() == want;
    }
    const bool near = single && std::abs(at - kSteps / 2) <= 1;
    const double ens = pooled(*r.ensemble, ds, Fold::Val);
    bool dominates = true;
    for (const auto& e : r.search.trace.entries) dominates = dominates && ens >= pooled(*e.model, ds, Fold::Val);
    good += near && dominates;
    switches << (seed ? "," : "") << (single ? std::to_string(at) : "x");
  }
  ck.expect(good >= 8, std::to_string(good) + "/10 seeds recovered the switch with a dominating ensemble");
  return ck.outcome(std::to_string(good) + "/10 seeds; switch steps [" + switches.str() + "] for T/2 = " +
                    std::to_string(kSteps / 2));
}

Outcome sash_dominance() {
  Checks ck;
  int good = 0;
  double worst_margin = 1.0;
  ModelConfig linear;
  linear.model_type = CellType::Linear;
  linear.epoch = 10;
  const std::vector<ModelClass> classes = {testing::reader_class("x0"), testing::reader_class("x1"),
                                           sequence_model_class(linear)};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset ds = piecewise(100 + seed);
    const auto sash = optimize_sash(classes, ds, {MetricName::Auc}, options(10, seed));
    const double sash_test = pooled(*sash.model, ds, Fold::Test);
    double best_single = 0.0;
    for (const auto& mc : classes) {
      const auto r = optimize_hyperparameters(mc, ds, {MetricName::Auc}, options(10, seed));
      best_single = std::max(best_single, pooled(*r.best().model, ds, Fold::Test));
    }
    good += sash_test >= best_single - 0.01;
    worst_margin = std::min(worst_margin, sash_test - best_single);
  }
  ck.expect(good >= 8, std::to_string(good) + "/10 seeds within 0.01 of the best single class");
  return ck.outcome(std::to_string(good) + "/10 seeds with SASH >= best single class - 0.01 (worst margin " +
                    fixed(worst_margin) + ")");
}

Outcome bo_competence() {
  Checks ck;
  SynthParams qp;
  qp.n = 40;
  qp.steps = 6;
  qp.features = 2;
  qp.seed = 11;
  ProblemSpec qs;
  qs.label_names = {"label"};
  qs.max_seq_len = 6;
  qs.task = Task::Regression;
  qs.metric = MetricName::Mse;
  const Dataset quad = train_val_test_split(make_problem(synth_piecewise_regime(qp), qs), 0.3, 0.2, 11);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = optimize_hyperparameters(testing::quadratic_class(), quad, {MetricName::Mse}, options(20, seed));
    hits += *r.trace.incumbents()[14] == 0.0;
  }
  ck.expect(hits >= 9, std::to_string(hits) + "/10 seeds found the quadratic optimum within 15 iterations");

  SynthParams p;
  p.n = 200;
  p.steps = 8;
  p.features = 2;
  ProblemSpec spec;
  spec.label_names = {"label"};
  spec.max_seq_len = 8;
  PipelineMenus menus;
  menus.static_imputation = {static_imputation_option("mean"), static_imputation_option("knn")};
  menus.temporal_imputation = {temporal_imputation_option("mean"), temporal_imputation_option("locf"),
                               temporal_imputation_option("linear")};
  menus.feature_selection = {feature_selection_option("none", 0)};
  menus.models = {testing::reader_class("x0"), testing::reader_class("x1")};
  double gp_mean = 0.0, random_mean = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    p.seed = 200 + seed;
    const Dataset ds = train_val_test_split(make_problem(synth_imputer_sensitive(p), spec), 0.3, 0.2, seed);
    const auto gp = optimize_pipeline(menus, ds, {MetricName::Auc}, SearchMethod::Gp, options(10, seed));
    const auto rnd = optimize_pipeline(menus, ds, {MetricName::Auc}, SearchMethod::Random, options(10, seed));
    gp_mean += *gp.search.best().score / 10.0;
    random_mean += *rnd.search.best().score / 10.0;
  }
  ck.expect(gp_mean >= random_mean, "GP pipeline search mean incumbent " + fixed(gp_mean) + " below random " +
                                        fixed(random_mean));
  return ck.outcome("quadratic optimum by iteration 15 in " + std::to_string(hits) +
                    "/10 seeds; pipeline search mean val AUC GP " + fixed(gp_mean) + " vs random " + fixed(random_mean));
}

}  // namespace

std::vector<Criterion> automl_criteria() {
  return {
      {8, "stepwise regime recovery", 600, regime_recovery},
      {9, "stacked stepwise dominance", 900, sash_dominance},
      {10, "search competence", 600, bo_competence},
  };
}

}  // namespace tspipe::acceptance
