#include "doctest.h"
#include "support/fixtures.hpp"

#include "tspipe/errors.hpp"
#include "tspipe/feature_selection.hpp"
#include "tspipe/preprocessing.hpp"
#include "tspipe/split.hpp"
#include "tspipe/synth.hpp"

using namespace tspipe;

namespace {

/// Temporal feature 0 carries the label, features 1..9 are noise.
Dataset label_copy(std::uint64_t seed) {
  SynthParams p;
  p.n = 150;
  p.steps = 8;
  p.features = 10;
  p.signal_features = 1;
  p.seed = seed;
  Dataset raw = synth_signal_noise(p);
  const Index y = *find_name(raw.temporal_names, "label");
  for (auto& v : raw.temporal.values) v.col(0) = v.col(y);
  ProblemSpec spec;
  spec.label_names = {"label"};
  Normalizer norm(NormalizationMode::Standard, {"label"});
  return train_val_test_split(make_problem(norm.fit_transform(raw), spec), 0.25, 0.0, seed);
}

}  // namespace

TEST_CASE("method none is the identity") {
  const Dataset ds = label_copy(1);
  FeatureSelector s(SelectionMethod::None, FeatureKind::Temporal, 1);
  const Dataset out = s.fit_transform(ds);
  CHECK(out.temporal_names == ds.temporal_names);
  CHECK(tspipe::testing::raw_equal(ds, out));
}

TEST_CASE("recursive-addition picks the label copy, matching the singleton oracle") {
  const Dataset ds = label_copy(2);
  FeatureSelector s(SelectionMethod::RecursiveAddition, FeatureKind::Temporal, 1);
  const Dataset out = s.fit_transform(ds);
  CHECK(s.selected() == std::vector<Index>{0});
  CHECK(out.temporal_names == std::vector<std::string>{"x0"});
  // Oracle: train the proxy on each singleton and take the arg-max.
  FeatureSelector oracle(SelectionMethod::GreedyAddition, FeatureKind::Temporal, 10);
  oracle.fit(ds);
  const auto& sc = oracle.scores();
  CHECK(std::max_element(sc.begin(), sc.end()) - sc.begin() == 0);
}

TEST_CASE("greedy-addition keeps the best singletons") {
  const Dataset ds = label_copy(3);
  FeatureSelector s(SelectionMethod::GreedyAddition, FeatureKind::Temporal, 3);
  s.fit(ds);
  REQUIRE(s.selected().size() == 3);
  double worst_kept = 1e9, best_dropped = -1e9;
  for (Index j = 0; j < 10; ++j) {
    const bool kept = std::find(s.selected().begin(), s.selected().end(), j) != s.selected().end();
    const double v = s.scores()[static_cast<std::size_t>(j)];
    if (kept) worst_kept = std::min(worst_kept, v);
    else best_dropped = std::max(best_dropped, v);
  }
  CHECK(worst_kept >= best_dropped);
  CHECK(std::find(s.selected().begin(), s.selected().end(), 0) != s.selected().end());
}

TEST_CASE("deletion variants") {
  const Dataset ds = label_copy(4);
  FeatureSelector all(SelectionMethod::RecursiveDeletion, FeatureKind::Temporal, 10);
  const Dataset out = all.fit_transform(ds);
  CHECK(out.temporal_names == ds.temporal_names);

  FeatureSelector g(SelectionMethod::GreedyDeletion, FeatureKind::Temporal, 1);
  g.fit(ds);
  CHECK(g.selected() == std::vector<Index>{0});
}

TEST_CASE("static selection and test-time transform") {
  const Dataset ds = label_copy(5);
  FeatureSelector s(SelectionMethod::GreedyAddition, FeatureKind::Static, 1);
  const Dataset out = s.fit_transform(ds);
  CHECK(out.static_names.size() == 1);
  const Dataset test = ds.subset({5, 4, 3});
  const Dataset t = s.transform(test);
  CHECK(t.static_names == out.static_names);
  CHECK(t.static_features.values.col(0) == test.static_features.values.col(s.selected()[0]));
}

TEST_CASE("feature_number out of range") {
  const Dataset ds = label_copy(6);
  CHECK_THROWS_AS(FeatureSelector(SelectionMethod::GreedyAddition, FeatureKind::Temporal, 0), ParameterError);
  FeatureSelector s(SelectionMethod::GreedyAddition, FeatureKind::Temporal, 11);
  CHECK_THROWS_AS(s.fit(ds), ParameterError);
  CHECK(parse_selection_method("greedy-addtion") == SelectionMethod::GreedyAddition);
}
