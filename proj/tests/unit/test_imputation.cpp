#include "doctest.h"
#include "support/fixtures.hpp"

#include "tspipe/errors.hpp"
#include "tspipe/imputation.hpp"

using namespace tspipe;
using tspipe::testing::load_from_text;

TEST_CASE("static median fills from training values") {
  auto ds = load_from_text("id,age\na,1\nb,3\nc,\n", "id,time,variable,value\na,0,hr,1\nb,0,hr,1\nc,0,hr,1\n");
  const Dataset out = impute_static(ds, StaticImputation::Median);
  CHECK(out.static_features.values(2, 0) == 2.0);
  CHECK(out.static_features.observed.all());
}

TEST_CASE("temporal linear and locf by hand") {
  auto ds = load_from_text("id,age\na,1\n", "id,time,variable,value\na,0,v,2\na,2,w,0\na,4,v,10\n");
  const Dataset lin = impute_temporal(ds, TemporalImputation::Linear);
  const Index v = *find_name(lin.temporal_names, "v");
  CHECK(lin.temporal.values[0](1, v) == 6.0);

  auto s = load_from_text("id,age\na,1\n", "id,time,variable,value\na,0,w,0\na,1,v,5\na,2,w,0\na,3,w,0\n");
  const Dataset locf = impute_temporal(s, TemporalImputation::Locf);
  const Index c = *find_name(locf.temporal_names, "v");
  for (Index t = 0; t < 4; ++t) CHECK(locf.temporal.values[0](t, c) == 5.0);
}

TEST_CASE("fully observed data is unchanged by every method") {
  auto ds = load_from_text("id,age,h\na,1,2\nb,3,4\n",
                           "id,time,variable,value\na,0,hr,1\na,1,hr,2\nb,0,hr,3\nb,1,hr,5\n");
  for (auto m : {StaticImputation::Mean, StaticImputation::Median, StaticImputation::Knn, StaticImputation::MiceLite})
    CHECK(tspipe::testing::raw_equal(ds, impute_static(ds, m)));
  for (auto m : {TemporalImputation::Mean, TemporalImputation::Median, TemporalImputation::Locf,
                 TemporalImputation::Linear, TemporalImputation::CubicSpline})
    CHECK(tspipe::testing::raw_equal(ds, impute_temporal(ds, m)));
}

TEST_CASE("imputation method names") {
  CHECK(parse_static_imputation("mice") == StaticImputation::MiceLite);
  CHECK(parse_temporal_imputation("spline") == TemporalImputation::CubicSpline);
  CHECK_THROWS_AS(parse_temporal_imputation("gain"), ParameterError);
  CHECK_THROWS_AS(parse_static_imputation("bogus"), ParameterError);
}

TEST_CASE("never-observed static feature falls back to zero with a warning") {
  auto ds = load_from_text("id,age,h\na,1,\nb,3,\n", "id,time,variable,value\na,0,hr,1\nb,0,hr,1\n");
  StaticImputer imp(StaticImputation::Mean);
  const Dataset out = imp.fit_transform(ds);
  CHECK(out.static_features.values(0, 1) == 0.0);
  CHECK(imp.warnings() == std::vector<std::string>{"h"});
}

TEST_CASE("natural cubic spline reproduces lines and hits knots") {
  const std::vector<double> x{0.0, 1.0, 2.5, 4.0};
  const std::vector<double> y{1.0, 3.0, 6.0, 9.0};
  CHECK(natural_cubic_spline(x, y, 1.0) == doctest::Approx(3.0));
  CHECK(natural_cubic_spline(x, y, 1.75) == doctest::Approx(4.5));
  CHECK(natural_cubic_spline(x, y, 10.0) == 9.0);
}
