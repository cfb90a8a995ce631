#include "doctest.h"

#include "tspipe/metrics.hpp"

#include <cmath>

using namespace tspipe;

TEST_CASE("auc by hand") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<double> y{0, 0, 1, 1};
  CHECK(*auc(s, y) == doctest::Approx(0.75).epsilon(1e-15));
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9};
  CHECK(*auc(perfect, y) == 1.0);
  const std::vector<double> one_class{1, 1, 1, 1};
  CHECK_FALSE(auc(s, one_class).has_value());
}

TEST_CASE("average precision by hand") {
  // Ranked: 0.8(+), 0.4(-), 0.35(+), 0.1(-): precisions at positives 1 and 2/3.
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<double> y{0, 0, 1, 1};
  CHECK(*average_precision(s, y) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
}

TEST_CASE("regression metrics of exact predictions are zero") {
  const std::vector<double> y{1.5, -2, 3};
  CHECK(mean_squared_error(y, y) == 0.0);
  CHECK(mean_absolute_error(y, y) == 0.0);
  CHECK(*compute_metric(MetricName::Rmse, y, y) == 0.0);
}

TEST_CASE("evaluate reports undefined metrics as absent") {
  LabelTensor labels;
  labels.values = {Matrix::Constant(3, 1, 1.0)};
  labels.valid = {Mask::Constant(3, 1, true)};
  const SequenceArray pred{Matrix::Constant(3, 1, 0.7)};
  const auto rep = evaluate(labels, pred, {MetricName::Auc, MetricName::Mse}, ProblemKind::Online, {"y"});
  CHECK(rep.values.count("auc") == 0);
  CHECK(rep.absent.count("auc") == 1);
  CHECK(rep.values.at("mse") == doctest::Approx(0.09));
  CHECK(rep.to_text().find("\"absent\"") != std::string::npos);
}

TEST_CASE("per-step and pooled metrics skip invalid cells") {
  LabelTensor labels;
  labels.values = {Matrix(2, 1), Matrix(2, 1)};
  labels.values[0] << 1, 0;
  labels.values[1] << 0, 1;
  labels.valid = {Mask::Constant(2, 1, true), Mask::Constant(2, 1, true)};
  labels.valid[1](1, 0) = false;
  SequenceArray pred{Matrix(2, 1), Matrix(2, 1)};
  pred[0] << 0.9, 0.2;
  pred[1] << 0.1, 0.0;
  const auto steps = per_step_metric(MetricName::Auc, labels, pred);
  CHECK(*steps[0] == 1.0);
  CHECK_FALSE(steps[1].has_value());
  CHECK(*pooled_metric(MetricName::Auc, labels, pred) == 1.0);
}
