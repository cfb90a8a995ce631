#pragma once

#include "tspipe/component.hpp"

#include <string>
#include <vector>

namespace tspipe {

enum class StaticImputation { Mean, Median, Knn, MiceLite };
enum class TemporalImputation { Mean, Median, Locf, Linear, CubicSpline };

/// Accepts the built-in names (and `mice` for mice-lite). Deep imputers
/// (gain, mrnn, tgain, missforest) are rejected with a pointer to the
/// extension contract.
StaticImputation parse_static_imputation(const std::string& s);
/// `quadratic`, `cubic` and `spline` all map to the natural cubic spline.
TemporalImputation parse_temporal_imputation(const std::string& s);
std::string to_string(StaticImputation m);
std::string to_string(TemporalImputation m);

struct StaticImputerParams {
  int k = 5;                 // knn neighbours
  int rounds = 3;            // mice-lite sweeps
  double ridge = 1e-3;       // mice-lite penalty
};

class StaticImputer final : public Component {
 public:
  explicit StaticImputer(StaticImputation method, StaticImputerParams params = {});

  std::string name() const override { return "static-imputation:" + to_string(method_); }
  std::unique_ptr<Component> clone_unfitted() const override {
    return std::make_unique<StaticImputer>(method_, params_);
  }

  /// Features that had no observed training cell and were filled with 0.
  const std::vector<std::string>& warnings() const { return warnings_; }

 protected:
  void do_fit(const Dataset& dataset) override;
  Dataset do_transform(const Dataset& dataset) const override;

 private:
  Vector fill_row(const Eigen::RowVectorXd& values, const Eigen::Array<bool, 1, Eigen::Dynamic>& observed) const;

  StaticImputation method_;
  StaticImputerParams params_;
  Vector fallback_;  // mean or median per feature
  Matrix train_values_;
  Mask train_observed_;
  // mice-lite: [round][feature] -> (intercept, coefficients over all features)
  std::vector<std::vector<std::pair<double, Vector>>> rounds_;
  std::vector<std::string> warnings_;
};

class TemporalImputer final : public Component {
 public:
  explicit TemporalImputer(TemporalImputation method) : method_(method) {}

  std::string name() const override { return "temporal-imputation:" + to_string(method_); }
  std::unique_ptr<Component> clone_unfitted() const override { return std::make_unique<TemporalImputer>(method_); }

  const Vector& feature_mean() const { return mean_; }
  const Vector& feature_median() const { return median_; }

 protected:
  void do_fit(const Dataset& dataset) override;
  Dataset do_transform(const Dataset& dataset) const override;

 private:
  TemporalImputation method_;
  Vector mean_;
  Vector median_;
};

/// Fit on the training rows of `dataset`, then fill every row.
Dataset impute_static(const Dataset& dataset, StaticImputation method, StaticImputerParams params = {});
Dataset impute_temporal(const Dataset& dataset, TemporalImputation method);

/// Natural cubic spline through (x, y) evaluated at `at`, clamped to the end
/// values outside [x.front(), x.back()]. Requires strictly increasing x.
double natural_cubic_spline(const std::vector<double>& x, const std::vector<double>& y, double at);

double median_of(std::vector<double> v);

}  // namespace tspipe
