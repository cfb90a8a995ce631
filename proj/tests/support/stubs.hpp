#pragma once

// Cheap predictors with known behaviour for exercising the optimizers.

#include "tspipe/automl.hpp"
#include "tspipe/errors.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <string>

namespace tspipe::testing {

/// Logistic (or least-squares) model of the label on one temporal feature
/// read `lag` steps back: p[t] = sigmoid(a + b * x[max(t - lag, 0)]).
/// Hyperparameters: lag in {0,1,2,3}, l2 penalty on b in [1e-4, 10] (log).
class FeatureReader final : public Predictor {
 public:
  FeatureReader(std::string feature, int lag, double l2, std::string id)
      : feature_(std::move(feature)), lag_(lag), l2_(l2), id_(std::move(id)) {}

  std::string name() const override { return "reader:" + feature_; }
  std::string model_id() const override { return id_; }
  bool fitted() const override { return fitted_; }
  int lag() const { return lag_; }

  static HyperparameterSpace space() {
    HyperparameterSpace s;
    s.dimensions.push_back(Dimension::discrete("lag", {0, 1, 2, 3}));
    s.dimensions.push_back(Dimension::continuous("l2", 1e-4, 10.0, true));
    return s;
  }

  void fit(const Dataset& ds) override {
    col_ = *find_name(ds.temporal_names, feature_);
    task_ = ds.spec->task;
    std::vector<double> xs, ys;
    for (Index i : ds.rows_in(Fold::Train)) {
      const auto ui = static_cast<std::size_t>(i);
      for (Index t = 0; t < ds.labels->values[ui].rows(); ++t) {
        if (!ds.labels->valid[ui](t, 0)) continue;
        xs.push_back(input(ds, i, t));
        ys.push_back(ds.labels->values[ui](t, 0));
      }
    }
    a_ = b_ = 0.0;
    for (int iter = 0; iter < 30; ++iter) {
      double ga = 0, gb = l2_ * b_, haa = 1e-9, hab = 0, hbb = l2_ + 1e-9;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const double z = a_ + b_ * xs[k];
        const double p = task_ == Task::Classification ? 1.0 / (1.0 + std::exp(-z)) : z;
        const double w = task_ == Task::Classification ? p * (1.0 - p) + 1e-12 : 1.0;
        ga += p - ys[k];
        gb += (p - ys[k]) * xs[k];
        haa += w;
        hab += w * xs[k];
        hbb += w * xs[k] * xs[k];
      }
      const double det = haa * hbb - hab * hab;
      a_ -= (hbb * ga - hab * gb) / det;
      b_ -= (haa * gb - hab * ga) / det;
    }
    fitted_ = true;
  }

  SequenceArray predict(const Dataset& ds) const override {
    if (!fitted_) throw ContractError("reader: predict before fit");
    SequenceArray out;
    for (Index i = 0; i < ds.instances(); ++i) {
      const Index steps = ds.labels ? ds.labels->values[static_cast<std::size_t>(i)].rows() : ds.temporal.steps();
      Matrix m = Matrix::Zero(steps, 1);
      for (Index t = 0; t < std::min<Index>(steps, ds.temporal.seq_len(i)); ++t) {
        const double z = a_ + b_ * input(ds, i, t);
        m(t, 0) = task_ == Task::Classification ? 1.0 / (1.0 + std::exp(-z)) : z;
      }
      out.push_back(std::move(m));
    }
    return out;
  }

  HyperparameterSpace hyperparameter_space() const override { return space(); }
  std::unique_ptr<Predictor> clone_unfitted(const std::string& id) const override {
    return std::make_unique<FeatureReader>(feature_, lag_, l2_, id);
  }

 private:
  double input(const Dataset& ds, Index i, Index t) const {
    return ds.temporal.values[static_cast<std::size_t>(i)](std::max<Index>(t - lag_, 0), col_);
  }

  std::string feature_;
  int lag_;
  double l2_;
  std::string id_;
  Index col_ = 0;
  Task task_ = Task::Classification;
  double a_ = 0.0, b_ = 0.0;
  bool fitted_ = false;
};

inline ModelClass reader_class(const std::string& feature) {
  ModelClass mc;
  mc.name = "reader-" + feature;
  mc.space = unconditional(FeatureReader::space());
  mc.make = [feature](const Configuration& c, std::uint64_t, const std::string& id) -> std::unique_ptr<Predictor> {
    return std::make_unique<FeatureReader>(feature, static_cast<int>(number(c, "lag")), number(c, "l2"), id);
  };
  return mc;
}

/// Regression stub predicting label + (h - 5) on labelled cells, so every
/// per-step MSE equals (h - 5)^2. Counts fit calls.
class QuadraticStub final : public Predictor {
 public:
  QuadraticStub(double h, std::string id, std::atomic<int>* fits) : h_(h), id_(std::move(id)), fits_(fits) {}

  std::string name() const override { return "quadratic"; }
  std::string model_id() const override { return id_; }
  bool fitted() const override { return fitted_; }
  double h() const { return h_; }

  void fit(const Dataset&) override {
    if (fits_) ++*fits_;
    fitted_ = true;
  }
  SequenceArray predict(const Dataset& ds) const override {
    SequenceArray out = ds.labels->values;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = (ds.labels->valid[i]).select(out[i].array() + (h_ - 5.0), 0.0).matrix();
    }
    return out;
  }
  HyperparameterSpace hyperparameter_space() const override {
    HyperparameterSpace s;
    s.dimensions.push_back(Dimension::discrete("h", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    return s;
  }
  std::unique_ptr<Predictor> clone_unfitted(const std::string& id) const override {
    return std::make_unique<QuadraticStub>(h_, id, fits_);
  }

 private:
  double h_;
  std::string id_;
  std::atomic<int>* fits_;
  bool fitted_ = false;
};

inline ModelClass quadratic_class(std::atomic<int>* fits = nullptr) {
  ModelClass mc;
  mc.name = "quadratic";
  mc.space = unconditional(QuadraticStub(0, "", nullptr).hyperparameter_space());
  mc.make = [fits](const Configuration& c, std::uint64_t, const std::string& id) -> std::unique_ptr<Predictor> {
    return std::make_unique<QuadraticStub>(number(c, "h"), id, fits);
  };
  return mc;
}

}  // namespace tspipe::testing
