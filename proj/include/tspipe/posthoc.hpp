#pragma once

#include "tspipe/component.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tspipe {

/// Inverse standard normal CDF (rational approximation polished by Newton
/// steps; |error| below 1e-14 on (1e-300, 1 - 1e-16)).
double normal_quantile(double p);

struct UncertaintyOptions {
  int members = 5;
  double level = 0.95;
  bool bootstrap = true;    // resample train instances per member
  bool fresh_seeds = true;  // member k uses seed + k
  std::uint64_t seed = 0;
};

struct UncertaintyEstimate {
  SequenceArray mean;
  SequenceArray stddev;      // sample standard deviation across members
  SequenceArray half_width;  // z(level) * stddev
  SequenceArray lower;       // mean - half_width, clipped to [0, 1] for classification
  SequenceArray upper;
  double level = 0.95;
  double z = 0.0;
};

/// Ensemble of independently trained members; prediction spread is the
/// uncertainty estimate.
class EnsembleUncertainty {
 public:
  EnsembleUncertainty(PredictorFactory factory, UncertaintyOptions options);
  /// Trains every member on its (resampled) copy of the train fold; the val
  /// fold is kept intact for each member's epoch selection.
  void fit(const Dataset& dataset);
  UncertaintyEstimate estimate(const Dataset& dataset) const;
  std::size_t size() const { return members_.size(); }
  const Predictor& member(std::size_t k) const { return *members_.at(k); }

 private:
  PredictorFactory factory_;
  UncertaintyOptions options_;
  std::vector<std::unique_ptr<Predictor>> members_;
};

/// Per-cell mean / spread of member outputs. Cell values are sorted before
/// summation so the result does not depend on member order.
UncertaintyEstimate summarize_members(const std::vector<SequenceArray>& outputs, double level, Task task);

UncertaintyEstimate estimate_uncertainty(const PredictorFactory& factory, const Dataset& dataset, int members,
                                         double level = 0.95);

/// Platt scaling: p -> sigmoid(a * logit(p) + b), fitted by maximum
/// likelihood on validation predictions. The fit clips logits to +-13.8; the
/// map uses the exact logit and a slope of at least 1e-6, so it is strictly
/// increasing on (0, 1).
class PlattCalibrator {
 public:
  void fit(std::span<const double> scores, std::span<const double> labels);
  /// Fits on the valid cells of the given rows of a prediction array.
  void fit(const LabelTensor& labels, const SequenceArray& predictions, const std::vector<Index>& rows);
  double apply(double p) const;
  SequenceArray apply(const SequenceArray& predictions) const;
  double slope() const { return a_; }
  double intercept() const { return b_; }
  bool fitted() const { return fitted_; }

 private:
  double a_ = 1.0;
  double b_ = 0.0;
  bool fitted_ = false;
};

/// Logit with the input clipped so the result lies in [-13.8, 13.8].
double clipped_logit(double p);

struct GlobalImportance {
  std::vector<std::string> names;  // temporal features, then static features
  std::vector<bool> is_static;
  std::vector<double> mean;        // mean metric degradation; may be negative
  std::vector<double> std_error;
  double baseline = 0.0;           // unpermuted metric
  MetricName metric = MetricName::Auc;
};

/// Permutation importance on `rows`: each feature is shuffled `repeats` times
/// (temporal features across instances within each step, static features
/// across instances) and the metric degradation recorded (positive = worse).
GlobalImportance interpret_global(const Predictor& model, const Dataset& dataset, const std::vector<Index>& rows,
                                  int repeats, std::uint64_t seed = 0);

struct InstanceImportance {
  std::vector<std::string> ids;
  std::vector<Matrix> temporal;  // per instance [steps x temporal features]
  Matrix static_scores;          // [instances x static features]
  Vector temporal_baseline;
  Vector static_baseline;
};

/// Train-fold means of the observed temporal / static cells (0 where none).
std::pair<Vector, Vector> occlusion_baselines(const Dataset& dataset);

/// Occlusion saliency: score of a cell = sum over the instance's valid
/// outputs of |change in prediction| when that cell alone is replaced by the
/// feature's train mean.
InstanceImportance interpret_instancewise(const Predictor& model, const Dataset& dataset,
                                          const std::vector<Index>& rows);

/// Saliency of every temporal input cell of one instance for one output step:
/// [steps x features] of |change in output `step`|.
Matrix occlusion_for_output(const Predictor& model, const Dataset& dataset, Index row, Index step,
                            const Vector& temporal_baseline);

}  // namespace tspipe
