#pragma once

#include "tspipe/component.hpp"

#include <string>
#include <vector>

namespace tspipe {

enum class SelectionMethod { None, GreedyAddition, GreedyDeletion, RecursiveAddition, RecursiveDeletion };
enum class FeatureKind { Static, Temporal };

/// Accepts the hyphenated method names; `greedy-addtion` is taken as an
/// alias of greedy-addition.
SelectionMethod parse_selection_method(const std::string& s);
std::string to_string(SelectionMethod m);
FeatureKind parse_feature_kind(const std::string& s);
std::string to_string(FeatureKind k);

/// Regularized linear model with a short fixed training budget.
PredictorFactory default_selection_proxy();

/// Keeps only the listed columns of one feature type (in the given order).
Dataset restrict_features(const Dataset& dataset, FeatureKind kind, const std::vector<Index>& keep);

/// Wrapper selection: every candidate feature set is scored by training the
/// proxy on the train fold and evaluating the problem metric on the val fold
/// (train fold when there is none). Every evaluation uses the same proxy seed.
///
/// greedy-addition: one pass, keep the best `feature_number` singletons.
/// greedy-deletion: one pass over leave-one-out sets, drop the features whose
///   removal hurts least.
/// recursive-addition / recursive-deletion: forward / backward stepwise with a
///   refit every round.
/// Ties go to the lower feature index. Selected columns keep their original order.
class FeatureSelector final : public Component {
 public:
  FeatureSelector(SelectionMethod method, FeatureKind kind, int feature_number,
                  PredictorFactory proxy = default_selection_proxy(), std::uint64_t seed = 0);

  std::string name() const override { return "feature-selection:" + to_string(kind_) + ":" + to_string(method_); }
  std::unique_ptr<Component> clone_unfitted() const override {
    return std::make_unique<FeatureSelector>(method_, kind_, feature_number_, proxy_, seed_);
  }

  /// Selected column indices (into the fitted dataset's feature list), ascending.
  const std::vector<Index>& selected() const { return selected_; }
  const std::vector<std::string>& selected_names() const { return selected_names_; }
  /// Score of each candidate evaluated in the last round / single pass,
  /// indexed by feature (NaN where not evaluated). Higher is better.
  const std::vector<double>& scores() const { return scores_; }

 protected:
  void do_fit(const Dataset& dataset) override;
  Dataset do_transform(const Dataset& dataset) const override;

 private:
  double evaluate(const Dataset& dataset, const std::vector<Index>& keep) const;

  SelectionMethod method_;
  FeatureKind kind_;
  int feature_number_;
  PredictorFactory proxy_;
  std::uint64_t seed_;
  std::vector<Index> selected_;
  std::vector<std::string> selected_names_;
  std::vector<double> scores_;
};

/// Fits a selector on `dataset` and returns the restricted dataset.
Dataset select_features(const Dataset& dataset, SelectionMethod method, FeatureKind kind, int feature_number,
                        PredictorFactory proxy = default_selection_proxy());

}  // namespace tspipe
