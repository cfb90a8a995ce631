#pragma once

#include "tspipe/models.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tspipe {

struct TreatmentConfig {
  ModelConfig base;            // encoder/decoder cell, width, depth, training budget
  int projection_horizon = 5;  // longest supported counterfactual horizon
  int decoder_epoch = 0;       // 0: same as base.epoch
  void validate() const;
};

/// Sequence-conditioned outcome forecaster.
///
/// The encoder reads [covariates ⊕ actions ⊕ static ⊕ dt] step by step and
/// predicts the (online) label at every step. For a counterfactual query the
/// history before the cutoff s stays fixed; the encoder
/// predicts step s under the planned action, then a decoder initialised with
/// the encoder state rolls forward, reading [planned action ⊕ own previous
/// outcome estimate] at every further step. The queried window ends at the
/// instance's last labelled step (its last step when there are no labels). The decoder is trained after the
/// encoder, on factual sequences with teacher forcing.
///
/// No confounding adjustment is made: forecasts are conditional on the
/// action plan, not causal effect estimates under confounding.
class TreatmentModel final : public Predictor {
 public:
  explicit TreatmentModel(TreatmentConfig config);

  std::string name() const override { return "treatment-" + to_string(config_.base.model_type); }
  std::string model_id() const override { return config_.base.model_id; }
  bool fitted() const override { return fitted_; }
  void fit(const Dataset& dataset) override;
  /// Factual per-step encoder predictions, shaped like the label tensor.
  SequenceArray predict(const Dataset& dataset) const override;
  HyperparameterSpace hyperparameter_space() const override;
  std::unique_ptr<Predictor> clone_unfitted(const std::string& model_id) const override;
  void save(const std::filesystem::path& path) const override;
  static std::unique_ptr<TreatmentModel> read(std::istream& in);

  /// Outcome estimates [horizon x labels] per instance under `planned`
  /// ([horizon x actions] per instance), history fixed before the cutoff.
  SequenceArray predict_counterfactual(const Dataset& dataset, const SequenceArray& planned, int horizon) const;
  /// Same query with the recorded actions as the plan.
  SequenceArray predict_factual(const Dataset& dataset, int horizon) const;

  const TreatmentConfig& config() const { return config_; }
  const RecurrentNet& encoder() const { return encoder_; }
  const RecurrentNet& decoder() const { return decoder_; }
  const InputLayout& layout() const { return layout_; }
  const std::vector<EpochRecord>& encoder_history() const { return encoder_history_; }
  const std::vector<EpochRecord>& decoder_history() const { return decoder_history_; }

 private:
  TreatmentConfig config_;
  RecurrentNet encoder_;
  RecurrentNet decoder_;
  InputLayout layout_;
  Task task_ = Task::Classification;
  bool has_decoder_ = false;
  bool fitted_ = false;
  std::vector<EpochRecord> encoder_history_;
  std::vector<EpochRecord> decoder_history_;
};

/// Recorded actions of the last `horizon` steps of every instance.
SequenceArray recorded_actions(const Dataset& dataset, int horizon);
/// Constant plan: every action channel set to `value` for `horizon` steps.
SequenceArray constant_plan(const Dataset& dataset, int horizon, double value);
/// Labels of the last `horizon` steps ([horizon x labels] per instance),
/// aligned with predict_counterfactual's output.
LabelTensor horizon_labels(const Dataset& dataset, int horizon);

enum class SensingKind { Randomize, GreedyVoi };
SensingKind parse_sensing_kind(const std::string& s);
std::string to_string(SensingKind k);

struct SensingResult {
  Dataset dataset;      // observed masks replaced by the selection (then re-imputed if an imputer was given)
  MaskArray selection;  // per instance [steps x temporal features]
};

/// Budgeted measurement selection. Per instance, the selected cells cost at
/// most budget * (cost of every valid cell), where a cell's cost is its
/// feature's weight. Only cells that were actually measured can be selected.
///
/// randomize: measured cells in random order, each taken if it still fits.
/// greedy-voi: a cell's score is the member-averaged change of the
///   instance's predictions between setting that cell to the train 10th and
///   90th percentile of its feature, all other temporal cells held at the
///   train mean; cells are taken in descending score per unit cost.
class SensingPolicy {
 public:
  SensingPolicy(SensingKind kind, double budget, std::vector<double> costs = {}, std::uint64_t seed = 0);

  /// `train` must be complete (imputed); greedy-voi needs >= 2 members.
  void fit(const Dataset& train, std::vector<const Predictor*> ensemble = {});
  /// Selection tensor for `dataset` (pre-imputation masks). `budget`
  /// overrides the policy's own; `scores` reuses greedy-voi scores computed
  /// earlier on the same dataset.
  MaskArray select(const Dataset& dataset, std::optional<double> budget = std::nullopt,
                   const std::vector<Matrix>* scores = nullptr) const;
  /// Masks unselected cells and re-imputes them with `imputer` when given.
  SensingResult apply(const Dataset& dataset, const Component* imputer = nullptr,
                      std::optional<double> budget = std::nullopt, const std::vector<Matrix>* scores = nullptr) const;

  /// Greedy-voi cell scores per instance ([steps x features]).
  std::vector<Matrix> scores(const Dataset& dataset) const;

  SensingKind kind() const { return kind_; }
  double budget() const { return budget_; }
  const std::vector<double>& costs() const { return costs_; }
  bool fitted() const { return fitted_; }

 private:
  SensingKind kind_;
  double budget_;
  std::vector<double> costs_;
  std::uint64_t seed_;
  std::vector<const Predictor*> ensemble_;
  Vector mean_, p10_, p90_;
  bool fitted_ = false;
};

/// Total and selected cost of one instance's valid cells.
std::pair<double, double> selection_cost(const Dataset& dataset, const MaskArray& selection, Index row,
                                         const std::vector<double>& costs);
/// True when `used <= budget * total` up to a relative slack of 1e-12 that
/// absorbs the rounding of the product.
bool within_budget(double used, double total, double budget);

/// `id,time,variable,selected` rows for every valid cell.
std::string selection_to_csv(const Dataset& dataset, const MaskArray& selection);

}  // namespace tspipe
