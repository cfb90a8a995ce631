#pragma once

#include "tspipe/component.hpp"
#include "tspipe/models.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace tspipe {

// ---------------------------------------------------------------------------
// Search spaces

/// A hyperparameter space whose dimensions may be conditional on the value of
/// an earlier categorical dimension (`parent[dim] = {categorical, category}`).
struct SearchSpace {
  HyperparameterSpace space;
  std::map<std::string, std::pair<std::string, std::string>> parent;

  /// True when every ancestor condition of `dimension` holds in `c`.
  bool active(const std::string& dimension, const Configuration& c) const;
  void validate() const;
};

SearchSpace unconditional(HyperparameterSpace space);

/// Appends categorical `name` over the option labels, followed by each
/// option's dimensions renamed `name.option.dim` and made conditional on the
/// option being chosen.
void add_choice(SearchSpace& target, const std::string& name,
                const std::vector<std::pair<std::string, SearchSpace>>& options);

/// Entries of `c` under `prefix.` with the prefix removed.
Configuration scoped(const Configuration& c, const std::string& prefix);

/// Fixed-length real encoding of configurations: continuous dimensions
/// min-max scaled (in log space when flagged), discrete dimensions by scaled
/// rank, categorical dimensions one-hot. Inactive dimensions encode as 0.5 in
/// every column.
class ConfigEncoding {
 public:
  explicit ConfigEncoding(SearchSpace space);

  const SearchSpace& space() const { return space_; }
  Index width() const { return width_; }
  /// Number of scalar dimensions (one per configuration key).
  std::size_t unit_dims() const { return keys_.size(); }

  Vector encode(const Configuration& c) const;
  /// Nearest valid configuration: discrete dims round to the nearest rank,
  /// categorical dims take the arg-max column.
  Configuration decode(const Vector& x) const;
  /// Maps one uniform number per configuration key to a configuration.
  Configuration from_unit(const std::vector<double>& u) const;

  Configuration sample(std::mt19937_64& rng) const;
  /// Stratified draws: every key's unit interval is cut into `count` strata,
  /// each used once, independently permuted per key.
  std::vector<Configuration> latin_hypercube(int count, std::mt19937_64& rng) const;

 private:
  struct Key {
    std::string key;
    const Dimension* dim;
    Index column;  // first encoded column
  };
  SearchSpace space_;
  std::vector<Key> keys_;
  Index width_ = 0;
};

// ---------------------------------------------------------------------------
// Surrogate

/// Zero-mean GP with a squared-exponential (ARD) kernel on standardized
/// targets. Observation noise and jitter are added to the kernel diagonal.
class GaussianProcess {
 public:
  GaussianProcess(double noise = 1e-3, double jitter = 1e-8) : noise_(noise), jitter_(jitter) {}

  void fit(const Matrix& x, const Vector& y, const Vector& lengthscales);
  /// Posterior mean and standard deviation (target units) at the rows of `x`.
  void predict(const Matrix& x, Vector& mean, Vector& sd) const;

  bool fitted() const { return x_.rows() > 0; }

 private:
  Matrix kernel(const Matrix& a, const Matrix& b) const;

  double noise_;
  double jitter_;
  Matrix x_;
  Vector inv_ls_;
  Eigen::LLT<Matrix> chol_;
  Vector alpha_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

/// Per-column median of the nonzero pairwise absolute differences (1 when a
/// column is constant).
Vector median_lengthscales(const Matrix& x);

/// EI for maximization; zero when sd is degenerate and mean <= best.
double expected_improvement(double mean, double sd, double best);

// ---------------------------------------------------------------------------
// Model classes and traces

struct BOMetricSpec {
  MetricName metric = MetricName::Auc;
  Fold fold = Fold::Val;

  bool maximize() const { return tspipe::maximize(metric); }
};

/// A searchable family of predictors.
struct ModelClass {
  std::string name;
  SearchSpace space;
  std::function<std::unique_ptr<Predictor>(const Configuration&, std::uint64_t seed, const std::string& model_id)>
      make;
};

/// Linear / RNN / GRU over get_hyperparameter_space(), other fields from `base`.
ModelClass sequence_model_class(ModelConfig base);

/// One class whose configuration starts with categorical `class` choosing
/// among the members; member dimensions are scoped `class.<name>.`.
ModelClass union_class(const std::vector<ModelClass>& classes);

using StepScores = std::vector<std::optional<double>>;

struct TraceEntry {
  int iteration = 0;  // 1-based
  std::string stage;  // hpo, sms, psc
  Configuration config;
  Vector encoded;
  std::string model_name;
  std::string model_path;  // relative to the model directory, empty when not persisted
  StepScores step_scores;  // one per step (length 1 for one-shot)
  std::optional<double> score;  // mean of the defined step scores
  double seconds = 0.0;
  std::shared_ptr<Predictor> model;
};

struct OptimizationTrace {
  MetricName metric = MetricName::Auc;
  std::vector<TraceEntry> entries;

  bool maximize() const { return tspipe::maximize(metric); }
  /// True when `a` is strictly better than `b` in the metric direction.
  bool better(double a, double b) const { return maximize() ? a > b : a < b; }

  /// Index of the best aggregate score (first on ties); entries without a
  /// score lose to any scored entry.
  std::size_t incumbent() const;
  /// Running best aggregate score after each iteration.
  std::vector<std::optional<double>> incumbents() const;
  /// Running per-step best score after each iteration.
  std::vector<StepScores> step_incumbents() const;

  /// Long format: `iteration,<config keys>,model_path,step,score`, one row
  /// per (iteration, step); inactive keys and undefined scores are blank.
  std::string to_csv() const;
};

struct SearchOptions {
  int num_iter = 20;
  std::uint64_t seed = 0;
  int initial = 5;       // space-filling draws before the surrogate is used
  int candidates = 512;  // random encodings scored by the acquisition
  int refresh = 5;       // length-scales recomputed every this many observations
  double noise = 1e-3;
  double jitter = 1e-8;
  std::string id_prefix = "bo";
  /// When set, every trained model is saved here as `<model_id>.model`.
  std::optional<std::filesystem::path> model_dir;
};

/// Per-step validation scores (one entry for one-shot problems). AUC/APR at
/// steps with a single validation class are undefined.
StepScores step_scores(const Predictor& model, const Dataset& dataset, const BOMetricSpec& metric);
std::optional<double> mean_score(const StepScores& s);

// ---------------------------------------------------------------------------
// Ensembles

/// Routes step t to the member with the best validation score at t (lower
/// index on ties). Steps without any defined score use the member with the
/// best mean score. Members given by path are loaded on first use.
class StepwiseEnsemble final : public Predictor {
 public:
  StepwiseEnsemble(std::vector<std::shared_ptr<const Predictor>> members, const std::vector<StepScores>& scores,
                   bool maximize, std::string model_id = "stepwise");
  StepwiseEnsemble(std::vector<std::filesystem::path> member_paths, const std::vector<StepScores>& scores,
                   bool maximize, std::string model_id = "stepwise");

  std::string name() const override { return "stepwise"; }
  std::string model_id() const override { return model_id_; }
  bool fitted() const override { return true; }

  /// Members are already trained; fitting is a no-op.
  void fit(const Dataset&) override {}
  SequenceArray predict(const Dataset& dataset) const override;

  HyperparameterSpace hyperparameter_space() const override { return {}; }
  std::unique_ptr<Predictor> clone_unfitted(const std::string& model_id) const override;

  /// Writes each selected member next to `path` and references it.
  void save(const std::filesystem::path& path) const override;
  static std::unique_ptr<StepwiseEnsemble> read(std::istream& in, const std::filesystem::path& dir);

  /// Member index used at each step.
  const std::vector<std::size_t>& selection() const { return selection_; }
  std::size_t size() const { return members_.size(); }
  const Predictor& member(std::size_t k) const;

 private:
  StepwiseEnsemble() = default;
  void select(const std::vector<StepScores>& scores, bool maximize);

  mutable std::vector<std::shared_ptr<const Predictor>> members_;
  std::vector<std::filesystem::path> paths_;
  std::vector<std::size_t> selection_;
  std::string model_id_;
};

StepwiseEnsemble build_stepwise_ensemble(std::vector<std::shared_ptr<const Predictor>> models,
                                         const std::vector<StepScores>& scores, bool maximize);

/// Convex combination of member outputs with one weight vector per step
/// (a single vector for one-shot problems), fitted on the validation fold by
/// coordinate descent on the task loss. Steps without validation labels use
/// the weights fitted on all steps pooled.
class StackingEnsemble final : public Predictor {
 public:
  explicit StackingEnsemble(std::vector<std::shared_ptr<const Predictor>> members, std::string model_id = "stacking");

  std::string name() const override { return "stacking"; }
  std::string model_id() const override { return model_id_; }
  bool fitted() const override { return weights_.rows() > 0; }

  void fit(const Dataset& dataset) override;
  SequenceArray predict(const Dataset& dataset) const override;

  HyperparameterSpace hyperparameter_space() const override { return {}; }
  std::unique_ptr<Predictor> clone_unfitted(const std::string& model_id) const override;

  void save(const std::filesystem::path& path) const override;
  static std::unique_ptr<StackingEnsemble> read(std::istream& in, const std::filesystem::path& dir);

  /// [steps x members]; every row is nonnegative and sums to 1.
  const Matrix& weights() const { return weights_; }
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<std::shared_ptr<const Predictor>> members_;
  std::string model_id_;
  Matrix weights_;
  Task task_ = Task::Classification;
};

StackingEnsemble build_stacking_ensemble(std::vector<std::shared_ptr<const Predictor>> members,
                                         const Dataset& dataset);

/// Minimizes the mean task loss of sum_k w_k p_k over the simplex. `p` is
/// [cells x members]. Starts from uniform weights.
Vector fit_convex_weights(const Matrix& p, const Vector& y, Task task, int sweeps = 100);

// ---------------------------------------------------------------------------
// Optimizers

struct SearchResult {
  OptimizationTrace trace;
  std::size_t incumbent = 0;

  const TraceEntry& best() const { return trace.entries[incumbent]; }
};

/// Bayesian optimization of one model class on the aggregate validation
/// score: min(initial, num_iter) Latin-hypercube draws, then the EI maximizer
/// over `candidates` random encodings (unevaluated configurations preferred).
SearchResult optimize_hyperparameters(const ModelClass& model_class, const Dataset& dataset,
                                      const BOMetricSpec& metric, const SearchOptions& options);

struct StepwiseResult {
  SearchResult search;
  std::shared_ptr<StepwiseEnsemble> ensemble;
};

/// Stepwise model selection: the surrogate sees (encoding, normalized step)
/// pairs and the acquisition sums per-step EI against per-step incumbents.
/// Online problems only.
StepwiseResult optimize_stepwise(const ModelClass& model_class, const Dataset& dataset, const BOMetricSpec& metric,
                                 const SearchOptions& options);

/// Candidate pipeline stage built from its own configuration.
struct StageOption {
  std::string name;
  HyperparameterSpace space;
  std::function<std::unique_ptr<Component>(const Configuration&)> make;
};

StageOption static_imputation_option(const std::string& method);
StageOption temporal_imputation_option(const std::string& method);
/// `none` passes data through; other methods select `feature_number`
/// temporal features.
StageOption feature_selection_option(const std::string& method, int feature_number);

struct PipelineMenus {
  std::vector<StageOption> static_imputation;
  std::vector<StageOption> temporal_imputation;
  std::vector<StageOption> feature_selection;
  std::vector<ModelClass> models;
};

enum class SearchMethod { Random, Gp };
SearchMethod parse_search_method(const std::string& s);

/// The joint space: one categorical per stage (`static_imputation`,
/// `temporal_imputation`, `feature_selection`, `model`) plus the chosen
/// options' own dimensions.
SearchSpace pipeline_space(const PipelineMenus& menus);

struct PipelineResult {
  std::vector<std::unique_ptr<Component>> components;  // fitted, in application order
  std::size_t model_choice = 0;                        // index into menus.models
  Configuration model_config;                          // scoped to the chosen class
  Dataset transformed;                                 // every fold, through the fitted components
  SearchResult search;
};

PipelineResult optimize_pipeline(const PipelineMenus& menus, const Dataset& dataset, const BOMetricSpec& metric,
                                 SearchMethod method, const SearchOptions& options);

struct SashResult {
  std::shared_ptr<StackingEnsemble> model;
  std::vector<std::shared_ptr<const Predictor>> per_class;  // stepwise ensembles or incumbents
  OptimizationTrace trace;
};

/// SMS per class, one stepwise ensemble per class, stacked. One-shot
/// problems stack the per-class incumbents instead.
SashResult optimize_sash(const std::vector<ModelClass>& classes, const Dataset& dataset, const BOMetricSpec& metric,
                         const SearchOptions& options);

struct SpscResult {
  std::vector<std::unique_ptr<Component>> components;
  std::size_t model_choice = 0;
  Dataset transformed;
  std::shared_ptr<StepwiseEnsemble> model;
  OptimizationTrace trace;  // pipeline search followed by stepwise search
};

SpscResult optimize_spsc(const PipelineMenus& menus, const Dataset& dataset, const BOMetricSpec& metric,
                         const SearchOptions& pipeline_options, const SearchOptions& stepwise_options);

}  // namespace tspipe
