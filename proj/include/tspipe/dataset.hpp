#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tspipe {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// One [steps x channels] matrix per instance. Used for labels, actions and
/// model outputs alike.
using SequenceArray = std::vector<Matrix>;
using MaskArray = std::vector<Mask>;

/// Value stored in unobserved cells. Masks are authoritative; never compare
/// against this.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

enum class Fold : std::uint8_t { Unassigned, Train, Val, Test };
enum class ProblemKind : std::uint8_t { OneShot, Online };
enum class Task : std::uint8_t { Classification, Regression };
enum class MetricName : std::uint8_t { Auc, Apr, Mse, Mae, Rmse };

std::string to_string(Fold f);
std::string to_string(ProblemKind p);
std::string to_string(Task t);
std::string to_string(MetricName m);
ProblemKind parse_problem_kind(const std::string& s);
Task parse_task(const std::string& s);
MetricName parse_metric(const std::string& s);
Fold parse_fold(const std::string& s);

/// True when larger values of the metric are better.
bool maximize(MetricName m);
Task task_of(MetricName m);

struct TemporalTensor {
  std::vector<Matrix> values;  // per instance: [max_steps x features]
  MaskArray observed;          // same shape as values
  Matrix time;                 // [instances x max_steps]; padding holds 0
  Eigen::VectorXi seq_len;
  Index feature_count = 0;

  Index instances() const { return static_cast<Index>(values.size()); }
  Index steps() const { return time.cols(); }
  Index features() const { return feature_count; }

  /// All-missing tensor with zero-length sequences.
  static TemporalTensor empty(Index n, Index steps, Index features);
};

struct StaticMatrix {
  Matrix values;  // [instances x features]
  Mask observed;
  /// Non-empty for columns holding category codes (index into the level list).
  std::vector<std::vector<std::string>> levels;

  bool categorical(Index col) const { return !levels[static_cast<std::size_t>(col)].empty(); }
};

struct LabelTensor {
  SequenceArray values;  // per instance: [steps x labels]; one-shot uses 1 step
  MaskArray valid;

  Index instances() const { return static_cast<Index>(values.size()); }
};

struct ActionTensor {
  SequenceArray values;  // per instance: [max_steps x actions]
  std::vector<std::string> names;
};

struct ProblemSpec {
  ProblemKind problem = ProblemKind::Online;
  std::vector<std::string> label_names;
  int max_seq_len = 24;
  int window = 0;
  std::vector<std::string> treatment_names;
  Task task = Task::Classification;
  MetricName metric = MetricName::Auc;
  /// One-shot only: when set, inputs are the steps before this index and the
  /// label is the last observation at or after it.
  std::optional<int> trigger_step;

  /// Throws ParameterError on violated invariants.
  void validate() const;
};

struct Dataset {
  std::vector<std::string> ids;
  StaticMatrix static_features;
  TemporalTensor temporal;
  std::optional<LabelTensor> labels;
  std::optional<ActionTensor> actions;
  std::vector<std::string> static_names;
  std::vector<std::string> temporal_names;
  std::vector<std::string> label_names;
  std::vector<Fold> fold;
  std::optional<ProblemSpec> spec;

  Index instances() const { return static_cast<Index>(ids.size()); }

  /// Throws DataError when shapes or name lists disagree.
  void check_consistency() const;

  /// Instances that fitted statistics may use: train fold, or every
  /// unassigned instance when no split has been made.
  std::vector<Index> fit_rows() const;
  std::vector<Index> rows_in(Fold f) const;

  /// Copy restricted to the given rows (in the given order).
  Dataset subset(const std::vector<Index>& rows) const;
};

/// Raw (pre-problem) dataset with its columns reordered to the given name
/// lists: absent columns become fully unobserved, extra columns are dropped.
/// Used to line a separately loaded test file up with the training schema.
Dataset conform_features(const Dataset& dataset, const std::vector<std::string>& static_names,
                         const std::vector<std::string>& temporal_names);

std::optional<Index> find_name(const std::vector<std::string>& names, const std::string& name);

}  // namespace tspipe
