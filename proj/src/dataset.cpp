#include "tspipe/dataset.hpp"

#include "tspipe/errors.hpp"

#include <algorithm>

namespace tspipe {

std::string to_string(Fold f) {
  switch (f) {
    case Fold::Train: return "train";
    case Fold::Val: return "val";
    case Fold::Test: return "test";
    case Fold::Unassigned: break;
  }
  return "unassigned";
}

std::string to_string(ProblemKind p) { return p == ProblemKind::Online ? "online" : "one-shot"; }

std::string to_string(Task t) {
  return t == Task::Classification ? "classification" : "regression";
}

std::string to_string(MetricName m) {
  switch (m) {
    case MetricName::Auc: return "auc";
    case MetricName::Apr: return "apr";
    case MetricName::Mse: return "mse";
    case MetricName::Mae: return "mae";
    case MetricName::Rmse: return "rmse";
  }
  return "?";
}

ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "online") return ProblemKind::Online;
  if (s == "one-shot" || s == "oneshot" || s == "one_shot") return ProblemKind::OneShot;
  throw ParameterError("unknown problem kind '" + s + "' (expected online or one-shot)");
}

Task parse_task(const std::string& s) {
  if (s == "classification") return Task::Classification;
  if (s == "regression") return Task::Regression;
  throw ParameterError("unknown task '" + s + "' (expected classification or regression)");
}

MetricName parse_metric(const std::string& s) {
  if (s == "auc") return MetricName::Auc;
  if (s == "apr") return MetricName::Apr;
  if (s == "mse") return MetricName::Mse;
  if (s == "mae") return MetricName::Mae;
  if (s == "rmse") return MetricName::Rmse;
  throw ParameterError("unknown metric '" + s + "' (expected auc, apr, mse, mae or rmse)");
}

Fold parse_fold(const std::string& s) {
  if (s == "train") return Fold::Train;
  if (s == "val") return Fold::Val;
  if (s == "test") return Fold::Test;
  if (s == "unassigned") return Fold::Unassigned;
  throw ParameterError("unknown fold '" + s + "'");
}

bool maximize(MetricName m) { return m == MetricName::Auc || m == MetricName::Apr; }

Task task_of(MetricName m) { return maximize(m) ? Task::Classification : Task::Regression; }

TemporalTensor TemporalTensor::empty(Index n, Index steps, Index features) {
  TemporalTensor t;
  t.values.assign(static_cast<std::size_t>(n), Matrix::Constant(steps, features, kMissing));
  t.observed.assign(static_cast<std::size_t>(n), Mask::Constant(steps, features, false));
  t.time = Matrix::Zero(n, steps);
  t.seq_len = Eigen::VectorXi::Zero(n);
  t.feature_count = features;
  return t;
}

void ProblemSpec::validate() const {
  if (label_names.empty()) throw ParameterError("problem needs at least one label name");
  if (max_seq_len < 1) throw ParameterError("max_seq_len must be positive");
  if (window < 0) throw ParameterError("window must be nonnegative");
  if (window >= max_seq_len) {
    throw ParameterError("window (" + std::to_string(window) + ") must be smaller than max_seq_len (" +
                         std::to_string(max_seq_len) + ")");
  }
  if (task_of(metric) != task) {
    throw ParameterError("metric " + to_string(metric) + " does not match task " + to_string(task));
  }
  if (trigger_step && problem != ProblemKind::OneShot) {
    throw ParameterError("trigger_step applies to one-shot problems only");
  }
}

void Dataset::check_consistency() const {
  const Index n = instances();
  const auto fail = [](const std::string& what) { throw DataError("inconsistent dataset: " + what); };
  if (static_features.values.rows() != n || static_features.observed.rows() != n) fail("static row count");
  if (static_features.values.cols() != static_cast<Index>(static_names.size())) fail("static name count");
  if (static_features.levels.size() != static_names.size()) fail("static level table");
  if (temporal.instances() != n || static_cast<Index>(temporal.observed.size()) != n) {
    fail("temporal instance count");
  }
  if (temporal.features() != static_cast<Index>(temporal_names.size())) fail("temporal name count");
  if (temporal.time.rows() != n || temporal.seq_len.size() != n) fail("time/seq_len shape");
  for (Index i = 0; i < n; ++i) {
    const auto& v = temporal.values[static_cast<std::size_t>(i)];
    if (v.rows() != temporal.steps() || v.cols() != temporal.features()) fail("temporal slice shape");
    if (temporal.seq_len(i) > temporal.steps()) fail("seq_len exceeds steps");
  }
  if (static_cast<Index>(fold.size()) != n) fail("fold vector length");
  if (labels) {
    if (labels->instances() != n) fail("label instance count");
    for (const auto& l : labels->values) {
      if (l.cols() != static_cast<Index>(label_names.size())) fail("label name count");
    }
  }
  if (actions) {
    if (static_cast<Index>(actions->values.size()) != n) fail("action instance count");
    for (const auto& a : actions->values) {
      if (a.cols() != static_cast<Index>(actions->names.size())) fail("action name count");
    }
  }
}

std::vector<Index> Dataset::fit_rows() const {
  std::vector<Index> rows = rows_in(Fold::Train);
  if (rows.empty()) rows = rows_in(Fold::Unassigned);
  return rows;
}

std::vector<Index> Dataset::rows_in(Fold f) const {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  const auto n = static_cast<Index>(rows.size());
  out.static_names = static_names;
  out.temporal_names = temporal_names;
  out.label_names = label_names;
  out.spec = spec;
  out.static_features.levels = static_features.levels;
  out.static_features.values.resize(n, static_features.values.cols());
  out.static_features.observed.resize(n, static_features.observed.cols());
  out.temporal.time.resize(n, temporal.steps());
  out.temporal.seq_len.resize(n);
  out.temporal.feature_count = temporal.feature_count;
  if (labels) out.labels.emplace();
  if (actions) {
    out.actions.emplace();
    out.actions->names = actions->names;
  }
  for (Index k = 0; k < n; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    const auto si = static_cast<std::size_t>(i);
    out.ids.push_back(ids[si]);
    out.fold.push_back(fold[si]);
    out.static_features.values.row(k) = static_features.values.row(i);
    out.static_features.observed.row(k) = static_features.observed.row(i);
    out.temporal.values.push_back(temporal.values[si]);
    out.temporal.observed.push_back(temporal.observed[si]);
    out.temporal.time.row(k) = temporal.time.row(i);
    out.temporal.seq_len(k) = temporal.seq_len(i);
    if (labels) {
      out.labels->values.push_back(labels->values[si]);
      out.labels->valid.push_back(labels->valid[si]);
    }
    if (actions) out.actions->values.push_back(actions->values[si]);
  }
  return out;
}

Dataset conform_features(const Dataset& dataset, const std::vector<std::string>& static_names,
                         const std::vector<std::string>& temporal_names) {
  if (dataset.labels || dataset.spec) throw ContractError("conform_features expects a dataset before problem construction");
  Dataset out = dataset;
  const Index n = dataset.instances();
  const auto ns = static_cast<Index>(static_names.size());
  out.static_names = static_names;
  out.static_features.values = Matrix::Constant(n, ns, kMissing);
  out.static_features.observed = Mask::Constant(n, ns, false);
  out.static_features.levels.assign(static_names.size(), {});
  for (Index j = 0; j < ns; ++j) {
    const auto src = find_name(dataset.static_names, static_names[static_cast<std::size_t>(j)]);
    if (!src) continue;
    out.static_features.values.col(j) = dataset.static_features.values.col(*src);
    out.static_features.observed.col(j) = dataset.static_features.observed.col(*src);
    out.static_features.levels[static_cast<std::size_t>(j)] =
        dataset.static_features.levels[static_cast<std::size_t>(*src)];
  }
  const auto nt = static_cast<Index>(temporal_names.size());
  out.temporal_names = temporal_names;
  out.temporal.feature_count = nt;
  for (Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Index steps = dataset.temporal.steps();
    Matrix v = Matrix::Constant(steps, nt, kMissing);
    Mask m = Mask::Constant(steps, nt, false);
    for (Index j = 0; j < nt; ++j) {
      const auto src = find_name(dataset.temporal_names, temporal_names[static_cast<std::size_t>(j)]);
      if (!src) continue;
      v.col(j) = dataset.temporal.values[si].col(*src);
      m.col(j) = dataset.temporal.observed[si].col(*src);
    }
    out.temporal.values[si] = std::move(v);
    out.temporal.observed[si] = std::move(m);
  }
  return out;
}

std::optional<Index> find_name(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<Index>(it - names.begin());
}

}  // namespace tspipe
