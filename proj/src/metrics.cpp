#include "tspipe/metrics.hpp"

#include "tspipe/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tspipe {

namespace {

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

void check_sizes(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("metric inputs differ in length");
}

}  // namespace

std::optional<double> auc(std::span<const double> scores, std::span<const double> labels) {
  check_sizes(scores, labels);
  // Rank-sum with average ranks over tie groups.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] > 0.5) {
        rank_sum += avg_rank;
        pos += 1.0;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels) {
  check_sizes(scores, labels);
  const auto idx = order_by_score_desc(scores);
  const double total_pos =
      static_cast<double>(std::count_if(labels.begin(), labels.end(), [](double y) { return y > 0.5; }));
  if (total_pos == 0.0) return std::nullopt;
  double tp = 0.0, seen = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double group_pos = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]] > 0.5) group_pos += 1.0;
      ++j;
    }
    tp += group_pos;
    seen += static_cast<double>(j - i);
    ap += group_pos * (tp / seen);
    i = j;
  }
  return ap / total_pos;
}

double mean_squared_error(std::span<const double> predictions, std::span<const double> labels) {
  check_sizes(predictions, labels);
  if (labels.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (predictions[i] - labels[i]) * (predictions[i] - labels[i]);
  return s / static_cast<double>(labels.size());
}

double mean_absolute_error(std::span<const double> predictions, std::span<const double> labels) {
  check_sizes(predictions, labels);
  if (labels.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) s += std::abs(predictions[i] - labels[i]);
  return s / static_cast<double>(labels.size());
}

std::optional<double> compute_metric(MetricName metric, std::span<const double> predictions,
                                     std::span<const double> labels) {
  switch (metric) {
    case MetricName::Auc: return auc(predictions, labels);
    case MetricName::Apr: return average_precision(predictions, labels);
    case MetricName::Mse:
      if (labels.empty()) return std::nullopt;
      return mean_squared_error(predictions, labels);
    case MetricName::Mae:
      if (labels.empty()) return std::nullopt;
      return mean_absolute_error(predictions, labels);
    case MetricName::Rmse:
      if (labels.empty()) return std::nullopt;
      return std::sqrt(mean_squared_error(predictions, labels));
  }
  return std::nullopt;
}

void collect_valid(const LabelTensor& labels, const SequenceArray& predictions, Index label,
                   std::vector<double>& scores, std::vector<double>& truth, const std::vector<Index>* rows) {
  if (predictions.size() != labels.values.size()) {
    throw DataError("predictions cover " + std::to_string(predictions.size()) + " instances, labels " +
                    std::to_string(labels.values.size()));
  }
  const auto visit = [&](std::size_t i) {
    const auto& y = labels.values[i];
    const auto& p = predictions[i];
    if (p.rows() != y.rows() || p.cols() != y.cols()) {
      throw DataError("prediction shape [" + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                      "] differs from label shape [" + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                      "]");
    }
    for (Index t = 0; t < y.rows(); ++t) {
      if (labels.valid[i](t, label)) {
        scores.push_back(p(t, label));
        truth.push_back(y(t, label));
      }
    }
  };
  if (rows) {
    for (const Index i : *rows) visit(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < labels.values.size(); ++i) visit(i);
  }
}

std::optional<double> pooled_metric(MetricName metric, const LabelTensor& labels, const SequenceArray& predictions,
                                    const std::vector<Index>* rows) {
  if (labels.values.empty()) return std::nullopt;
  const Index n_labels = labels.values.front().cols();
  double sum = 0.0;
  for (Index l = 0; l < n_labels; ++l) {
    std::vector<double> s, y;
    collect_valid(labels, predictions, l, s, y, rows);
    const auto v = compute_metric(metric, s, y);
    if (!v) return std::nullopt;
    sum += *v;
  }
  return sum / static_cast<double>(n_labels);
}

std::vector<std::optional<double>> per_step_metric(MetricName metric, const LabelTensor& labels,
                                                   const SequenceArray& predictions, const std::vector<Index>* rows) {
  if (labels.values.empty()) return {};
  const Index steps = labels.values.front().rows();
  const Index n_labels = labels.values.front().cols();
  std::vector<Index> all;
  if (!rows) {
    all.resize(labels.values.size());
    std::iota(all.begin(), all.end(), Index{0});
    rows = &all;
  }
  std::vector<std::optional<double>> out(static_cast<std::size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    double sum = 0.0;
    bool ok = true;
    for (Index l = 0; l < n_labels && ok; ++l) {
      std::vector<double> s, y;
      for (const Index i : *rows) {
        const auto si = static_cast<std::size_t>(i);
        if (labels.valid[si](t, l)) {
          s.push_back(predictions[si](t, l));
          y.push_back(labels.values[si](t, l));
        }
      }
      const auto v = compute_metric(metric, s, y);
      if (!v) ok = false;
      else sum += *v;
    }
    if (ok) out[static_cast<std::size_t>(t)] = sum / static_cast<double>(n_labels);
  }
  return out;
}

MetricReport evaluate(const LabelTensor& labels, const SequenceArray& predictions,
                      const std::vector<MetricName>& metrics, ProblemKind problem,
                      const std::vector<std::string>& label_names, Aggregation aggregation) {
  MetricReport report;
  report.problem = problem;
  report.label_names = label_names;
  report.aggregation = aggregation;
  for (const auto m : metrics) {
    const auto key = to_string(m);
    std::optional<double> v;
    if (aggregation == Aggregation::Micro || problem == ProblemKind::OneShot) {
      v = pooled_metric(m, labels, predictions);
    } else {
      double sum = 0.0;
      int count = 0;
      for (const auto& s : per_step_metric(m, labels, predictions)) {
        if (s) {
          sum += *s;
          ++count;
        }
      }
      if (count > 0) v = sum / count;
    }
    if (v) {
      report.values[key] = *v;
    } else {
      report.absent[key] = (m == MetricName::Auc || m == MetricName::Apr)
                               ? "undefined: labels contain a single class"
                               : "undefined: no valid labels";
    }
  }
  return report;
}

std::string MetricReport::to_text() const {
  nlohmann::ordered_json j;
  j["problem"] = to_string(problem);
  j["label_names"] = label_names;
  j["aggregation"] = aggregation == Aggregation::Micro ? "micro" : "macro";
  j["apr_definition"] = "average precision";
  nlohmann::ordered_json vals = nlohmann::ordered_json::object();
  for (const auto& [k, v] : values) vals[k] = v;
  j["metrics"] = vals;
  if (!absent.empty()) {
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [k, v] : absent) a[k] = v;
    j["absent"] = a;
  }
  if (!repeats.empty()) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (const auto& [k, v] : repeats) r[k] = v;
    j["repeats"] = r;
  }
  return j.dump(2) + "\n";
}

}  // namespace tspipe
