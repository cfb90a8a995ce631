#pragma once

#include "tspipe/dataset.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tspipe {

/// Mann-Whitney concordance; tied scores count one half. Empty when only one
/// class is present.
std::optional<double> auc(std::span<const double> scores, std::span<const double> labels);

/// Average precision: mean over positives of the precision at that positive's
/// score threshold (ties grouped). Empty without positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const double> labels);

double mean_squared_error(std::span<const double> predictions, std::span<const double> labels);
double mean_absolute_error(std::span<const double> predictions, std::span<const double> labels);

std::optional<double> compute_metric(MetricName metric, std::span<const double> predictions,
                                     std::span<const double> labels);

enum class Aggregation { Micro, Macro };

/// Valid (prediction, label) pairs of label column `label` pooled over all
/// instances and steps.
void collect_valid(const LabelTensor& labels, const SequenceArray& predictions, Index label,
                   std::vector<double>& scores, std::vector<double>& truth, const std::vector<Index>* rows = nullptr);

/// Metric per step (pooled over instances), averaged over label columns.
/// Steps without a defined value are empty.
std::vector<std::optional<double>> per_step_metric(MetricName metric, const LabelTensor& labels,
                                                   const SequenceArray& predictions,
                                                   const std::vector<Index>* rows = nullptr);

/// Micro-averaged metric over all valid cells, averaged over label columns.
std::optional<double> pooled_metric(MetricName metric, const LabelTensor& labels, const SequenceArray& predictions,
                                    const std::vector<Index>* rows = nullptr);

struct MetricReport {
  ProblemKind problem = ProblemKind::Online;
  std::vector<std::string> label_names;
  Aggregation aggregation = Aggregation::Micro;
  std::map<std::string, double> values;        // metric -> estimate
  std::map<std::string, std::string> absent;   // metric -> reason
  std::map<std::string, std::vector<double>> repeats;

  /// Structured key/value document (JSON), keys sorted.
  std::string to_text() const;
};

/// Evaluates predictions against labels. Online problems pool every valid
/// (instance, step) pair by default; Macro averages per-step values instead.
/// Undefined metrics (e.g. AUC with one class) are reported as absent.
MetricReport evaluate(const LabelTensor& labels, const SequenceArray& predictions,
                      const std::vector<MetricName>& metrics, ProblemKind problem,
                      const std::vector<std::string>& label_names, Aggregation aggregation = Aggregation::Micro);

}  // namespace tspipe
