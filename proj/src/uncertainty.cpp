#include "tspipe/posthoc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace tspipe {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal_quantile: probability must lie in (0, 1)");
  // Acklam's rational approximation, then Halley refinement.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    x -= u / (1 + x * u / 2);
  }
  return x;
}

EnsembleUncertainty::EnsembleUncertainty(PredictorFactory factory, UncertaintyOptions options)
    : factory_(std::move(factory)), options_(options) {
  if (options_.members < 2) throw ParameterError("uncertainty ensemble needs at least 2 members");
  if (!(options_.level > 0.0 && options_.level < 1.0)) throw ParameterError("confidence level must lie in (0, 1)");
  if (!factory_) throw ParameterError("uncertainty ensemble needs a model factory");
}

void EnsembleUncertainty::fit(const Dataset& dataset) {
  members_.clear();
  const auto train = dataset.fit_rows();
  if (train.empty()) throw DataError("uncertainty ensemble: empty train fold");
  const auto val = dataset.rows_in(Fold::Val);
  for (int k = 0; k < options_.members; ++k) {
    const std::uint64_t seed = options_.seed + (options_.fresh_seeds ? static_cast<std::uint64_t>(k) : 0);
    auto model = factory_(seed);
    if (options_.bootstrap) {
      std::mt19937_64 rng(options_.seed * 7919 + static_cast<std::uint64_t>(k) + 1);
      std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
      std::vector<Index> rows;
      for (std::size_t i = 0; i < train.size(); ++i) rows.push_back(train[pick(rng)]);
      rows.insert(rows.end(), val.begin(), val.end());
      model->fit(dataset.subset(rows));
    } else {
      model->fit(dataset);
    }
    members_.push_back(std::move(model));
  }
}

UncertaintyEstimate EnsembleUncertainty::estimate(const Dataset& dataset) const {
  if (members_.empty()) throw ContractError("uncertainty ensemble: estimate called before fit");
  std::vector<SequenceArray> outputs;
  for (const auto& m : members_) outputs.push_back(m->predict(dataset));
  const Task task = dataset.spec ? dataset.spec->task : Task::Classification;
  return summarize_members(outputs, options_.level, task);
}

UncertaintyEstimate summarize_members(const std::vector<SequenceArray>& outputs, double level, Task task) {
  if (outputs.size() < 2) throw ParameterError("uncertainty ensemble needs at least 2 members");
  UncertaintyEstimate est;
  est.level = level;
  est.z = normal_quantile(0.5 + level / 2);
  const std::size_t k = outputs.size();
  std::vector<double> cell(k);
  for (std::size_t i = 0; i < outputs.front().size(); ++i) {
    const Matrix& ref = outputs.front()[i];
    Matrix mean(ref.rows(), ref.cols()), sd(ref.rows(), ref.cols());
    for (Index r = 0; r < ref.rows(); ++r) {
      for (Index c = 0; c < ref.cols(); ++c) {
        for (std::size_t m = 0; m < k; ++m) cell[m] = outputs[m][i](r, c);
        std::sort(cell.begin(), cell.end());
        if (cell.front() == cell.back()) {
          mean(r, c) = cell.front();
          sd(r, c) = 0.0;
          continue;
        }
        double sum = 0.0;
        for (double v : cell) sum += v;
        const double mu = sum / static_cast<double>(k);
        double ss = 0.0;
        for (double v : cell) ss += (v - mu) * (v - mu);
        mean(r, c) = std::clamp(mu, cell.front(), cell.back());
        sd(r, c) = std::sqrt(ss / static_cast<double>(k - 1));
      }
    }
    Matrix half = est.z * sd;
    Matrix lo = mean - half, hi = mean + half;
    if (task == Task::Classification) {
      lo = lo.cwiseMax(0.0).cwiseMin(1.0);
      hi = hi.cwiseMax(0.0).cwiseMin(1.0);
    }
    est.mean.push_back(std::move(mean));
    est.stddev.push_back(std::move(sd));
    est.half_width.push_back(std::move(half));
    est.lower.push_back(std::move(lo));
    est.upper.push_back(std::move(hi));
  }
  return est;
}

UncertaintyEstimate estimate_uncertainty(const PredictorFactory& factory, const Dataset& dataset, int members,
                                         double level) {
  UncertaintyOptions o;
  o.members = members;
  o.level = level;
  EnsembleUncertainty e(factory, o);
  e.fit(dataset);
  return e.estimate(dataset);
}

}  // namespace tspipe
