#include "tspipe/posthoc.hpp"

#include "tspipe/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tspipe {

namespace {

constexpr double kLogitClip = 13.8;
constexpr double kMinSlope = 1e-6;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// Negative log-likelihood of sigmoid(a x + b).
double nll(const std::vector<double>& x, std::span<const double> y, double a, double b) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = a * x[i] + b;
    // log(1 + e^z) - y z, evaluated stably
    s += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y[i] * z;
  }
  return s;
}

}  // namespace

double clipped_logit(double p) {
  const double l = std::log(p) - std::log1p(-p);
  if (std::isnan(l)) return 0.0;
  return std::clamp(l, -kLogitClip, kLogitClip);
}

void PlattCalibrator::fit(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ParameterError("calibration: scores and labels differ in length");
  bool pos = false, neg = false;
  for (double y : labels) (y > 0.5 ? pos : neg) = true;
  if (!pos || !neg) throw DataError("calibration needs both classes in the validation labels");
  std::vector<double> x(scores.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = clipped_logit(scores[i]);

  // Damped Newton on (a, b); backtracking keeps every step a descent step.
  double a = 1.0, b = 0.0;
  double f = nll(x, labels, a, b);
  for (int it = 0; it < 100; ++it) {
    double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = sigmoid(a * x[i] + b);
      const double r = p - labels[i];
      const double w = p * (1 - p);
      ga += r * x[i];
      gb += r;
      haa += w * x[i] * x[i];
      hab += w * x[i];
      hbb += w;
    }
    const double ridge = 1e-12 * (haa + hbb + 1.0);
    haa += ridge;
    hbb += ridge;
    const double det = haa * hbb - hab * hab;
    if (!(det > 0)) break;
    const double da = (hbb * ga - hab * gb) / det;
    const double db = (haa * gb - hab * ga) / det;
    double step = 1.0;
    double na = a, nb = b, nf = f;
    for (int ls = 0; ls < 40; ++ls) {
      na = std::max(kMinSlope, a - step * da);
      nb = b - step * db;
      nf = nll(x, labels, na, nb);
      if (nf <= f) break;
      step /= 2;
    }
    if (nf > f) break;
    const bool done = std::abs(na - a) < 1e-12 * (1 + std::abs(a)) && std::abs(nb - b) < 1e-12 * (1 + std::abs(b));
    a = na;
    b = nb;
    f = nf;
    if (done) break;
  }
  a_ = a;
  b_ = b;
  fitted_ = true;
}

void PlattCalibrator::fit(const LabelTensor& labels, const SequenceArray& predictions, const std::vector<Index>& rows) {
  std::vector<double> s, y;
  for (Index col = 0; col < (labels.values.empty() ? 0 : labels.values.front().cols()); ++col) {
    collect_valid(labels, predictions, col, s, y, &rows);
  }
  fit(s, y);
}

double PlattCalibrator::apply(double p) const {
  if (!fitted_) throw ContractError("calibration map used before fit");
  // The clip only guards the fit; the map itself uses the exact logit so it
  // stays strictly increasing beyond the clip range (0 and 1 map to 0 and 1).
  if (std::isnan(p)) return sigmoid(b_);
  return sigmoid(a_ * (std::log(p) - std::log1p(-p)) + b_);
}

SequenceArray PlattCalibrator::apply(const SequenceArray& predictions) const {
  SequenceArray out = predictions;
  for (auto& m : out) m = m.unaryExpr([this](double p) { return apply(p); });
  return out;
}

}  // namespace tspipe
