#include "tspipe/automl.hpp"

#include "tspipe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tspipe {

Vector median_lengthscales(const Matrix& x) {
  Vector ls = Vector::Ones(x.cols());
  std::vector<double> diffs;
  for (Index c = 0; c < x.cols(); ++c) {
    diffs.clear();
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = i + 1; j < x.rows(); ++j) {
        const double d = std::abs(x(i, c) - x(j, c));
        if (d > 0.0) diffs.push_back(d);
      }
    }
    if (diffs.empty()) continue;
    auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    double m = *mid;
    if (diffs.size() % 2 == 0) m = 0.5 * (m + *std::max_element(diffs.begin(), mid));
    ls(c) = m;
  }
  return ls;
}

Matrix GaussianProcess::kernel(const Matrix& a, const Matrix& b) const {
  const Matrix sa = a * inv_ls_.asDiagonal();
  const Matrix sb = b * inv_ls_.asDiagonal();
  Matrix d2 = (-2.0 * sa * sb.transpose()).colwise() + sa.rowwise().squaredNorm();
  d2.rowwise() += sb.rowwise().squaredNorm().transpose();
  return (-0.5 * d2.cwiseMax(0.0)).array().exp().matrix();
}

void GaussianProcess::fit(const Matrix& x, const Vector& y, const Vector& lengthscales) {
  if (x.rows() == 0 || x.rows() != y.size()) throw ParameterError("GP needs matching, nonempty inputs");
  if (lengthscales.size() != x.cols() || (lengthscales.array() <= 0.0).any()) {
    throw ParameterError("GP length-scales must be positive, one per input column");
  }
  x_ = x;
  inv_ls_ = lengthscales.cwiseInverse();
  y_mean_ = y.mean();
  const double var = (y.array() - y_mean_).square().mean();
  y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  const Vector z = (y.array() - y_mean_) / y_scale_;

  Matrix k = kernel(x_, x_);
  double diag = noise_ + jitter_;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Matrix kk = k;
    kk.diagonal().array() += diag;
    chol_.compute(kk);
    if (chol_.info() == Eigen::Success) break;
    diag *= 10.0;
  }
  if (chol_.info() != Eigen::Success) throw Error("GP covariance is not positive definite");
  alpha_ = chol_.solve(z);
}

void GaussianProcess::predict(const Matrix& x, Vector& mean, Vector& sd) const {
  if (!fitted()) throw ContractError("GP predict before fit");
  const Matrix ks = kernel(x_, x);  // [train x query]
  mean = (ks.transpose() * alpha_).array() * y_scale_ + y_mean_;
  const Matrix v = chol_.matrixL().solve(ks);
  sd = ((1.0 - v.colwise().squaredNorm().array()).max(0.0).sqrt() * y_scale_).matrix().transpose();
}

double expected_improvement(double mean, double sd, double best) {
  const double gain = mean - best;
  if (!(sd > 1e-12)) return std::max(gain, 0.0);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(gain * cdf + sd * pdf, 0.0);
}

}  // namespace tspipe
