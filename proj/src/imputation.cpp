#include "tspipe/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tspipe {

namespace {

[[noreturn]] void reject_deep(const std::string& s) {
  throw ParameterError("imputation method '" + s +
                       "' is not built-in; supply it via an extension wrapper implementing the Component contract");
}

bool is_deep(const std::string& s) { return s == "gain" || s == "mrnn" || s == "tgain" || s == "missforest"; }

}  // namespace

StaticImputation parse_static_imputation(const std::string& s) {
  if (s == "mean") return StaticImputation::Mean;
  if (s == "median") return StaticImputation::Median;
  if (s == "knn") return StaticImputation::Knn;
  if (s == "mice-lite" || s == "mice") return StaticImputation::MiceLite;
  if (is_deep(s)) reject_deep(s);
  throw ParameterError("unknown static imputation '" + s + "' (expected mean, median, knn or mice-lite)");
}

TemporalImputation parse_temporal_imputation(const std::string& s) {
  if (s == "mean") return TemporalImputation::Mean;
  if (s == "median") return TemporalImputation::Median;
  if (s == "locf") return TemporalImputation::Locf;
  if (s == "linear") return TemporalImputation::Linear;
  if (s == "cubic-spline" || s == "spline" || s == "cubic" || s == "quadratic") return TemporalImputation::CubicSpline;
  if (is_deep(s)) reject_deep(s);
  throw ParameterError("unknown temporal imputation '" + s +
                       "' (expected mean, median, locf, linear or cubic-spline)");
}

std::string to_string(StaticImputation m) {
  switch (m) {
    case StaticImputation::Mean: return "mean";
    case StaticImputation::Median: return "median";
    case StaticImputation::Knn: return "knn";
    case StaticImputation::MiceLite: return "mice-lite";
  }
  return "?";
}

std::string to_string(TemporalImputation m) {
  switch (m) {
    case TemporalImputation::Mean: return "mean";
    case TemporalImputation::Median: return "median";
    case TemporalImputation::Locf: return "locf";
    case TemporalImputation::Linear: return "linear";
    case TemporalImputation::CubicSpline: return "cubic-spline";
  }
  return "?";
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------

StaticImputer::StaticImputer(StaticImputation method, StaticImputerParams params)
    : method_(method), params_(params) {
  if (method_ == StaticImputation::Knn && params_.k < 1) throw ParameterError("knn imputation needs k >= 1");
  if (method_ == StaticImputation::MiceLite && params_.rounds < 1) {
    throw ParameterError("mice-lite needs at least one round");
  }
}

void StaticImputer::do_fit(const Dataset& dataset) {
  const auto rows = dataset.fit_rows();
  const auto& st = dataset.static_features;
  const Index d = st.values.cols();
  warnings_.clear();
  fallback_ = Vector::Zero(d);
  train_values_.resize(static_cast<Index>(rows.size()), d);
  train_observed_.resize(static_cast<Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    train_values_.row(static_cast<Index>(r)) = st.values.row(rows[r]);
    train_observed_.row(static_cast<Index>(r)) = st.observed.row(rows[r]);
  }
  for (Index j = 0; j < d; ++j) {
    std::vector<double> col;
    for (Index r = 0; r < train_values_.rows(); ++r) {
      if (train_observed_(r, j)) col.push_back(train_values_(r, j));
    }
    if (col.empty()) {
      warnings_.push_back(dataset.static_names[static_cast<std::size_t>(j)]);
      continue;
    }
    fallback_(j) = method_ == StaticImputation::Mean
                       ? std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size())
                       : median_of(col);
  }

  rounds_.clear();
  if (method_ != StaticImputation::MiceLite) return;
  Matrix filled = train_values_;
  for (Index r = 0; r < filled.rows(); ++r) {
    for (Index j = 0; j < d; ++j) {
      if (!train_observed_(r, j)) filled(r, j) = fallback_(j);
    }
  }
  for (int round = 0; round < params_.rounds; ++round) {
    std::vector<std::pair<double, Vector>> coeffs;
    for (Index j = 0; j < d; ++j) {
      std::vector<Index> obs;
      for (Index r = 0; r < filled.rows(); ++r) {
        if (train_observed_(r, j)) obs.push_back(r);
      }
      Vector beta = Vector::Zero(d);
      double intercept = fallback_(j);
      if (obs.size() >= 2 && d > 1) {
        Matrix x(static_cast<Index>(obs.size()), d);
        Vector y(static_cast<Index>(obs.size()));
        for (std::size_t k = 0; k < obs.size(); ++k) {
          x.row(static_cast<Index>(k)) = filled.row(obs[k]);
          y(static_cast<Index>(k)) = filled(obs[k], j);
        }
        x.col(j).setZero();
        const Eigen::RowVectorXd xm = x.colwise().mean();
        const double ym = y.mean();
        const Matrix xc = x.rowwise() - xm;
        Matrix gram = xc.transpose() * xc;
        gram.diagonal().array() += params_.ridge * static_cast<double>(obs.size());
        beta = gram.ldlt().solve(xc.transpose() * (y.array() - ym).matrix());
        beta(j) = 0.0;
        intercept = ym - xm.dot(beta);
      }
      for (Index r = 0; r < filled.rows(); ++r) {
        if (!train_observed_(r, j)) filled(r, j) = intercept + filled.row(r).dot(beta);
      }
      coeffs.emplace_back(intercept, std::move(beta));
    }
    rounds_.push_back(std::move(coeffs));
  }
}

Vector StaticImputer::fill_row(const Eigen::RowVectorXd& values,
                               const Eigen::Array<bool, 1, Eigen::Dynamic>& observed) const {
  const Index d = values.size();
  Vector out = values.transpose();
  switch (method_) {
    case StaticImputation::Mean:
    case StaticImputation::Median:
      for (Index j = 0; j < d; ++j) {
        if (!observed(j)) out(j) = fallback_(j);
      }
      break;
    case StaticImputation::Knn:
      for (Index j = 0; j < d; ++j) {
        if (observed(j)) continue;
        std::vector<std::pair<double, Index>> dist;
        for (Index r = 0; r < train_values_.rows(); ++r) {
          if (!train_observed_(r, j)) continue;
          double sq = 0.0;
          Index co = 0;
          for (Index c = 0; c < d; ++c) {
            if (observed(c) && train_observed_(r, c)) {
              const double diff = values(c) - train_values_(r, c);
              sq += diff * diff;
              ++co;
            }
          }
          if (co == 0) continue;
          dist.emplace_back(std::sqrt(sq * static_cast<double>(d) / static_cast<double>(co)), r);
        }
        if (dist.empty()) {
          out(j) = fallback_(j);
          continue;
        }
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(params_.k), dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        double sum = 0.0;
        for (std::size_t q = 0; q < k; ++q) sum += train_values_(dist[q].second, j);
        out(j) = sum / static_cast<double>(k);
      }
      break;
    case StaticImputation::MiceLite:
      for (Index j = 0; j < d; ++j) {
        if (!observed(j)) out(j) = fallback_(j);
      }
      for (const auto& round : rounds_) {
        for (Index j = 0; j < d; ++j) {
          if (!observed(j)) {
            const auto& [b0, beta] = round[static_cast<std::size_t>(j)];
            out(j) = b0 + out.dot(beta);
          }
        }
      }
      break;
  }
  return out;
}

Dataset StaticImputer::do_transform(const Dataset& dataset) const {
  if (dataset.static_features.values.cols() != fallback_.size()) {
    throw DataError("static imputation: feature count " + std::to_string(dataset.static_features.values.cols()) +
                    " differs from fitted " + std::to_string(fallback_.size()));
  }
  Dataset out = dataset;
  auto& st = out.static_features;
  for (Index i = 0; i < st.values.rows(); ++i) {
    if (st.observed.row(i).all()) continue;
    const Vector filled = fill_row(st.values.row(i), st.observed.row(i));
    for (Index j = 0; j < st.values.cols(); ++j) {
      if (!st.observed(i, j)) st.values(i, j) = filled(j);
    }
    st.observed.row(i).setConstant(true);
  }
  return out;
}

// ---------------------------------------------------------------------------

double natural_cubic_spline(const std::vector<double>& x, const std::vector<double>& y, double at) {
  const std::size_t n = x.size();
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  // Second derivatives via the tridiagonal system with M_0 = M_{n-1} = 0.
  std::vector<double> m(n, 0.0), c(n, 0.0), dd(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    const double a = h0, b = 2.0 * (h0 + h1), cc = h1;
    const double r = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    dd[i] = (r - a * dd[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m[i] = dd[i] - c[i] * m[i + 1];
    if (i == 1) break;
  }
  const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), at) - x.begin());
  const std::size_t lo = hi - 1;
  const double h = x[hi] - x[lo];
  const double a = (x[hi] - at) / h, b = (at - x[lo]) / h;
  return a * y[lo] + b * y[hi] + ((a * a * a - a) * m[lo] + (b * b * b - b) * m[hi]) * h * h / 6.0;
}

void TemporalImputer::do_fit(const Dataset& dataset) {
  const auto& tt = dataset.temporal;
  const Index d = tt.features();
  mean_ = Vector::Zero(d);
  median_ = Vector::Zero(d);
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(d));
  for (const Index i : dataset.fit_rows()) {
    const auto& v = tt.values[static_cast<std::size_t>(i)];
    const auto& m = tt.observed[static_cast<std::size_t>(i)];
    for (Index t = 0; t < tt.seq_len(i); ++t) {
      for (Index f = 0; f < d; ++f) {
        if (m(t, f)) cols[static_cast<std::size_t>(f)].push_back(v(t, f));
      }
    }
  }
  for (Index f = 0; f < d; ++f) {
    const auto& c = cols[static_cast<std::size_t>(f)];
    if (c.empty()) continue;
    mean_(f) = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
    median_(f) = median_of(c);
  }
}

Dataset TemporalImputer::do_transform(const Dataset& dataset) const {
  const Index d = dataset.temporal.features();
  if (d != mean_.size()) {
    throw DataError("temporal imputation: feature count " + std::to_string(d) + " differs from fitted " +
                    std::to_string(mean_.size()));
  }
  Dataset out = dataset;
  auto& tt = out.temporal;
  for (Index i = 0; i < tt.instances(); ++i) {
    auto& v = tt.values[static_cast<std::size_t>(i)];
    auto& m = tt.observed[static_cast<std::size_t>(i)];
    const Index len = tt.seq_len(i);
    for (Index f = 0; f < d; ++f) {
      std::vector<Index> obs;
      for (Index t = 0; t < len; ++t) {
        if (m(t, f)) obs.push_back(t);
      }
      if (static_cast<Index>(obs.size()) == len) continue;
      const auto fill_constant = [&](double c) {
        for (Index t = 0; t < len; ++t) {
          if (!m(t, f)) v(t, f) = c;
        }
      };
      switch (method_) {
        case TemporalImputation::Mean: fill_constant(mean_(f)); break;
        case TemporalImputation::Median: fill_constant(median_(f)); break;
        case TemporalImputation::Locf: {
          if (obs.empty()) {
            fill_constant(median_(f));
            break;
          }
          for (Index t = 0; t < obs.front(); ++t) v(t, f) = v(obs.front(), f);
          for (Index t = obs.front() + 1; t < len; ++t) {
            if (!m(t, f)) v(t, f) = v(t - 1, f);
          }
          break;
        }
        case TemporalImputation::Linear:
        case TemporalImputation::CubicSpline: {
          const std::size_t need = method_ == TemporalImputation::Linear ? 2 : 4;
          if (obs.size() < need) {
            fill_constant(median_(f));
            break;
          }
          std::vector<double> xs, ys;
          for (const Index t : obs) {
            xs.push_back(tt.time(i, t));
            ys.push_back(v(t, f));
          }
          for (Index t = 0; t < len; ++t) {
            if (m(t, f)) continue;
            const double at = tt.time(i, t);
            if (method_ == TemporalImputation::CubicSpline) {
              v(t, f) = natural_cubic_spline(xs, ys, at);
              continue;
            }
            if (at <= xs.front()) {
              v(t, f) = ys.front();
            } else if (at >= xs.back()) {
              v(t, f) = ys.back();
            } else {
              const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), at) - xs.begin());
              const double w = (at - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
              v(t, f) = ys[hi - 1] + w * (ys[hi] - ys[hi - 1]);
            }
          }
          break;
        }
      }
    }
    m.topRows(len).setConstant(true);
  }
  return out;
}

Dataset impute_static(const Dataset& dataset, StaticImputation method, StaticImputerParams params) {
  StaticImputer imp(method, params);
  return imp.fit_transform(dataset);
}

Dataset impute_temporal(const Dataset& dataset, TemporalImputation method) {
  TemporalImputer imp(method);
  return imp.fit_transform(dataset);
}

}  // namespace tspipe
