#include "tspipe/pathways.hpp"

#include "tspipe/csv_io.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace tspipe {

SensingKind parse_sensing_kind(const std::string& s) {
  if (s == "randomize" || s == "random") return SensingKind::Randomize;
  if (s == "greedy-voi") return SensingKind::GreedyVoi;
  throw ParameterError("unknown sensing policy '" + s + "' (expected randomize or greedy-voi)");
}

std::string to_string(SensingKind k) { return k == SensingKind::Randomize ? "randomize" : "greedy-voi"; }

bool within_budget(double used, double total, double budget) { return used <= budget * total + 1e-12 * total; }

namespace {

void check_budget(double budget) {
  if (!(budget > 0.0 && budget <= 1.0)) throw ParameterError("sensing budget must lie in (0, 1]");
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

SensingPolicy::SensingPolicy(SensingKind kind, double budget, std::vector<double> costs, std::uint64_t seed)
    : kind_(kind), budget_(budget), costs_(std::move(costs)), seed_(seed) {
  check_budget(budget_);
  for (double c : costs_)
    if (!(c >= 0.0)) throw ParameterError("sensing costs must be nonnegative");
  if (!costs_.empty() && std::all_of(costs_.begin(), costs_.end(), [](double c) { return c == 0.0; })) {
    throw ParameterError("sensing costs must not all be zero");
  }
}

void SensingPolicy::fit(const Dataset& train, std::vector<const Predictor*> ensemble) {
  const Index d = train.temporal.features();
  if (costs_.empty()) costs_.assign(static_cast<std::size_t>(d), 1.0);
  if (static_cast<Index>(costs_.size()) != d) {
    throw ParameterError("sensing costs list " + std::to_string(costs_.size()) + " weights for " + std::to_string(d) +
                         " temporal features");
  }
  if (kind_ == SensingKind::GreedyVoi) {
    if (ensemble.size() < 2) throw ParameterError("greedy-voi needs an ensemble of at least 2 fitted predictors");
    for (const auto* m : ensemble)
      if (m == nullptr || !m->fitted()) throw ContractError("greedy-voi ensemble members must be fitted");
  }
  ensemble_ = std::move(ensemble);
  mean_ = p10_ = p90_ = Vector::Zero(d);
  const auto rows = train.fit_rows();
  for (Index j = 0; j < d; ++j) {
    std::vector<double> v;
    for (Index i : rows) {
      const auto si = static_cast<std::size_t>(i);
      for (Index t = 0; t < train.temporal.seq_len(i); ++t)
        if (train.temporal.observed[si](t, j)) v.push_back(train.temporal.values[si](t, j));
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    mean_(j) = v.empty() ? 0.0 : sum / static_cast<double>(v.size());
    p10_(j) = quantile(v, 0.1);
    p90_(j) = quantile(v, 0.9);
  }
  fitted_ = true;
}

std::vector<Matrix> SensingPolicy::scores(const Dataset& dataset) const {
  if (!fitted_) throw ContractError("sensing policy used before fit");
  const Index d = dataset.temporal.features();
  std::vector<Matrix> out;
  if (kind_ != SensingKind::GreedyVoi) return out;
  for (Index i = 0; i < dataset.instances(); ++i) {
    const Index len = dataset.temporal.seq_len(i);
    Matrix s = Matrix::Zero(dataset.temporal.steps(), d);
    const Index cells = len * d;
    if (cells == 0) {
      out.push_back(std::move(s));
      continue;
    }
    // Copy 2c holds cell c at the 10th percentile, copy 2c+1 at the 90th.
    Dataset rep = dataset.subset(std::vector<Index>(static_cast<std::size_t>(2 * cells), i));
    for (Index k = 0; k < 2 * cells; ++k) {
      auto& v = rep.temporal.values[static_cast<std::size_t>(k)];
      auto& m = rep.temporal.observed[static_cast<std::size_t>(k)];
      for (Index t = 0; t < len; ++t) {
        v.row(t).head(d) = mean_.transpose();
        m.row(t).head(d).setConstant(true);
      }
      const Index c = k / 2;
      v(c / d, c % d) = k % 2 == 0 ? p10_(c % d) : p90_(c % d);
      for (Index j = 0; j < rep.static_features.values.cols(); ++j) {
        if (!rep.static_features.observed(k, j)) {
          rep.static_features.values(k, j) = 0.0;
          rep.static_features.observed(k, j) = true;
        }
      }
    }
    for (const auto* member : ensemble_) {
      const auto pred = member->predict(rep);
      for (Index c = 0; c < cells; ++c) {
        const double change =
            (pred[static_cast<std::size_t>(2 * c + 1)] - pred[static_cast<std::size_t>(2 * c)]).cwiseAbs().sum();
        s(c / d, c % d) += change / static_cast<double>(ensemble_.size());
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

MaskArray SensingPolicy::select(const Dataset& dataset, std::optional<double> budget,
                                const std::vector<Matrix>* precomputed) const {
  if (!fitted_) throw ContractError("sensing policy used before fit");
  const double b = budget.value_or(budget_);
  check_budget(b);
  const Index d = dataset.temporal.features();
  if (static_cast<Index>(costs_.size()) != d) throw DataError("sensing policy was fitted on a different feature count");
  std::vector<Matrix> own;
  if (kind_ == SensingKind::GreedyVoi && precomputed == nullptr) own = scores(dataset);
  const std::vector<Matrix>& sc = precomputed != nullptr ? *precomputed : own;
  if (kind_ == SensingKind::GreedyVoi && static_cast<Index>(sc.size()) != dataset.instances()) {
    throw DataError("greedy-voi scores do not match the dataset");
  }
  std::mt19937_64 rng(seed_);
  MaskArray sel;
  for (Index i = 0; i < dataset.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Index len = dataset.temporal.seq_len(i);
    Mask m = Mask::Constant(dataset.temporal.steps(), d, false);
    double total = 0.0;
    std::vector<std::pair<Index, Index>> cand;
    for (Index t = 0; t < len; ++t) {
      for (Index j = 0; j < d; ++j) {
        total += costs_[static_cast<std::size_t>(j)];
        if (dataset.temporal.observed[si](t, j)) cand.emplace_back(t, j);
      }
    }
    if (kind_ == SensingKind::Randomize) {
      std::shuffle(cand.begin(), cand.end(), rng);
    } else {
      const auto ratio = [&](const std::pair<Index, Index>& c) {
        const double cost = costs_[static_cast<std::size_t>(c.second)];
        return cost > 0.0 ? sc[si](c.first, c.second) / cost : std::numeric_limits<double>::infinity();
      };
      std::stable_sort(cand.begin(), cand.end(), [&](const auto& x, const auto& y) { return ratio(x) > ratio(y); });
    }
    double used = 0.0;
    for (const auto& [t, j] : cand) {
      const double c = costs_[static_cast<std::size_t>(j)];
      if (within_budget(used + c, total, b)) {
        used += c;
        m(t, j) = true;
      }
    }
    sel.push_back(std::move(m));
  }
  return sel;
}

SensingResult SensingPolicy::apply(const Dataset& dataset, const Component* imputer, std::optional<double> budget,
                                   const std::vector<Matrix>* precomputed) const {
  SensingResult r;
  r.selection = select(dataset, budget, precomputed);
  r.dataset = dataset;
  for (Index i = 0; i < dataset.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    for (Index t = 0; t < dataset.temporal.seq_len(i); ++t) {
      for (Index j = 0; j < dataset.temporal.features(); ++j) {
        if (!r.selection[si](t, j)) {
          r.dataset.temporal.observed[si](t, j) = false;
          r.dataset.temporal.values[si](t, j) = kMissing;
        }
      }
    }
  }
  if (imputer != nullptr) r.dataset = imputer->transform(r.dataset);
  return r;
}

std::pair<double, double> selection_cost(const Dataset& dataset, const MaskArray& selection, Index row,
                                         const std::vector<double>& costs) {
  double total = 0.0, used = 0.0;
  const auto si = static_cast<std::size_t>(row);
  for (Index t = 0; t < dataset.temporal.seq_len(row); ++t) {
    for (Index j = 0; j < dataset.temporal.features(); ++j) {
      total += costs[static_cast<std::size_t>(j)];
      if (selection[si](t, j)) used += costs[static_cast<std::size_t>(j)];
    }
  }
  return {total, used};
}

std::string selection_to_csv(const Dataset& dataset, const MaskArray& selection) {
  std::string out = "id,time,variable,selected\n";
  for (Index i = 0; i < dataset.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    for (Index t = 0; t < dataset.temporal.seq_len(i); ++t) {
      for (Index j = 0; j < dataset.temporal.features(); ++j) {
        out += csv_escape(dataset.ids[si]) + ',' + format_number(dataset.temporal.time(i, t)) + ',' +
               csv_escape(dataset.temporal_names[static_cast<std::size_t>(j)]) + ',' +
               (selection[si](t, j) ? "1" : "0") + '\n';
      }
    }
  }
  return out;
}

}  // namespace tspipe
