#include "tspipe/feature_selection.hpp"

#include "tspipe/metrics.hpp"
#include "tspipe/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tspipe {

SelectionMethod parse_selection_method(const std::string& s) {
  if (s == "none" || s.empty()) return SelectionMethod::None;
  if (s == "greedy-addition" || s == "greedy-addtion") return SelectionMethod::GreedyAddition;
  if (s == "greedy-deletion") return SelectionMethod::GreedyDeletion;
  if (s == "recursive-addition") return SelectionMethod::RecursiveAddition;
  if (s == "recursive-deletion") return SelectionMethod::RecursiveDeletion;
  throw ParameterError("unknown feature selection method '" + s + "'");
}

std::string to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::None: return "none";
    case SelectionMethod::GreedyAddition: return "greedy-addition";
    case SelectionMethod::GreedyDeletion: return "greedy-deletion";
    case SelectionMethod::RecursiveAddition: return "recursive-addition";
    case SelectionMethod::RecursiveDeletion: return "recursive-deletion";
  }
  return "none";
}

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "static") return FeatureKind::Static;
  if (s == "temporal") return FeatureKind::Temporal;
  throw ParameterError("unknown feature type '" + s + "' (expected static or temporal)");
}

std::string to_string(FeatureKind k) { return k == FeatureKind::Static ? "static" : "temporal"; }

PredictorFactory default_selection_proxy() {
  return [](std::uint64_t seed) {
    ModelConfig c;
    c.model_type = CellType::Linear;
    c.epoch = 30;
    c.learning_rate = 0.05;
    c.batch_size = 32;
    c.ridge = 1e-4;
    c.seed = seed;
    c.model_id = "selection-proxy";
    return std::make_unique<SequenceModel>(c);
  };
}

Dataset restrict_features(const Dataset& dataset, FeatureKind kind, const std::vector<Index>& keep) {
  Dataset out = dataset;
  const auto cols = [&](const auto& m) { return m(Eigen::all, keep).eval(); };
  if (kind == FeatureKind::Static) {
    out.static_features.values = cols(dataset.static_features.values);
    out.static_features.observed = cols(dataset.static_features.observed);
    out.static_names.clear();
    out.static_features.levels.clear();
    for (Index j : keep) {
      out.static_names.push_back(dataset.static_names[static_cast<std::size_t>(j)]);
      out.static_features.levels.push_back(dataset.static_features.levels[static_cast<std::size_t>(j)]);
    }
  } else {
    for (std::size_t i = 0; i < out.temporal.values.size(); ++i) {
      out.temporal.values[i] = cols(dataset.temporal.values[i]);
      out.temporal.observed[i] = cols(dataset.temporal.observed[i]);
    }
    out.temporal.feature_count = static_cast<Index>(keep.size());
    out.temporal_names.clear();
    for (Index j : keep) out.temporal_names.push_back(dataset.temporal_names[static_cast<std::size_t>(j)]);
  }
  return out;
}

FeatureSelector::FeatureSelector(SelectionMethod method, FeatureKind kind, int feature_number, PredictorFactory proxy,
                                 std::uint64_t seed)
    : method_(method), kind_(kind), feature_number_(feature_number), proxy_(std::move(proxy)), seed_(seed) {
  if (method_ != SelectionMethod::None && feature_number_ < 1) {
    throw ParameterError("feature_number must be at least 1");
  }
  if (!proxy_) throw ParameterError("feature selection needs a proxy model factory");
}

double FeatureSelector::evaluate(const Dataset& dataset, const std::vector<Index>& keep) const {
  const Dataset view = restrict_features(dataset, kind_, keep);
  auto model = proxy_(seed_);
  model->fit(view);
  auto rows = view.rows_in(Fold::Val);
  if (rows.empty()) rows = view.fit_rows();
  const MetricName metric = view.spec->metric;
  const auto value = pooled_metric(metric, *view.labels, model->predict(view), &rows);
  if (!value) return -std::numeric_limits<double>::infinity();
  return maximize(metric) ? *value : -*value;
}

void FeatureSelector::do_fit(const Dataset& dataset) {
  const Index total = kind_ == FeatureKind::Static ? dataset.static_features.values.cols() : dataset.temporal.features();
  selected_.resize(static_cast<std::size_t>(total));
  std::iota(selected_.begin(), selected_.end(), Index{0});
  scores_.assign(static_cast<std::size_t>(total), std::numeric_limits<double>::quiet_NaN());
  const auto& names = kind_ == FeatureKind::Static ? dataset.static_names : dataset.temporal_names;
  if (method_ == SelectionMethod::None) {
    selected_names_ = names;
    return;
  }
  if (feature_number_ > total) {
    throw ParameterError("feature_number " + std::to_string(feature_number_) + " exceeds the " +
                         std::to_string(total) + " " + to_string(kind_) + " features");
  }
  if (!dataset.spec || !dataset.labels) throw ContractError("feature selection needs a constructed problem");
  const auto k = static_cast<std::size_t>(feature_number_);

  // Candidates are visited in ascending index order and only a strictly
  // better score replaces the incumbent, so ties keep the lower index.
  const auto best_of = [](const std::vector<std::pair<double, Index>>& cand) {
    auto best = cand.front();
    for (const auto& c : cand)
      if (c.first > best.first) best = c;
    return best.second;
  };
  const auto ranked = [](std::vector<std::pair<double, Index>> cand) {
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    return cand;
  };

  std::vector<Index> chosen;
  switch (method_) {
    case SelectionMethod::GreedyAddition: {
      std::vector<std::pair<double, Index>> cand;
      for (Index j = 0; j < total; ++j) {
        scores_[static_cast<std::size_t>(j)] = evaluate(dataset, {j});
        cand.emplace_back(scores_[static_cast<std::size_t>(j)], j);
      }
      const auto r = ranked(cand);
      for (std::size_t i = 0; i < k; ++i) chosen.push_back(r[i].second);
      break;
    }
    case SelectionMethod::GreedyDeletion: {
      // Score of "all but j": high means dropping j costs little.
      std::vector<std::pair<double, Index>> cand;
      for (Index j = 0; j < total; ++j) {
        std::vector<Index> rest;
        for (Index o = 0; o < total; ++o)
          if (o != j) rest.push_back(o);
        scores_[static_cast<std::size_t>(j)] = rest.empty() ? -std::numeric_limits<double>::infinity()
                                                             : evaluate(dataset, rest);
        cand.emplace_back(scores_[static_cast<std::size_t>(j)], j);
      }
      const auto r = ranked(cand);
      std::vector<bool> drop(static_cast<std::size_t>(total), false);
      for (std::size_t i = 0; i < static_cast<std::size_t>(total) - k; ++i) drop[static_cast<std::size_t>(r[i].second)] = true;
      for (Index j = 0; j < total; ++j)
        if (!drop[static_cast<std::size_t>(j)]) chosen.push_back(j);
      break;
    }
    case SelectionMethod::RecursiveAddition: {
      std::vector<bool> in(static_cast<std::size_t>(total), false);
      while (chosen.size() < k) {
        std::vector<std::pair<double, Index>> cand;
        for (Index j = 0; j < total; ++j) {
          if (in[static_cast<std::size_t>(j)]) continue;
          auto trial = chosen;
          trial.push_back(j);
          std::sort(trial.begin(), trial.end());
          scores_[static_cast<std::size_t>(j)] = evaluate(dataset, trial);
          cand.emplace_back(scores_[static_cast<std::size_t>(j)], j);
        }
        const Index pick = best_of(cand);
        in[static_cast<std::size_t>(pick)] = true;
        chosen.push_back(pick);
        std::sort(chosen.begin(), chosen.end());
      }
      break;
    }
    case SelectionMethod::RecursiveDeletion: {
      chosen = selected_;
      while (chosen.size() > k) {
        std::vector<std::pair<double, Index>> cand;
        for (Index j : chosen) {
          std::vector<Index> rest;
          for (Index o : chosen)
            if (o != j) rest.push_back(o);
          scores_[static_cast<std::size_t>(j)] = evaluate(dataset, rest);
          cand.emplace_back(scores_[static_cast<std::size_t>(j)], j);
        }
        const Index drop = best_of(cand);
        chosen.erase(std::find(chosen.begin(), chosen.end(), drop));
      }
      break;
    }
    case SelectionMethod::None: break;
  }
  std::sort(chosen.begin(), chosen.end());
  selected_ = chosen;
  selected_names_.clear();
  for (Index j : selected_) selected_names_.push_back(names[static_cast<std::size_t>(j)]);
}

Dataset FeatureSelector::do_transform(const Dataset& dataset) const {
  if (method_ == SelectionMethod::None) return dataset;
  // Columns are located by name so that a test set with the same features
  // in the same order maps to the fitted index set.
  const auto& names = kind_ == FeatureKind::Static ? dataset.static_names : dataset.temporal_names;
  std::vector<Index> keep;
  for (const auto& n : selected_names_) {
    const auto j = find_name(names, n);
    if (!j) throw DataError("feature selection: fitted feature '" + n + "' missing from dataset");
    keep.push_back(*j);
  }
  return restrict_features(dataset, kind_, keep);
}

Dataset select_features(const Dataset& dataset, SelectionMethod method, FeatureKind kind, int feature_number,
                        PredictorFactory proxy) {
  FeatureSelector s(method, kind, feature_number, std::move(proxy));
  return s.fit_transform(dataset);
}

}  // namespace tspipe
