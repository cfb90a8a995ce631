#include "tspipe/preprocessing.hpp"

#include "tspipe/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tspipe {

Dataset filter_negative(const Dataset& dataset) {
  Dataset out = dataset;
  auto& st = out.static_features;
  for (Index i = 0; i < st.values.rows(); ++i) {
    for (Index j = 0; j < st.values.cols(); ++j) {
      if (st.observed(i, j) && !st.categorical(j) && st.values(i, j) < 0.0) {
        st.observed(i, j) = false;
        st.values(i, j) = kMissing;
      }
    }
  }
  auto& tt = out.temporal;
  for (std::size_t i = 0; i < tt.values.size(); ++i) {
    auto& v = tt.values[i];
    auto& m = tt.observed[i];
    for (Index t = 0; t < v.rows(); ++t) {
      for (Index d = 0; d < v.cols(); ++d) {
        if (m(t, d) && v(t, d) < 0.0) {
          m(t, d) = false;
          v(t, d) = kMissing;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string category_label(const StaticMatrix& st, Index i, Index j) {
  if (st.categorical(j)) {
    return st.levels[static_cast<std::size_t>(j)][static_cast<std::size_t>(st.values(i, j))];
  }
  return format_number(st.values(i, j));
}

}  // namespace

void OneHotEncoder::do_fit(const Dataset& dataset) {
  vocabulary_.clear();
  const auto rows = dataset.fit_rows();
  for (const auto& f : features_) {
    const auto col = find_name(dataset.static_names, f);
    if (!col) throw ParameterError("one-hot: unknown static feature '" + f + "'");
    std::set<std::string> cats;
    for (const Index i : rows) {
      if (dataset.static_features.observed(i, *col)) cats.insert(category_label(dataset.static_features, i, *col));
    }
    vocabulary_.emplace_back(cats.begin(), cats.end());
  }
}

Dataset OneHotEncoder::do_transform(const Dataset& dataset) const {
  const auto& st = dataset.static_features;
  const Index n = dataset.instances();
  for (const auto& f : features_) {
    if (!find_name(dataset.static_names, f)) throw ParameterError("one-hot: unknown static feature '" + f + "'");
  }

  std::vector<std::string> names;
  std::vector<std::vector<std::string>> levels;
  std::vector<Vector> columns;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> masks;
  for (Index j = 0; j < st.values.cols(); ++j) {
    const auto& fname = dataset.static_names[static_cast<std::size_t>(j)];
    const auto which = find_name(features_, fname);
    if (!which) {
      names.push_back(fname);
      levels.push_back(st.levels[static_cast<std::size_t>(j)]);
      columns.emplace_back(st.values.col(j));
      masks.emplace_back(st.observed.col(j));
      continue;
    }
    const auto& vocab = vocabulary_[static_cast<std::size_t>(*which)];
    const auto base = columns.size();
    for (const auto& c : vocab) {
      names.push_back(fname + "_" + c);
      levels.emplace_back();
      columns.emplace_back(Vector::Constant(n, kMissing));
      masks.emplace_back(Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, false));
    }
    for (Index i = 0; i < n; ++i) {
      if (!st.observed(i, j)) continue;
      const auto label = category_label(st, i, j);
      const auto hit = std::lower_bound(vocab.begin(), vocab.end(), label);
      const bool known = hit != vocab.end() && *hit == label;
      for (std::size_t k = 0; k < vocab.size(); ++k) {
        columns[base + k](i) = known && vocab.begin() + static_cast<std::ptrdiff_t>(k) == hit ? 1.0 : 0.0;
        masks[base + k](i) = true;
      }
    }
  }

  Dataset out = dataset;
  out.static_names = names;
  out.static_features.levels = levels;
  out.static_features.values.resize(n, static_cast<Index>(columns.size()));
  out.static_features.observed.resize(n, static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.static_features.values.col(static_cast<Index>(k)) = columns[k];
    out.static_features.observed.col(static_cast<Index>(k)) = masks[k];
  }
  return out;
}

// ---------------------------------------------------------------------------

NormalizationMode parse_normalization(const std::string& s) {
  if (s == "minmax") return NormalizationMode::MinMax;
  if (s == "standard") return NormalizationMode::Standard;
  if (s == "none" || s.empty()) return NormalizationMode::None;
  throw ParameterError("unknown normalization '" + s + "' (expected minmax, standard or none)");
}

std::string to_string(NormalizationMode m) {
  switch (m) {
    case NormalizationMode::MinMax: return "minmax";
    case NormalizationMode::Standard: return "standard";
    case NormalizationMode::None: break;
  }
  return "none";
}

namespace {

struct Accumulator {
  double lo = INFINITY, hi = -INFINITY, sum = 0.0, sum_sq = 0.0;
  long count = 0;
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    sum_sq += v * v;
    ++count;
  }
};

void finish(NormalizationMode mode, const std::vector<Accumulator>& acc, Normalizer::Stats& stats) {
  const auto d = static_cast<Index>(acc.size());
  stats.offset = Vector::Zero(d);
  stats.scale = Vector::Ones(d);
  for (Index k = 0; k < d; ++k) {
    const auto& a = acc[static_cast<std::size_t>(k)];
    if (!stats.active[static_cast<std::size_t>(k)] || a.count == 0) {
      stats.active[static_cast<std::size_t>(k)] = false;
      continue;
    }
    if (mode == NormalizationMode::MinMax) {
      stats.offset(k) = a.lo;
      stats.scale(k) = a.hi > a.lo ? a.hi - a.lo : 1.0;
    } else {
      const double mean = a.sum / static_cast<double>(a.count);
      const double var = std::max(0.0, a.sum_sq / static_cast<double>(a.count) - mean * mean);
      const double sd = std::sqrt(var);
      stats.offset(k) = mean;
      stats.scale(k) = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
  }
}

}  // namespace

void Normalizer::do_fit(const Dataset& dataset) {
  const auto rows = dataset.fit_rows();
  const auto& st = dataset.static_features;
  const auto& tt = dataset.temporal;
  std::vector<Accumulator> sacc(static_cast<std::size_t>(st.values.cols()));
  std::vector<Accumulator> tacc(static_cast<std::size_t>(tt.features()));
  static_.active.assign(sacc.size(), mode_ != NormalizationMode::None);
  temporal_.active.assign(tacc.size(), mode_ != NormalizationMode::None);
  for (Index j = 0; j < st.values.cols(); ++j) {
    if (st.categorical(j) || find_name(exclude_, dataset.static_names[static_cast<std::size_t>(j)])) {
      static_.active[static_cast<std::size_t>(j)] = false;
    }
  }
  for (Index d = 0; d < tt.features(); ++d) {
    if (find_name(exclude_, dataset.temporal_names[static_cast<std::size_t>(d)])) {
      temporal_.active[static_cast<std::size_t>(d)] = false;
    }
  }
  if (mode_ != NormalizationMode::None) {
    for (const Index i : rows) {
      for (Index j = 0; j < st.values.cols(); ++j) {
        if (st.observed(i, j)) sacc[static_cast<std::size_t>(j)].add(st.values(i, j));
      }
      const auto& v = tt.values[static_cast<std::size_t>(i)];
      const auto& m = tt.observed[static_cast<std::size_t>(i)];
      for (Index t = 0; t < tt.seq_len(i); ++t) {
        for (Index d = 0; d < tt.features(); ++d) {
          if (m(t, d)) tacc[static_cast<std::size_t>(d)].add(v(t, d));
        }
      }
    }
  }
  finish(mode_, sacc, static_);
  finish(mode_, tacc, temporal_);
}

Dataset Normalizer::do_transform(const Dataset& dataset) const {
  if (mode_ == NormalizationMode::None) return dataset;
  const auto& st = dataset.static_features;
  if (st.values.cols() != static_.offset.size() || dataset.temporal.features() != temporal_.offset.size()) {
    throw DataError("normalizer: feature layout differs from the fitted layout");
  }
  Dataset out = dataset;
  auto& so = out.static_features;
  for (Index i = 0; i < so.values.rows(); ++i) {
    for (Index j = 0; j < so.values.cols(); ++j) {
      if (so.observed(i, j) && static_.active[static_cast<std::size_t>(j)]) {
        so.values(i, j) = (so.values(i, j) - static_.offset(j)) / static_.scale(j);
      }
    }
  }
  auto& tt = out.temporal;
  for (std::size_t i = 0; i < tt.values.size(); ++i) {
    auto& v = tt.values[i];
    const auto& m = tt.observed[i];
    for (Index t = 0; t < v.rows(); ++t) {
      for (Index d = 0; d < v.cols(); ++d) {
        if (m(t, d) && temporal_.active[static_cast<std::size_t>(d)]) {
          v(t, d) = (v(t, d) - temporal_.offset(d)) / temporal_.scale(d);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Dataset make_problem(const Dataset& dataset, const ProblemSpec& spec) {
  spec.validate();
  if (dataset.spec) throw ContractError("make_problem: dataset already has a problem attached");
  const auto& tt = dataset.temporal;
  std::vector<Index> label_cols, action_cols, input_cols;
  for (const auto& l : spec.label_names) {
    const auto c = find_name(dataset.temporal_names, l);
    if (!c) throw DataError("make_problem: label '" + l + "' is not a temporal feature");
    label_cols.push_back(*c);
  }
  for (const auto& a : spec.treatment_names) {
    const auto c = find_name(dataset.temporal_names, a);
    if (!c) throw DataError("make_problem: treatment '" + a + "' is not a temporal feature");
    if (find_name(spec.label_names, a)) throw DataError("make_problem: '" + a + "' is both label and treatment");
    action_cols.push_back(*c);
  }
  for (Index d = 0; d < tt.features(); ++d) {
    const auto& nm = dataset.temporal_names[static_cast<std::size_t>(d)];
    if (!find_name(spec.label_names, nm) && !find_name(spec.treatment_names, nm)) input_cols.push_back(d);
  }

  const Index n = dataset.instances();
  const Index steps = spec.max_seq_len;
  const auto n_in = static_cast<Index>(input_cols.size());
  const auto n_lab = static_cast<Index>(label_cols.size());
  const bool online = spec.problem == ProblemKind::Online;

  Dataset out;
  out.ids = dataset.ids;
  out.static_features = dataset.static_features;
  out.static_names = dataset.static_names;
  out.fold = dataset.fold;
  out.label_names = spec.label_names;
  out.spec = spec;
  for (const Index d : input_cols) out.temporal_names.push_back(dataset.temporal_names[static_cast<std::size_t>(d)]);
  out.temporal = TemporalTensor::empty(n, steps, n_in);
  out.labels.emplace();
  if (!action_cols.empty()) {
    out.actions.emplace();
    out.actions->names = spec.treatment_names;
  }

  for (Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto& v = tt.values[si];
    const auto& m = tt.observed[si];
    const Index len = tt.seq_len(i);

    // Source range [first, last) of kept input steps.
    Index last = len;
    if (spec.trigger_step) last = std::min<Index>(len, *spec.trigger_step);
    const Index first = std::max<Index>(0, last - steps);
    const Index kept = last - first;
    out.temporal.seq_len(i) = static_cast<int>(kept);
    for (Index s = 0; s < kept; ++s) {
      out.temporal.time(i, s) = tt.time(i, first + s);
      for (Index k = 0; k < n_in; ++k) {
        const Index d = input_cols[static_cast<std::size_t>(k)];
        out.temporal.values[si](s, k) = v(first + s, d);
        out.temporal.observed[si](s, k) = m(first + s, d);
      }
    }
    if (out.actions) {
      Matrix a = Matrix::Zero(steps, static_cast<Index>(action_cols.size()));
      for (Index s = 0; s < kept; ++s) {
        for (std::size_t k = 0; k < action_cols.size(); ++k) {
          if (m(first + s, action_cols[k])) a(s, static_cast<Index>(k)) = v(first + s, action_cols[k]);
        }
      }
      out.actions->values.push_back(std::move(a));
    }

    if (online) {
      Matrix y = Matrix::Zero(steps, n_lab);
      Mask valid = Mask::Constant(steps, n_lab, false);
      for (Index s = 0; s + spec.window < kept; ++s) {
        const Index src = first + s + spec.window;
        for (Index k = 0; k < n_lab; ++k) {
          const Index d = label_cols[static_cast<std::size_t>(k)];
          if (m(src, d)) {
            y(s, k) = v(src, d);
            valid(s, k) = true;
          }
        }
      }
      out.labels->values.push_back(std::move(y));
      out.labels->valid.push_back(std::move(valid));
    } else {
      Matrix y = Matrix::Zero(1, n_lab);
      Mask valid = Mask::Constant(1, n_lab, false);
      const Index from = spec.trigger_step ? std::min<Index>(len, *spec.trigger_step) : 0;
      for (Index k = 0; k < n_lab; ++k) {
        const Index d = label_cols[static_cast<std::size_t>(k)];
        for (Index s = len - 1; s >= from; --s) {
          if (m(s, d)) {
            y(0, k) = v(s, d);
            valid(0, k) = true;
            break;
          }
        }
      }
      out.labels->values.push_back(std::move(y));
      out.labels->valid.push_back(std::move(valid));
    }
  }

  if (spec.task == Task::Classification) {
    for (std::size_t i = 0; i < out.labels->values.size(); ++i) {
      const auto& y = out.labels->values[i];
      const auto& ok = out.labels->valid[i];
      for (Index r = 0; r < y.rows(); ++r) {
        for (Index c = 0; c < y.cols(); ++c) {
          if (ok(r, c) && y(r, c) != 0.0 && y(r, c) != 1.0) {
            throw DataError("make_problem: classification label '" + spec.label_names[static_cast<std::size_t>(c)] +
                            "' of instance " + out.ids[i] + " is not 0/1");
          }
        }
      }
    }
  }
  out.check_consistency();
  return out;
}

// ---------------------------------------------------------------------------

std::string PipelineComposer::name() const {
  std::string s = "pipeline(";
  for (std::size_t i = 0; i < stages_.size(); ++i) s += (i ? "," : "") + stages_[i]->name();
  return s + ")";
}

std::unique_ptr<Component> PipelineComposer::clone_unfitted() const {
  std::vector<std::unique_ptr<Component>> v;
  for (const auto& s : stages_) v.push_back(s->clone_unfitted());
  return std::make_unique<PipelineComposer>(std::move(v));
}

void PipelineComposer::do_fit(const Dataset& dataset) {
  Dataset current = dataset;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    if (i + 1 < stages_.size()) {
      current = stages_[i]->fit_transform(current);
    } else {
      stages_[i]->fit(current);
    }
  }
}

Dataset PipelineComposer::do_transform(const Dataset& dataset) const {
  Dataset current = dataset;
  for (const auto& s : stages_) current = s->transform(current);
  return current;
}

PipelineComposer compose(std::vector<std::unique_ptr<Component>> stages) {
  return PipelineComposer(std::move(stages));
}

}  // namespace tspipe
