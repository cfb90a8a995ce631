#include "tspipe/automl.hpp"

#include "tspipe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tspipe {

namespace {

Index steps_of(const SequenceArray& p) {
  Index s = 0;
  for (const auto& m : p) s = std::max(s, m.rows());
  return s;
}

std::string member_file(const std::filesystem::path& path, std::size_t k) {
  return path.stem().string() + ".member" + std::to_string(k) + ".model";
}

}  // namespace

// ---------------------------------------------------------------------------
// Stepwise ensemble

StepwiseEnsemble::StepwiseEnsemble(std::vector<std::shared_ptr<const Predictor>> members,
                                   const std::vector<StepScores>& scores, bool maximize, std::string model_id)
    : members_(std::move(members)), model_id_(std::move(model_id)) {
  for (const auto& m : members_) {
    if (!m) throw ParameterError("stepwise ensemble member is null");
  }
  paths_.resize(members_.size());
  select(scores, maximize);
}

StepwiseEnsemble::StepwiseEnsemble(std::vector<std::filesystem::path> member_paths,
                                   const std::vector<StepScores>& scores, bool maximize, std::string model_id)
    : members_(member_paths.size()), paths_(std::move(member_paths)), model_id_(std::move(model_id)) {
  select(scores, maximize);
}

void StepwiseEnsemble::select(const std::vector<StepScores>& scores, bool maximize) {
  if (members_.empty()) throw ParameterError("stepwise ensemble needs at least one model");
  if (scores.size() != members_.size()) throw ParameterError("one score vector per model is required");
  const std::size_t steps = scores.front().size();
  for (const auto& s : scores) {
    if (s.size() != steps) throw ParameterError("score vectors must have equal length");
  }
  const auto better = [&](double a, double b) { return maximize ? a > b : a < b; };
  std::size_t fallback = 0;
  std::optional<double> fallback_score;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const auto m = mean_score(scores[k]);
    if (m && (!fallback_score || better(*m, *fallback_score))) {
      fallback = k;
      fallback_score = m;
    }
  }
  selection_.assign(std::max<std::size_t>(steps, 1), fallback);
  for (std::size_t t = 0; t < steps; ++t) {
    std::optional<double> best;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const auto& v = scores[k][t];
      if (v && (!best || better(*v, *best))) {
        best = v;
        selection_[t] = k;
      }
    }
  }
}

const Predictor& StepwiseEnsemble::member(std::size_t k) const {
  if (!members_.at(k)) members_[k] = load_predictor(paths_[k]);
  return *members_[k];
}

SequenceArray StepwiseEnsemble::predict(const Dataset& dataset) const {
  std::vector<std::size_t> used(selection_);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::vector<SequenceArray> outputs(members_.size());
  for (auto k : used) outputs[k] = member(k).predict(dataset);
  SequenceArray out = outputs[used.front()];
  const Index last = static_cast<Index>(selection_.size()) - 1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (Index t = 0; t < out[i].rows(); ++t) {
      const auto k = selection_[static_cast<std::size_t>(std::min(t, last))];
      out[i].row(t) = outputs[k][i].row(t);
    }
  }
  return out;
}

std::unique_ptr<Predictor> StepwiseEnsemble::clone_unfitted(const std::string& model_id) const {
  auto copy = std::unique_ptr<StepwiseEnsemble>(new StepwiseEnsemble(*this));
  copy->model_id_ = model_id;
  return copy;
}

void StepwiseEnsemble::save(const std::filesystem::path& path) const {
  std::ostringstream os;
  write_model_header(os, "stepwise");
  os << "model_id " << model_id_ << "\nmembers " << members_.size() << '\n';
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const bool used = std::find(selection_.begin(), selection_.end(), k) != selection_.end();
    if (used) {
      const auto file = member_file(path, k);
      member(k).save(path.parent_path() / file);
      os << "member " << k << ' ' << file << '\n';
    } else {
      os << "member " << k << " -\n";
    }
  }
  os << "selection " << selection_.size();
  for (auto k : selection_) os << ' ' << k;
  os << "\nend\n";
  write_model_file(path, os.str());
}

std::unique_ptr<StepwiseEnsemble> StepwiseEnsemble::read(std::istream& in, const std::filesystem::path& dir) {
  auto e = std::unique_ptr<StepwiseEnsemble>(new StepwiseEnsemble());
  e->model_id_ = read_field<std::string>(in, "model_id");
  const auto n = read_field<std::size_t>(in, "members");
  if (n == 0) throw LoadError("stepwise ensemble without members");
  for (std::size_t k = 0; k < n; ++k) {
    if (read_field<std::size_t>(in, "member") != k) throw LoadError("member records out of order");
    std::string file;
    if (!(in >> file)) throw LoadError("truncated member record");
    e->paths_.push_back(file == "-" ? std::filesystem::path() : dir / file);
  }
  e->members_.resize(n);
  const auto s = read_field<std::size_t>(in, "selection");
  for (std::size_t t = 0; t < s; ++t) {
    std::size_t k = 0;
    if (!(in >> k)) throw LoadError("truncated selection");
    if (k >= n || e->paths_[k].empty()) throw LoadError("selection refers to a missing member");
    e->selection_.push_back(k);
  }
  if (e->selection_.empty()) throw LoadError("empty selection");
  expect_end(in);
  return e;
}

StepwiseEnsemble build_stepwise_ensemble(std::vector<std::shared_ptr<const Predictor>> models,
                                         const std::vector<StepScores>& scores, bool maximize) {
  return StepwiseEnsemble(std::move(models), scores, maximize);
}

// ---------------------------------------------------------------------------
// Stacking ensemble

namespace {

double task_loss(const Vector& pred, const Vector& y, Task task) {
  if (task == Task::Regression) return (pred - y).squaredNorm() / static_cast<double>(y.size());
  double s = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double p = std::clamp(pred(i), 1e-12, 1.0 - 1e-12);
    s -= y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
  }
  return s / static_cast<double>(y.size());
}

template <typename F>
double golden_section(F f, double lo, double hi, int iterations = 60) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace

Vector fit_convex_weights(const Matrix& p, const Vector& y, Task task, int sweeps) {
  const Index k = p.cols();
  if (k == 0) throw ParameterError("no members to weight");
  Vector w = Vector::Constant(k, 1.0 / static_cast<double>(k));
  if (k == 1 || y.size() == 0) return w;
  double current = task_loss(p * w, y, task);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double start = current;
    for (Index j = 0; j < k; ++j) {
      if (w(j) >= 1.0) continue;
      // w(a) = (1 - a) w + a e_j; a < 0 moves mass away from j down to w_j = 0.
      const double lo = -w(j) / (1.0 - w(j));
      const auto at = [&](double a) {
        Vector v = (1.0 - a) * w;
        v(j) += a;
        return v;
      };
      const auto f = [&](double a) { return task_loss(p * at(a), y, task); };
      const double a = golden_section(f, lo, 1.0);
      double best_a = a, best = f(a);
      for (double edge : {lo, 1.0}) {
        const double fe = f(edge);
        if (fe < best) {
          best = fe;
          best_a = edge;
        }
      }
      if (best < current) {
        w = at(best_a).cwiseMax(0.0);
        w /= w.sum();
        current = task_loss(p * w, y, task);
      }
    }
    if (start - current < 1e-12) break;
  }
  return w;
}

StackingEnsemble::StackingEnsemble(std::vector<std::shared_ptr<const Predictor>> members, std::string model_id)
    : members_(std::move(members)), model_id_(std::move(model_id)) {
  if (members_.empty()) throw ParameterError("stacking ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!m) throw ParameterError("stacking ensemble member is null");
  }
}

void StackingEnsemble::fit(const Dataset& dataset) {
  if (!dataset.labels || !dataset.spec) throw ContractError("stacking: dataset has no problem attached");
  const auto val = dataset.rows_in(Fold::Val);
  if (val.empty()) throw DataError("stacking: the validation fold is empty");
  task_ = dataset.spec->task;
  const auto k = static_cast<Index>(members_.size());
  std::vector<SequenceArray> out;
  for (const auto& m : members_) out.push_back(m->predict(dataset));
  const Index steps = steps_of(out.front());
  const Index labels = static_cast<Index>(dataset.label_names.size());

  const auto gather = [&](std::optional<Index> step, Matrix& p, Vector& y) {
    std::vector<std::pair<Index, std::pair<Index, Index>>> cells;  // row, (step, label)
    for (Index i : val) {
      const auto& valid = dataset.labels->valid[static_cast<std::size_t>(i)];
      for (Index t = 0; t < valid.rows(); ++t) {
        if (step && t != *step) continue;
        for (Index l = 0; l < labels; ++l) {
          if (valid(t, l)) cells.push_back({i, {t, l}});
        }
      }
    }
    p.resize(static_cast<Index>(cells.size()), k);
    y.resize(static_cast<Index>(cells.size()));
    for (Index c = 0; c < p.rows(); ++c) {
      const auto& [i, tl] = cells[static_cast<std::size_t>(c)];
      const auto ui = static_cast<std::size_t>(i);
      for (Index m = 0; m < k; ++m) p(c, m) = out[static_cast<std::size_t>(m)][ui](tl.first, tl.second);
      y(c) = dataset.labels->values[ui](tl.first, tl.second);
    }
  };

  Matrix p;
  Vector y;
  gather(std::nullopt, p, y);
  const Vector pooled = fit_convex_weights(p, y, task_);
  weights_.resize(std::max<Index>(steps, 1), k);
  for (Index t = 0; t < weights_.rows(); ++t) {
    gather(t, p, y);
    weights_.row(t) = (y.size() > 0 ? fit_convex_weights(p, y, task_) : pooled).transpose();
  }
}

SequenceArray StackingEnsemble::predict(const Dataset& dataset) const {
  if (!fitted()) throw ContractError("stacking: predict called before fit");
  SequenceArray out;
  const Index last = weights_.rows() - 1;
  for (std::size_t m = 0; m < members_.size(); ++m) {
    const SequenceArray p = members_[m]->predict(dataset);
    if (m == 0) {
      out = p;
      for (auto& x : out) x.setZero();
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (Index t = 0; t < p[i].rows(); ++t) {
        out[i].row(t) += weights_(std::min(t, last), static_cast<Index>(m)) * p[i].row(t);
      }
    }
  }
  return out;
}

std::unique_ptr<Predictor> StackingEnsemble::clone_unfitted(const std::string& model_id) const {
  return std::make_unique<StackingEnsemble>(members_, model_id);
}

void StackingEnsemble::save(const std::filesystem::path& path) const {
  if (!fitted()) throw ContractError("stacking: save called before fit");
  std::ostringstream os;
  write_model_header(os, "stacking");
  os << "model_id " << model_id_ << "\ntask " << to_string(task_) << "\nmembers " << members_.size() << '\n';
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const auto file = member_file(path, k);
    members_[k]->save(path.parent_path() / file);
    os << "member " << k << ' ' << file << '\n';
  }
  write_matrix(os, "weights", weights_);
  os << "end\n";
  write_model_file(path, os.str());
}

std::unique_ptr<StackingEnsemble> StackingEnsemble::read(std::istream& in, const std::filesystem::path& dir) {
  const auto id = read_field<std::string>(in, "model_id");
  const auto task = parse_task(read_field<std::string>(in, "task"));
  const auto n = read_field<std::size_t>(in, "members");
  if (n == 0) throw LoadError("stacking ensemble without members");
  std::vector<std::shared_ptr<const Predictor>> members;
  for (std::size_t k = 0; k < n; ++k) {
    if (read_field<std::size_t>(in, "member") != k) throw LoadError("member records out of order");
    std::string file;
    if (!(in >> file)) throw LoadError("truncated member record");
    members.push_back(load_predictor(dir / file));
  }
  auto e = std::make_unique<StackingEnsemble>(std::move(members), id);
  e->task_ = task;
  e->weights_ = read_matrix(in, "weights");
  if (e->weights_.cols() != static_cast<Index>(n) || e->weights_.rows() == 0) throw LoadError("bad weight matrix");
  expect_end(in);
  return e;
}

StackingEnsemble build_stacking_ensemble(std::vector<std::shared_ptr<const Predictor>> members,
                                         const Dataset& dataset) {
  StackingEnsemble e(std::move(members));
  e.fit(dataset);
  return e;
}

}  // namespace tspipe
