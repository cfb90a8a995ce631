#include "tspipe/automl.hpp"

#include "tspipe/csv_io.hpp"
#include "tspipe/errors.hpp"
#include "tspipe/feature_selection.hpp"
#include "tspipe/imputation.hpp"
#include "tspipe/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace tspipe {

// ---------------------------------------------------------------------------
// Scores and traces

StepScores step_scores(const Predictor& model, const Dataset& dataset, const BOMetricSpec& metric) {
  if (!dataset.labels) throw ContractError("scoring needs a dataset with a problem attached");
  const auto rows = dataset.rows_in(metric.fold);
  if (rows.empty()) throw DataError("the " + to_string(metric.fold) + " fold used for scoring is empty");
  const Dataset part = dataset.subset(rows);
  return per_step_metric(metric.metric, *part.labels, model.predict(part));
}

std::optional<double> mean_score(const StepScores& s) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : s) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::size_t OptimizationTrace::incumbent() const {
  if (entries.empty()) throw ContractError("empty optimization trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const auto& s = entries[i].score;
    const auto& b = entries[best].score;
    if (s && (!b || better(*s, *b))) best = i;
  }
  return best;
}

std::vector<std::optional<double>> OptimizationTrace::incumbents() const {
  std::vector<std::optional<double>> out;
  std::optional<double> best;
  for (const auto& e : entries) {
    if (e.score && (!best || better(*e.score, *best))) best = e.score;
    out.push_back(best);
  }
  return out;
}

std::vector<StepScores> OptimizationTrace::step_incumbents() const {
  std::vector<StepScores> out;
  StepScores best;
  for (const auto& e : entries) {
    if (best.size() < e.step_scores.size()) best.resize(e.step_scores.size());
    for (std::size_t t = 0; t < e.step_scores.size(); ++t) {
      const auto& v = e.step_scores[t];
      if (v && (!best[t] || better(*v, *best[t]))) best[t] = v;
    }
    out.push_back(best);
  }
  return out;
}

std::string OptimizationTrace::to_csv() const {
  std::set<std::string> keys;
  for (const auto& e : entries) {
    for (const auto& [k, _] : e.config) keys.insert(k);
  }
  std::ostringstream os;
  os << "iteration";
  for (const auto& k : keys) os << ',' << csv_escape(k);
  os << ",model_path,step,score\n";
  for (const auto& e : entries) {
    std::ostringstream head;
    head << e.iteration;
    for (const auto& k : keys) {
      head << ',';
      auto it = e.config.find(k);
      if (it == e.config.end()) continue;
      if (const auto* d = std::get_if<double>(&it->second)) head << format_number(*d);
      else head << csv_escape(std::get<std::string>(it->second));
    }
    head << ',' << csv_escape(e.model_path);
    for (std::size_t t = 0; t < e.step_scores.size(); ++t) {
      os << head.str() << ',' << t << ',';
      if (e.step_scores[t]) os << format_number(*e.step_scores[t]);
      os << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Model classes

ModelClass sequence_model_class(ModelConfig base) {
  ModelClass mc;
  mc.name = to_string(base.model_type);
  mc.space = unconditional(get_hyperparameter_space(base.model_type));
  mc.make = [base](const Configuration& c, std::uint64_t seed, const std::string& id) -> std::unique_ptr<Predictor> {
    ModelConfig cfg = base;
    cfg.seed = seed;
    cfg.model_id = id;
    return std::make_unique<SequenceModel>(apply_configuration(cfg, c));
  };
  return mc;
}

ModelClass union_class(const std::vector<ModelClass>& classes) {
  if (classes.empty()) throw ParameterError("union of zero model classes");
  ModelClass mc;
  std::vector<std::pair<std::string, SearchSpace>> options;
  std::set<std::string> names;
  for (const auto& c : classes) {
    if (!names.insert(c.name).second) throw ParameterError("duplicate model class '" + c.name + "'");
    options.emplace_back(c.name, c.space);
    mc.name += (mc.name.empty() ? "" : "|") + c.name;
  }
  add_choice(mc.space, "class", options);
  mc.make = [classes](const Configuration& c, std::uint64_t seed, const std::string& id) {
    const auto& chosen = category(c, "class");
    for (const auto& k : classes) {
      if (k.name == chosen) return k.make(scoped(c, "class." + chosen), seed, id);
    }
    throw ParameterError("unknown model class '" + chosen + "'");
  };
  return mc;
}

// ---------------------------------------------------------------------------
// Search loop

namespace {

std::uint64_t run_seed(std::uint64_t seed, int iteration) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(iteration + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return (z ^ (z >> 31)) >> 1;
}

void check_options(const SearchOptions& o) {
  if (o.num_iter < 1) throw ParameterError("num_iter must be at least 1");
  if (o.initial < 1 || o.candidates < 1 || o.refresh < 1) {
    throw ParameterError("initial, candidates and refresh must be positive");
  }
  if (!(o.noise > 0.0) || o.jitter < 0.0) throw ParameterError("GP noise must be positive, jitter nonnegative");
}

void check_scoring_fold(const Dataset& dataset, const BOMetricSpec& metric) {
  if (!dataset.spec || !dataset.labels) throw ContractError("optimization needs a dataset with a problem attached");
  if (dataset.rows_in(metric.fold).empty()) {
    throw DataError("the " + to_string(metric.fold) + " fold used for scoring is empty");
  }
}

/// Trains one configuration and records it.
TraceEntry evaluate(const std::function<std::unique_ptr<Predictor>(std::uint64_t, const std::string&)>& make,
                    const Dataset& dataset, const BOMetricSpec& metric, const SearchOptions& o, int iteration,
                    const std::string& stage) {
  const auto start = std::chrono::steady_clock::now();
  TraceEntry e;
  e.iteration = iteration;
  e.stage = stage;
  const std::string id = o.id_prefix + "-" + stage + "-" + std::to_string(iteration);
  std::unique_ptr<Predictor> model = make(run_seed(o.seed, iteration), id);
  model->fit(dataset);
  e.step_scores = step_scores(*model, dataset, metric);
  e.score = mean_score(e.step_scores);
  e.model_name = model->name();
  if (o.model_dir) {
    model->save(model_path(*o.model_dir, id));
    e.model_path = id + ".model";
  }
  e.model = std::move(model);
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return e;
}

/// Chooses the next configuration: space-filling draws first, then the EI
/// maximizer. Stepwise mode models (encoding, step) pairs.
class Proposer {
 public:
  Proposer(const ConfigEncoding& encoding, const SearchOptions& o, bool maximize, bool stepwise, bool random_only)
      : enc_(encoding), o_(o), maximize_(maximize), stepwise_(stepwise), random_only_(random_only), rng_(o.seed) {
    if (!random_only_) initial_ = enc_.latin_hypercube(std::min(o.initial, o.num_iter), rng_);
  }

  Configuration next(const std::vector<TraceEntry>& history) {
    const std::size_t done = history.size();
    if (random_only_) return enc_.sample(rng_);
    if (done < initial_.size()) return initial_[done];

    Matrix x;
    Vector y;
    std::vector<std::optional<double>> step_best;
    observations(history, x, y, step_best);
    if (y.size() == 0) return enc_.sample(rng_);
    if (ls_.size() != x.cols() || done % static_cast<std::size_t>(o_.refresh) == 0) ls_ = median_lengthscales(x);
    GaussianProcess gp(o_.noise, o_.jitter);
    gp.fit(x, y, ls_);

    std::vector<Configuration> pool;
    std::vector<Vector> encoded;
    std::set<std::vector<double>> seen;
    for (const auto& e : history) seen.insert(key(e.encoded));
    std::vector<Configuration> repeats;
    std::vector<Vector> repeat_codes;
    for (int i = 0; i < o_.candidates; ++i) {
      Configuration c = enc_.sample(rng_);
      Vector v = enc_.encode(c);
      if (seen.count(key(v))) {
        repeats.push_back(std::move(c));
        repeat_codes.push_back(std::move(v));
      } else {
        pool.push_back(std::move(c));
        encoded.push_back(std::move(v));
      }
    }
    if (pool.empty()) {
      pool = std::move(repeats);
      encoded = std::move(repeat_codes);
    }

    const Vector acq = acquisition(gp, encoded, y, step_best);
    Index best = 0;
    acq.maxCoeff(&best);
    return pool[static_cast<std::size_t>(best)];
  }

 private:
  static std::vector<double> key(const Vector& v) { return {v.data(), v.data() + v.size()}; }

  double oriented(double v) const { return maximize_ ? v : -v; }

  double step_coordinate(std::size_t t, std::size_t steps) const {
    return steps > 1 ? static_cast<double>(t) / static_cast<double>(steps - 1) : 0.0;
  }

  void observations(const std::vector<TraceEntry>& history, Matrix& x, Vector& y,
                    std::vector<std::optional<double>>& step_best) const {
    std::vector<Vector> rows;
    std::vector<double> targets;
    for (const auto& e : history) {
      if (!stepwise_) {
        if (!e.score) continue;
        rows.push_back(e.encoded);
        targets.push_back(oriented(*e.score));
        continue;
      }
      const std::size_t steps = e.step_scores.size();
      if (step_best.size() < steps) step_best.resize(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        if (!e.step_scores[t]) continue;
        Vector r(e.encoded.size() + 1);
        r << e.encoded, step_coordinate(t, steps);
        rows.push_back(std::move(r));
        const double v = oriented(*e.step_scores[t]);
        targets.push_back(v);
        if (!step_best[t] || v > *step_best[t]) step_best[t] = v;
      }
    }
    if (rows.empty()) {
      x.resize(0, 0);
      y.resize(0);
      return;
    }
    x.resize(static_cast<Index>(rows.size()), rows.front().size());
    y.resize(static_cast<Index>(targets.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<Index>(i)) = rows[i].transpose();
      y(static_cast<Index>(i)) = targets[i];
    }
  }

  Vector acquisition(const GaussianProcess& gp, const std::vector<Vector>& encoded, const Vector& y,
                     const std::vector<std::optional<double>>& step_best) const {
    const auto n = static_cast<Index>(encoded.size());
    const Index w = enc_.width();
    Vector acq = Vector::Zero(n);
    Vector mean, sd;
    if (!stepwise_) {
      Matrix q(n, w);
      for (Index i = 0; i < n; ++i) q.row(i) = encoded[static_cast<std::size_t>(i)].transpose();
      gp.predict(q, mean, sd);
      const double best = y.maxCoeff();
      for (Index i = 0; i < n; ++i) acq(i) = expected_improvement(mean(i), sd(i), best);
      return acq;
    }
    std::vector<std::size_t> steps;
    for (std::size_t t = 0; t < step_best.size(); ++t) {
      if (step_best[t]) steps.push_back(t);
    }
    Matrix q(n * static_cast<Index>(steps.size()), w + 1);
    for (Index i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const Index r = i * static_cast<Index>(steps.size()) + static_cast<Index>(s);
        q.row(r).head(w) = encoded[static_cast<std::size_t>(i)].transpose();
        q(r, w) = step_coordinate(steps[s], step_best.size());
      }
    }
    gp.predict(q, mean, sd);
    for (Index i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const Index r = i * static_cast<Index>(steps.size()) + static_cast<Index>(s);
        acq(i) += expected_improvement(mean(r), sd(r), *step_best[steps[s]]);
      }
    }
    return acq;
  }

  const ConfigEncoding& enc_;
  SearchOptions o_;
  bool maximize_;
  bool stepwise_;
  bool random_only_;
  std::mt19937_64 rng_;
  std::vector<Configuration> initial_;
  Vector ls_;
};

SearchResult run_search(const ModelClass& mc, const Dataset& dataset, const BOMetricSpec& metric,
                        const SearchOptions& o, bool stepwise, const std::string& stage) {
  check_options(o);
  check_scoring_fold(dataset, metric);
  const ConfigEncoding enc(mc.space);
  Proposer proposer(enc, o, metric.maximize(), stepwise, false);
  SearchResult r;
  r.trace.metric = metric.metric;
  for (int it = 1; it <= o.num_iter; ++it) {
    const Configuration c = proposer.next(r.trace.entries);
    TraceEntry e = evaluate([&](std::uint64_t seed, const std::string& id) { return mc.make(c, seed, id); },
                            dataset, metric, o, it, stage);
    e.config = c;
    e.encoded = enc.encode(c);
    r.trace.entries.push_back(std::move(e));
  }
  r.incumbent = r.trace.incumbent();
  return r;
}

std::shared_ptr<StepwiseEnsemble> ensemble_of(const SearchResult& r, const std::string& id) {
  std::vector<std::shared_ptr<const Predictor>> models;
  std::vector<StepScores> scores;
  for (const auto& e : r.trace.entries) {
    models.push_back(e.model);
    scores.push_back(e.step_scores);
  }
  return std::make_shared<StepwiseEnsemble>(std::move(models), scores, r.trace.maximize(), id);
}

void require_online(const Dataset& dataset, const std::string& what) {
  if (!dataset.spec) throw ContractError(what + " needs a dataset with a problem attached");
  if (dataset.spec->problem != ProblemKind::Online) {
    throw ParameterError(what + " needs an online problem; use hyperparameter optimization for one-shot problems");
  }
  if (dataset.spec->max_seq_len < 2) throw ParameterError(what + " needs at least two steps");
}

}  // namespace

SearchResult optimize_hyperparameters(const ModelClass& model_class, const Dataset& dataset,
                                      const BOMetricSpec& metric, const SearchOptions& options) {
  return run_search(model_class, dataset, metric, options, false, "hpo");
}

StepwiseResult optimize_stepwise(const ModelClass& model_class, const Dataset& dataset, const BOMetricSpec& metric,
                                 const SearchOptions& options) {
  require_online(dataset, "stepwise model selection");
  StepwiseResult r;
  r.search = run_search(model_class, dataset, metric, options, true, "sms");
  r.ensemble = ensemble_of(r.search, options.id_prefix + "-stepwise");
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline search

namespace {

class PassThrough final : public Component {
 public:
  std::string name() const override { return "feature-selection:none"; }
  std::unique_ptr<Component> clone_unfitted() const override { return std::make_unique<PassThrough>(); }

 protected:
  void do_fit(const Dataset&) override {}
  Dataset do_transform(const Dataset& dataset) const override { return dataset; }
};

const char* const kStages[] = {"static_imputation", "temporal_imputation", "feature_selection"};

const std::vector<StageOption>& menu(const PipelineMenus& m, int stage) {
  return stage == 0 ? m.static_imputation : stage == 1 ? m.temporal_imputation : m.feature_selection;
}

std::string config_key(const Configuration& c) {
  std::ostringstream os;
  for (const auto& [k, v] : c) {
    os << k << '=';
    if (const auto* d = std::get_if<double>(&v)) os << format_number(*d);
    else os << std::get<std::string>(v);
    os << ';';
  }
  return os.str();
}

struct FittedPipeline {
  std::vector<std::unique_ptr<Component>> components;
  Dataset data;
};

}  // namespace

StageOption static_imputation_option(const std::string& method) {
  const StaticImputation m = parse_static_imputation(method);
  StageOption o;
  o.name = to_string(m);
  if (m == StaticImputation::Knn) o.space.dimensions.push_back(Dimension::discrete("k", {3, 5, 10}));
  o.make = [m](const Configuration& c) {
    StaticImputerParams p;
    p.k = static_cast<int>(number_or(c, "k", p.k));
    return std::make_unique<StaticImputer>(m, p);
  };
  return o;
}

StageOption temporal_imputation_option(const std::string& method) {
  const TemporalImputation m = parse_temporal_imputation(method);
  StageOption o;
  o.name = to_string(m);
  o.make = [m](const Configuration&) { return std::make_unique<TemporalImputer>(m); };
  return o;
}

StageOption feature_selection_option(const std::string& method, int feature_number) {
  const SelectionMethod m = parse_selection_method(method);
  StageOption o;
  o.name = to_string(m);
  o.make = [m, feature_number](const Configuration&) -> std::unique_ptr<Component> {
    if (m == SelectionMethod::None) return std::make_unique<PassThrough>();
    return std::make_unique<FeatureSelector>(m, FeatureKind::Temporal, feature_number);
  };
  return o;
}

SearchMethod parse_search_method(const std::string& s) {
  if (s == "random") return SearchMethod::Random;
  if (s == "gp") return SearchMethod::Gp;
  throw ParameterError("unknown search method '" + s + "' (expected random or gp)");
}

SearchSpace pipeline_space(const PipelineMenus& menus) {
  SearchSpace s;
  for (int stage = 0; stage < 3; ++stage) {
    const auto& m = menu(menus, stage);
    if (m.empty()) throw ParameterError(std::string("the ") + kStages[stage] + " menu is empty");
    std::vector<std::pair<std::string, SearchSpace>> options;
    for (const auto& o : m) options.emplace_back(o.name, unconditional(o.space));
    add_choice(s, kStages[stage], options);
  }
  if (menus.models.empty()) throw ParameterError("the model menu is empty");
  std::vector<std::pair<std::string, SearchSpace>> options;
  for (const auto& mc : menus.models) options.emplace_back(mc.name, mc.space);
  add_choice(s, "model", options);
  return s;
}

PipelineResult optimize_pipeline(const PipelineMenus& menus, const Dataset& dataset, const BOMetricSpec& metric,
                                 SearchMethod method, const SearchOptions& o) {
  check_options(o);
  check_scoring_fold(dataset, metric);
  const ConfigEncoding enc(pipeline_space(menus));
  Proposer proposer(enc, o, metric.maximize(), false, method == SearchMethod::Random);

  const auto option_index = [](const std::vector<std::string>& names, const std::string& v) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), v) - names.begin());
  };
  const auto names_of = [](const auto& list) {
    std::vector<std::string> out;
    for (const auto& x : list) out.push_back(x.name);
    return out;
  };

  std::map<std::string, std::shared_ptr<FittedPipeline>> cache;
  std::vector<std::shared_ptr<FittedPipeline>> used;
  std::vector<std::size_t> model_choice;
  PipelineResult r;
  r.search.trace.metric = metric.metric;
  for (int it = 1; it <= o.num_iter; ++it) {
    const Configuration c = proposer.next(r.search.trace.entries);
    Configuration stages;
    for (const auto& [k, v] : c) {
      if (k.rfind("model", 0) != 0) stages[k] = v;
    }
    auto& fitted = cache[config_key(stages)];
    if (!fitted) {
      fitted = std::make_shared<FittedPipeline>();
      Dataset d = dataset;
      for (int stage = 0; stage < 3; ++stage) {
        const auto& m = menu(menus, stage);
        const std::string chosen = category(c, kStages[stage]);
        const auto& opt = m[option_index(names_of(m), chosen)];
        auto comp = opt.make(scoped(c, std::string(kStages[stage]) + "." + chosen));
        d = comp->fit_transform(d);
        fitted->components.push_back(std::move(comp));
      }
      fitted->data = std::move(d);
    }
    const std::string chosen = category(c, "model");
    const std::size_t mi = option_index(names_of(menus.models), chosen);
    const ModelClass& mc = menus.models[mi];
    const Configuration mcfg = scoped(c, "model." + chosen);
    TraceEntry e = evaluate([&](std::uint64_t seed, const std::string& id) { return mc.make(mcfg, seed, id); },
                            fitted->data, metric, o, it, "psc");
    e.config = c;
    e.encoded = enc.encode(c);
    r.search.trace.entries.push_back(std::move(e));
    used.push_back(fitted);
    model_choice.push_back(mi);
  }
  r.search.incumbent = r.search.trace.incumbent();
  const auto& best = used[r.search.incumbent];
  r.components = std::move(best->components);
  r.transformed = std::move(best->data);
  r.model_choice = model_choice[r.search.incumbent];
  r.model_config = scoped(r.search.best().config, "model." + menus.models[r.model_choice].name);
  return r;
}

// ---------------------------------------------------------------------------
// Compositions

namespace {

void append_trace(OptimizationTrace& into, const OptimizationTrace& from) {
  const int offset = static_cast<int>(into.entries.size());
  for (TraceEntry e : from.entries) {
    e.iteration += offset;
    into.entries.push_back(std::move(e));
  }
}

}  // namespace

SashResult optimize_sash(const std::vector<ModelClass>& classes, const Dataset& dataset, const BOMetricSpec& metric,
                         const SearchOptions& options) {
  if (classes.empty()) throw ParameterError("SASH needs at least one model class");
  check_scoring_fold(dataset, metric);
  const bool online = dataset.spec->problem == ProblemKind::Online;
  SashResult r;
  r.trace.metric = metric.metric;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    SearchOptions o = options;
    o.seed = run_seed(options.seed, 1000 + static_cast<int>(k));
    o.id_prefix = options.id_prefix + "-" + classes[k].name;
    if (online) {
      StepwiseResult s = optimize_stepwise(classes[k], dataset, metric, o);
      append_trace(r.trace, s.search.trace);
      r.per_class.push_back(s.ensemble);
    } else {
      SearchResult s = optimize_hyperparameters(classes[k], dataset, metric, o);
      r.per_class.push_back(s.best().model);
      append_trace(r.trace, s.trace);
    }
  }
  r.model = std::make_shared<StackingEnsemble>(r.per_class, options.id_prefix + "-sash");
  r.model->fit(dataset);
  return r;
}

SpscResult optimize_spsc(const PipelineMenus& menus, const Dataset& dataset, const BOMetricSpec& metric,
                         const SearchOptions& pipeline_options, const SearchOptions& stepwise_options) {
  require_online(dataset, "stepwise pipeline selection");
  PipelineResult p = optimize_pipeline(menus, dataset, metric, SearchMethod::Gp, pipeline_options);
  StepwiseResult s = optimize_stepwise(menus.models[p.model_choice], p.transformed, metric, stepwise_options);
  SpscResult r;
  r.components = std::move(p.components);
  r.model_choice = p.model_choice;
  r.transformed = std::move(p.transformed);
  r.model = s.ensemble;
  r.trace.metric = metric.metric;
  append_trace(r.trace, p.search.trace);
  append_trace(r.trace, s.search.trace);
  return r;
}

}  // namespace tspipe
