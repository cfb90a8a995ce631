#include "run_pipeline.hpp"

#include "tspipe/automl.hpp"
#include "tspipe/csv_io.hpp"
#include "tspipe/errors.hpp"
#include "tspipe/feature_selection.hpp"
#include "tspipe/imputation.hpp"
#include "tspipe/metrics.hpp"
#include "tspipe/pathways.hpp"
#include "tspipe/posthoc.hpp"
#include "tspipe/preprocessing.hpp"
#include "tspipe/split.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

namespace tspipe::cli {

namespace fs = std::filesystem;

namespace {

struct StageFailure {
  std::string stage;
  std::string hint;
};

const std::map<std::string, std::string>& hints() {
  static const std::map<std::string, std::string> h = {
      {"load", "check the data paths and that temporal files use the header id,time,variable,value"},
      {"split", "check split.prob_val and split.prob_test"},
      {"preprocess", "check preprocessing.one_hot names against the static file header"},
      {"problem", "check problem.label_name / problem.treatment against the temporal variables and window < max_seq_len"},
      {"impute", "check that every feature has at least one observed training value"},
      {"select", "lower feature_selection.*.feature_number or use method none"},
      {"train", "check that the train and validation folds are nonempty and labels are 0/1 for classification"},
      {"predict", "the test data must have the training feature layout"},
      {"posthoc", "disable the failing posthoc block or increase the validation fold"},
      {"report", "check that output_dir is writable"},
  };
  return h;
}

std::string fmt(double v) { return format_number(v); }

ModelConfig model_config(const Json& m) {
  ModelConfig c;
  c.model_type = parse_model_type(m["model_name"].get<std::string>());
  c.h_dim = m["h_dim"];
  c.n_layer = m["n_layer"];
  c.batch_size = m["batch_size"];
  c.epoch = m["epoch"];
  c.learning_rate = m["learning_rate"];
  c.ridge = m["ridge"];
  c.static_mode = parse_feature_mode(m["static_mode"].get<std::string>());
  c.time_mode = parse_feature_mode(m["time_mode"].get<std::string>());
  c.seed = m["seed"].get<std::uint64_t>();
  c.model_id = "final";
  c.validate();
  return c;
}

std::vector<Index> all_rows(const Dataset& d) {
  std::vector<Index> r(static_cast<std::size_t>(d.instances()));
  std::iota(r.begin(), r.end(), Index{0});
  return r;
}

/// Fits a chain of components on `train` and applies it to both datasets.
void apply_chain(std::vector<std::unique_ptr<Component>>& chain, Dataset& train, Dataset& test) {
  for (auto& c : chain) {
    train = c->fit_transform(train);
    test = c->transform(test);
  }
}

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write " + tmp.string());
    os << text;
    if (!os) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct Fitted {
  std::shared_ptr<Predictor> model;
  PredictorFactory factory;  // refits the final single-model configuration (uncertainty ensembles)
  std::optional<OptimizationTrace> trace;
  Json summary = Json::object();
};

Fitted fit_model(const Json& cfg, Dataset& train, Dataset& test, const fs::path& out, std::ostream& log,
                 std::string& stage) {
  const auto& a = cfg["automl"];
  const std::string mode = a["mode"];
  const ModelConfig base = model_config(cfg["model"]);
  const BOMetricSpec metric{train.spec->metric, Fold::Val};
  Fitted f;
  f.summary["mode"] = mode;

  SearchOptions o;
  o.num_iter = a["num_iter"];
  o.seed = a["seed"].get<std::uint64_t>();
  o.model_dir = out / "models";
  o.id_prefix = mode;
  fs::create_directories(*o.model_dir);

  std::vector<ModelClass> classes;
  for (const auto& name : a["model_classes"]) {
    ModelConfig c = base;
    c.model_type = parse_model_type(name.get<std::string>());
    classes.push_back(sequence_model_class(c));
  }
  const auto single_factory = [](ModelConfig c) -> PredictorFactory {
    return [c](std::uint64_t seed) {
      ModelConfig k = c;
      k.seed = seed;
      return std::unique_ptr<Predictor>(std::make_unique<SequenceModel>(k));
    };
  };
  const auto incumbent_config = [&](const TraceEntry& e) {
    if (const auto* s = dynamic_cast<const SequenceModel*>(e.model.get())) return s->config();
    return base;
  };

  if (mode == "none") {
    stage = "train";
    if (!train.spec->treatment_names.empty()) {
      TreatmentConfig tc;
      tc.base = base;
      tc.projection_horizon = cfg["model"]["projection_horizon"];
      f.factory = [tc](std::uint64_t seed) {
        TreatmentConfig k = tc;
        k.base.seed = seed;
        return std::unique_ptr<Predictor>(std::make_unique<TreatmentModel>(k));
      };
    } else {
      f.factory = single_factory(base);
    }
    f.model = f.factory(base.seed);
    f.model->fit(train);
    return f;
  }

  if (mode == "hpo" || mode == "sms") {
    stage = "train";
    const ModelClass& mc = classes.front();
    if (mode == "hpo") {
      SearchResult r = optimize_hyperparameters(mc, train, metric, o);
      f.model = r.best().model;
      f.factory = single_factory(incumbent_config(r.best()));
      f.trace = r.trace;
    } else {
      StepwiseResult r = optimize_stepwise(mc, train, metric, o);
      f.model = r.ensemble;
      f.factory = single_factory(incumbent_config(r.search.best()));
      f.trace = r.search.trace;
    }
  } else if (mode == "sash") {
    stage = "train";
    SashResult r = optimize_sash(classes, train, metric, o);
    f.model = r.model;
    f.trace = r.trace;
    const auto& best = r.trace.entries[r.trace.incumbent()];
    f.factory = single_factory(incumbent_config(best));
  } else {
    // Pipeline modes search the imputation / selection stages themselves.
    stage = "impute";
    PipelineMenus menus;
    for (const auto& s : a["menus"]["static_imputation"]) menus.static_imputation.push_back(static_imputation_option(s));
    for (const auto& s : a["menus"]["temporal_imputation"]) {
      menus.temporal_imputation.push_back(temporal_imputation_option(s));
    }
    const int fnum = std::max(1, cfg["feature_selection"]["temporal"]["feature_number"].get<int>());
    for (const auto& s : a["menus"]["feature_selection"]) menus.feature_selection.push_back(feature_selection_option(s, fnum));
    menus.models = classes;
    SearchOptions po = o;
    po.num_iter = a["num_iter_psc"];
    stage = "train";
    std::vector<std::unique_ptr<Component>> components;
    if (mode == "psc") {
      PipelineResult r = optimize_pipeline(menus, train, metric, parse_search_method(a["method"]), po);
      f.model = r.search.best().model;
      f.trace = r.search.trace;
      components = std::move(r.components);
      train = std::move(r.transformed);
      f.factory = single_factory(incumbent_config(r.search.best()));
    } else {
      SearchOptions so = o;
      so.num_iter = a["num_iter_sms"];
      SpscResult r = optimize_spsc(menus, train, metric, po, so);
      f.model = r.model;
      f.trace = r.trace;
      components = std::move(r.components);
      train = std::move(r.transformed);
      const auto& best = r.trace.entries[r.trace.incumbent()];
      f.factory = single_factory(incumbent_config(best));
    }
    Json chosen = Json::array();
    for (auto& c : components) {
      chosen.push_back(c->name());
      test = c->transform(test);
    }
    f.summary["pipeline"] = chosen;
  }
  const auto& e = f.trace->entries[f.trace->incumbent()];
  f.summary["iterations"] = f.trace->entries.size();
  if (e.score) f.summary["incumbent_val_score"] = *e.score;
  f.summary["incumbent_config"] = describe(e.config);
  log << "  automl " << mode << ": " << f.trace->entries.size() << " training runs\n";
  return f;
}

void write_predictions(const fs::path& out, const Dataset& eval, const SequenceArray& pred,
                       const UncertaintyEstimate* u) {
  std::ostringstream p, q;
  p << "id,step,target,label,prediction,lower,upper\n";
  q << "id,step,target,mean,stddev,lower,upper\n";
  for (Index i = 0; i < eval.instances(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto& lab = eval.labels->values[si];
    const auto& valid = eval.labels->valid[si];
    for (Index t = 0; t < lab.rows(); ++t) {
      for (Index l = 0; l < lab.cols(); ++l) {
        if (!valid(t, l)) continue;
        const std::string head = csv_escape(eval.ids[si]) + "," + std::to_string(t) + "," +
                                 csv_escape(eval.label_names[static_cast<std::size_t>(l)]);
        p << head << ',' << fmt(lab(t, l)) << ',' << fmt(pred[si](t, l)) << ',';
        if (u) p << fmt(u->lower[si](t, l)) << ',' << fmt(u->upper[si](t, l));
        else p << ',';
        p << '\n';
        if (u) {
          q << head << ',' << fmt(u->mean[si](t, l)) << ',' << fmt(u->stddev[si](t, l)) << ','
            << fmt(u->lower[si](t, l)) << ',' << fmt(u->upper[si](t, l)) << '\n';
        }
      }
    }
  }
  write_text_file(out / "predictions.csv", p.str());
  if (u) write_text_file(out / "uncertainty.csv", q.str());
}

void write_global_importance(const fs::path& out, const GlobalImportance& g) {
  std::vector<std::size_t> order(g.names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return g.mean[a] > g.mean[b]; });
  std::ostringstream os;
  os << "feature,kind,importance,std_error\n";
  for (auto k : order) {
    os << csv_escape(g.names[k]) << ',' << (g.is_static[k] ? "static" : "temporal") << ',' << fmt(g.mean[k]) << ','
       << fmt(g.std_error[k]) << '\n';
  }
  write_text_file(out / "importance_global.csv", os.str());
}

void write_instance_importance(const fs::path& out, const Dataset& eval, const InstanceImportance& imp) {
  std::ostringstream os;
  os << "id,step,feature,kind,score\n";
  for (std::size_t i = 0; i < imp.ids.size(); ++i) {
    const auto& m = imp.temporal[i];
    for (Index t = 0; t < m.rows(); ++t) {
      for (Index j = 0; j < m.cols(); ++j) {
        os << csv_escape(imp.ids[i]) << ',' << t << ',' << csv_escape(eval.temporal_names[static_cast<std::size_t>(j)])
           << ",temporal," << fmt(m(t, j)) << '\n';
      }
    }
    for (Index j = 0; j < imp.static_scores.cols(); ++j) {
      os << csv_escape(imp.ids[i]) << ",," << csv_escape(eval.static_names[static_cast<std::size_t>(j)]) << ",static,"
         << fmt(imp.static_scores(static_cast<Index>(i), j)) << '\n';
    }
  }
  write_text_file(out / "importance_instancewise.csv", os.str());
}

}  // namespace

int run_pipeline(const Json& cfg, std::ostream& log) {
  const fs::path out = cfg["output_dir"].get<std::string>();
  std::string stage = "report";
  try {
    fs::create_directories(out);
    for (const char* stale : {"metrics.json", "error.json"}) fs::remove(out / stale);
    write_atomic(out / "config.resolved.json", cfg.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: cannot prepare output directory " << out << ": " << e.what() << '\n';
    return kExitRuntime;
  }
  const auto started = std::chrono::steady_clock::now();

  try {
    stage = "load";
    log << "[load]\n";
    const auto& d = cfg["data"];
    Dataset train = load_csv(d["static_train"].get<std::string>(), d["temporal_train"].get<std::string>());
    std::optional<Dataset> test;
    if (d["static_test"].is_string()) {
      test = conform_features(load_csv(d["static_test"].get<std::string>(), d["temporal_test"].get<std::string>()),
                              train.static_names, train.temporal_names);
      test->fold.assign(test->fold.size(), Fold::Test);
    }

    stage = "split";

    log << "[split]\n";
    const auto& sp = cfg["split"];
    train = train_val_test_split(train, sp["prob_val"], sp["prob_test"], sp["seed"].get<std::uint64_t>());
    Dataset held = test ? *test : train;

    stage = "preprocess";

    log << "[preprocess]\n";
    const auto& pb = cfg["problem"];
    std::vector<std::string> targets = pb["label_name"].get<std::vector<std::string>>();
    for (const auto& t : pb["treatment"]) targets.push_back(t);
    std::vector<std::unique_ptr<Component>> prep;
    if (cfg["preprocessing"]["filter_negative"].get<bool>()) prep.push_back(std::make_unique<FilterNegative>());
    const auto one_hot = cfg["preprocessing"]["one_hot"].get<std::vector<std::string>>();
    if (!one_hot.empty()) prep.push_back(std::make_unique<OneHotEncoder>(one_hot));
    prep.push_back(std::make_unique<Normalizer>(parse_normalization(cfg["preprocessing"]["normalization"]), targets));
    apply_chain(prep, train, held);

    stage = "problem";

    log << "[problem]\n";
    ProblemSpec spec;
    spec.problem = parse_problem_kind(pb["problem"]);
    spec.label_names = pb["label_name"].get<std::vector<std::string>>();
    spec.treatment_names = pb["treatment"].get<std::vector<std::string>>();
    spec.max_seq_len = pb["max_seq_len"];
    spec.window = pb["window"];
    spec.task = parse_task(pb["task"]);
    spec.metric = parse_metric(pb["metric_name"]);
    train = make_problem(train, spec);
    held = make_problem(held, spec);

    const std::string mode = cfg["automl"]["mode"];
    if (mode != "psc" && mode != "spsc") {
      stage = "impute";
      log << "[impute]\n";
      std::vector<std::unique_ptr<Component>> imp;
      imp.push_back(std::make_unique<StaticImputer>(parse_static_imputation(cfg["imputation"]["static"])));
      imp.push_back(std::make_unique<TemporalImputer>(parse_temporal_imputation(cfg["imputation"]["temporal"])));
      apply_chain(imp, train, held);

      stage = "select";

      log << "[select]\n";
      std::vector<std::unique_ptr<Component>> sel;
      for (const char* kind : {"static", "temporal"}) {
        const auto& f = cfg["feature_selection"][kind];
        const auto m = parse_selection_method(f["method"]);
        if (m == SelectionMethod::None) continue;
        sel.push_back(std::make_unique<FeatureSelector>(m, parse_feature_kind(kind), f["feature_number"].get<int>(),
                                                        default_selection_proxy(), cfg["model"]["seed"].get<std::uint64_t>()));
      }
      apply_chain(sel, train, held);
    }

    log << "[train]\n";
    Fitted fitted = fit_model(cfg, train, held, out, log, stage);

    stage = "predict";

    log << "[predict]\n";
    std::string evaluated_on = "test";
    Dataset eval;
    if (test) {
      eval = held;
    } else {
      eval = slice_fold(held, Fold::Test);
      if (eval.instances() == 0) {
        eval = slice_fold(held, Fold::Val);
        evaluated_on = "val";
      }
    }
    if (eval.instances() == 0) throw DataError("no test or validation instances to evaluate on");
    SequenceArray pred = fitted.model->predict(eval);

    stage = "posthoc";

    log << "[posthoc]\n";
    const auto& ph = cfg["posthoc"];
    Json posthoc = Json::object();
    if (ph["calibration"].get<bool>() && spec.task == Task::Classification) {
      const auto val = train.rows_in(Fold::Val);
      if (val.empty()) throw DataError("calibration needs a nonempty validation fold");
      PlattCalibrator cal;
      cal.fit(*train.labels, fitted.model->predict(train), val);
      pred = cal.apply(pred);
      posthoc["calibration"] = {{"slope", cal.slope()}, {"intercept", cal.intercept()}};
    }
    std::optional<UncertaintyEstimate> unc;
    if (ph["uncertainty"]["enabled"].get<bool>()) {
      UncertaintyOptions uo;
      uo.members = ph["uncertainty"]["members"];
      uo.level = ph["uncertainty"]["level"];
      uo.seed = cfg["model"]["seed"].get<std::uint64_t>();
      EnsembleUncertainty ens(fitted.factory, uo);
      ens.fit(train);
      unc = ens.estimate(eval);
      posthoc["uncertainty"] = {{"members", uo.members}, {"level", uo.level}};
    }
    for (const auto& m : ph["interpretation"]) {
      if (m == "global") {
        write_global_importance(out, interpret_global(*fitted.model, eval, all_rows(eval), ph["permutation_repeats"],
                                                      cfg["model"]["seed"].get<std::uint64_t>()));
      } else {
        write_instance_importance(out, eval, interpret_instancewise(*fitted.model, eval, all_rows(eval)));
      }
    }

    stage = "report";

    log << "[report]\n";
    write_predictions(out, eval, pred, unc ? &*unc : nullptr);
    if (fitted.trace) write_text_file(out / "trace.csv", fitted.trace->to_csv());
    try {
      fitted.model->save(out / "models" / "final.model");
    } catch (const ContractError&) {
      // Model types without persistence are reported but not saved.
    }
    std::vector<MetricName> metrics;
    for (const auto& m : ph["metrics"]) metrics.push_back(parse_metric(m));
    if (std::find(metrics.begin(), metrics.end(), spec.metric) == metrics.end()) metrics.insert(metrics.begin(), spec.metric);
    const MetricReport report = evaluate(*eval.labels, pred, metrics, spec.problem, spec.label_names);
    Json doc = Json::parse(report.to_text());
    doc["evaluated_on"] = evaluated_on;
    doc["instances"] = eval.instances();
    doc["model"] = fitted.model->name();
    doc["automl"] = fitted.summary;
    if (!posthoc.empty()) doc["posthoc"] = posthoc;
    write_atomic(out / "metrics.json", doc.dump(2) + "\n");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_atomic(out / "timing.json", Json{{"seconds", seconds}}.dump(2) + "\n");
    log << "done in " << std::fixed << std::setprecision(1) << seconds << " s; metrics in " << (out / "metrics.json")
        << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    int code = kExitRuntime;
    if (dynamic_cast<const LoadError*>(&e) || dynamic_cast<const DataError*>(&e)) code = kExitData;
    else if (dynamic_cast<const ParameterError*>(&e)) code = kExitConfig;
    const auto h = hints().find(stage);
    Json err = {{"stage", stage},
                {"message", e.what()},
                {"hint", h == hints().end() ? "" : h->second},
                {"exit_code", code}};
    fs::remove(out / "metrics.json");
    write_atomic(out / "error.json", err.dump(2) + "\n");
    std::cerr << "error in stage '" << stage << "': " << e.what() << "\n  hint: " << err["hint"].get<std::string>()
              << '\n';
    return code;
  }
}

int print_report(const fs::path& dir, int top_k, std::ostream& out, std::ostream& err) {
  const std::vector<std::string> required = {"metrics.json", "predictions.csv", "config.resolved.json"};
  std::vector<std::string> missing;
  for (const auto& f : required) {
    if (!fs::exists(dir / f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    err << "error: " << dir << " is not a finished run; missing:";
    for (const auto& m : missing) err << ' ' << m;
    err << "\n  expected files:";
    for (const auto& m : required) err << ' ' << m;
    err << '\n';
    if (fs::exists(dir / "error.json")) err << "  the run failed; see " << (dir / "error.json") << '\n';
    return kExitData;
  }
  const Json metrics = Json::parse(read_text_file(dir / "metrics.json"));
  out << "Run " << dir.string() << " (model " << metrics.value("model", "?") << ", evaluated on "
      << metrics.value("evaluated_on", "?") << ", " << metrics.value("instances", 0) << " instances)\n\nMetrics\n";
  for (const auto& [k, v] : metrics["metrics"].items()) {
    out << "  " << std::left << std::setw(8) << k << ' ' << std::fixed << std::setprecision(4) << v.get<double>()
        << '\n';
  }
  if (metrics.contains("absent")) {
    for (const auto& [k, v] : metrics["absent"].items()) out << "  " << std::setw(8) << k << " n/a (" << v.get<std::string>() << ")\n";
  }

  const auto rows = parse_csv(read_text_file(dir / "predictions.csv"));
  out << "\nPredictions (first " << std::min<std::size_t>(10, rows.size() > 0 ? rows.size() - 1 : 0) << " of "
      << (rows.empty() ? 0 : rows.size() - 1) << ")\n";
  for (std::size_t r = 0; r < rows.size() && r <= 10; ++r) {
    out << "  ";
    for (std::size_t c = 0; c < rows[r].fields.size(); ++c) out << (c ? "  " : "") << rows[r].fields[c];
    out << '\n';
  }

  if (fs::exists(dir / "importance_global.csv")) {
    const auto imp = parse_csv(read_text_file(dir / "importance_global.csv"));
    out << "\nTop " << top_k << " features by permutation importance\n";
    for (std::size_t r = 1; r < imp.size() && static_cast<int>(r) <= top_k; ++r) {
      out << "  " << r << ". " << imp[r].fields[0] << " (" << imp[r].fields[1] << ") " << imp[r].fields[2] << '\n';
    }
  }
  return kExitOk;
}

}  // namespace tspipe::cli
