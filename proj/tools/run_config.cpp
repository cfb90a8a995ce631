#include "run_config.hpp"

#include "tspipe/automl.hpp"
#include "tspipe/csv_io.hpp"
#include "tspipe/dataset.hpp"
#include "tspipe/errors.hpp"
#include "tspipe/feature_selection.hpp"
#include "tspipe/imputation.hpp"
#include "tspipe/models.hpp"
#include "tspipe/preprocessing.hpp"

#include <set>

namespace tspipe::cli {

Json default_config() {
  return Json::parse(R"({
    "data": {
      "static_train": "data/tutorial_static_train_data.csv.gz",
      "temporal_train": "data/tutorial_temporal_train_data_eav.csv.gz",
      "static_test": "data/tutorial_static_test_data.csv.gz",
      "temporal_test": "data/tutorial_temporal_test_data_eav.csv.gz"
    },
    "split": {"prob_val": 0.2, "prob_test": 0.0, "seed": 0},
    "preprocessing": {"filter_negative": true, "one_hot": ["admission_type"], "normalization": "minmax"},
    "problem": {
      "problem": "online", "max_seq_len": 24, "label_name": ["ventilator"], "treatment": [],
      "window": 4, "task": "classification", "metric_name": "auc"
    },
    "imputation": {"static": "median", "temporal": "median"},
    "feature_selection": {
      "static": {"method": "none", "feature_number": 0},
      "temporal": {"method": "none", "feature_number": 0}
    },
    "model": {
      "model_name": "gru", "h_dim": 100, "n_layer": 2, "batch_size": 128, "epoch": 20,
      "learning_rate": 0.001, "ridge": 0.0001, "static_mode": "concatenate", "time_mode": "concatenate",
      "seed": 0, "projection_horizon": 5
    },
    "posthoc": {
      "metrics": ["auc", "apr"],
      "uncertainty": {"enabled": false, "members": 5, "level": 0.95},
      "calibration": false,
      "interpretation": [],
      "permutation_repeats": 5
    },
    "automl": {
      "mode": "none", "method": "gp", "num_iter": 20, "num_iter_psc": 10, "num_iter_sms": 10,
      "model_classes": ["gru"], "seed": 0,
      "menus": {
        "static_imputation": ["mean", "median"],
        "temporal_imputation": ["mean", "median", "locf", "linear"],
        "feature_selection": ["none"]
      }
    },
    "output_dir": "run"
  })");
}

namespace {

bool same_kind(const Json& def, const Json& v) {
  if (def.is_null() || def.is_string()) return v.is_null() || v.is_string();
  if (def.is_number()) return v.is_number();
  if (def.is_array()) return v.is_array();
  return def.type() == v.type();
}

void merge(Json& target, const Json& values, const std::string& where) {
  if (!values.is_object()) throw ConfigError("configuration " + (where.empty() ? "root" : "'" + where + "'") + " must be an object");
  for (const auto& [key, v] : values.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!target.contains(key)) throw ConfigError("unknown configuration key '" + path + "'");
    Json& slot = target[key];
    if (slot.is_object()) {
      merge(slot, v, path);
    } else if (!same_kind(slot, v)) {
      throw ConfigError("configuration key '" + path + "' expects " + std::string(slot.type_name()) + ", got " +
                        std::string(v.type_name()));
    } else {
      slot = v;
    }
  }
}

template <typename F>
void check(const std::string& what, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

Json resolve_config(const Json& file_values, const std::vector<std::string>& overrides) {
  Json config = default_config();
  merge(config, file_values, "");
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not of the form path=value");
    const std::string path = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json nested = value;
    std::string rest = path;
    std::vector<std::string> parts;
    for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
      parts.push_back(rest.substr(0, dot));
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) nested = Json{{*it, nested}};
    merge(config, nested, "");
  }
  return config;
}

void validate_config(const Json& c) {
  const auto& split = c["split"];
  const double pv = split["prob_val"], pt = split["prob_test"];
  if (pv < 0 || pt < 0 || pv + pt > 1.0) {
    throw ConfigError("split: prob_val + prob_test must lie in [0, 1] (got " + std::to_string(pv) + " + " +
                      std::to_string(pt) + ")");
  }
  if (split["seed"].get<double>() < 0) throw ConfigError("split.seed must be nonnegative");

  check("preprocessing.normalization",
        [&] { parse_normalization(c["preprocessing"]["normalization"].get<std::string>()); });

  const auto& p = c["problem"];
  check("problem", [&] {
    ProblemSpec spec;
    spec.problem = parse_problem_kind(p["problem"].get<std::string>());
    spec.label_names = p["label_name"].get<std::vector<std::string>>();
    spec.treatment_names = p["treatment"].get<std::vector<std::string>>();
    spec.max_seq_len = p["max_seq_len"].get<int>();
    spec.window = p["window"].get<int>();
    spec.task = parse_task(p["task"].get<std::string>());
    spec.metric = parse_metric(p["metric_name"].get<std::string>());
    spec.validate();
    for (const auto& m : c["posthoc"]["metrics"]) {
      if (task_of(parse_metric(m.get<std::string>())) != spec.task) {
        throw ParameterError("reporting metric '" + m.get<std::string>() + "' does not fit the " +
                             to_string(spec.task) + " task");
      }
    }
  });

  check("imputation", [&] {
    parse_static_imputation(c["imputation"]["static"].get<std::string>());
    parse_temporal_imputation(c["imputation"]["temporal"].get<std::string>());
  });
  check("feature_selection", [&] {
    for (const char* kind : {"static", "temporal"}) {
      const auto& f = c["feature_selection"][kind];
      const auto m = parse_selection_method(f["method"].get<std::string>());
      if (m != SelectionMethod::None && f["feature_number"].get<int>() < 1) {
        throw ParameterError(std::string(kind) + ".feature_number must be at least 1");
      }
    }
  });
  check("model", [&] {
    const auto& m = c["model"];
    ModelConfig mc;
    mc.model_type = parse_model_type(m["model_name"].get<std::string>());
    mc.h_dim = m["h_dim"].get<int>();
    mc.n_layer = m["n_layer"].get<int>();
    mc.batch_size = m["batch_size"].get<int>();
    mc.epoch = m["epoch"].get<int>();
    mc.learning_rate = m["learning_rate"].get<double>();
    mc.ridge = m["ridge"].get<double>();
    mc.static_mode = parse_feature_mode(m["static_mode"].get<std::string>());
    mc.time_mode = parse_feature_mode(m["time_mode"].get<std::string>());
    mc.validate();
    if (m["projection_horizon"].get<int>() < 1) throw ParameterError("projection_horizon must be at least 1");
  });
  check("posthoc", [&] {
    const auto& u = c["posthoc"]["uncertainty"];
    if (u["members"].get<int>() < 2) throw ParameterError("uncertainty.members must be at least 2");
    const double level = u["level"];
    if (!(level > 0 && level < 1)) throw ParameterError("uncertainty.level must lie in (0, 1)");
    for (const auto& m : c["posthoc"]["interpretation"]) {
      const auto s = m.get<std::string>();
      if (s != "global" && s != "instancewise") {
        throw ParameterError("unknown interpretation method '" + s + "' (expected global or instancewise)");
      }
    }
    if (c["posthoc"]["permutation_repeats"].get<int>() < 1) throw ParameterError("permutation_repeats must be positive");
  });
  check("automl", [&] {
    const auto& a = c["automl"];
    static const std::set<std::string> modes = {"none", "hpo", "sms", "psc", "sash", "spsc"};
    const auto mode = a["mode"].get<std::string>();
    if (!modes.count(mode)) {
      throw ParameterError("unknown mode '" + mode + "' (expected none, hpo, sms, psc, sash or spsc)");
    }
    parse_search_method(a["method"].get<std::string>());
    for (const char* k : {"num_iter", "num_iter_psc", "num_iter_sms"}) {
      if (a[k].get<int>() < 1) throw ParameterError(std::string(k) + " must be at least 1");
    }
    if (a["model_classes"].empty()) throw ParameterError("model_classes is empty");
    for (const auto& m : a["model_classes"]) parse_model_type(m.get<std::string>());
    for (const auto& s : a["menus"]["static_imputation"]) parse_static_imputation(s.get<std::string>());
    for (const auto& s : a["menus"]["temporal_imputation"]) parse_temporal_imputation(s.get<std::string>());
    for (const auto& s : a["menus"]["feature_selection"]) parse_selection_method(s.get<std::string>());
    for (const char* k : {"static_imputation", "temporal_imputation", "feature_selection"}) {
      if (a["menus"][k].empty()) throw ParameterError(std::string("menu ") + k + " is empty");
    }
    const bool online = c["problem"]["problem"] == "online";
    if (!online && (mode == "sms" || mode == "spsc")) {
      throw ParameterError("mode " + mode + " needs an online problem");
    }
    if (!c["problem"]["treatment"].empty() && mode != "none") {
      throw ParameterError("automl modes apply to the predictions pathway; use mode none with treatments");
    }
  });
  if (!c["output_dir"].is_string() || c["output_dir"].get<std::string>().empty()) {
    throw ConfigError("output_dir must be a nonempty path");
  }
  for (const char* k : {"static_train", "temporal_train"}) {
    if (!c["data"][k].is_string()) throw ConfigError(std::string("data.") + k + " is required");
  }
  if (c["data"]["static_test"].is_string() != c["data"]["temporal_test"].is_string()) {
    throw ConfigError("data.static_test and data.temporal_test must be given together");
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read configuration: ") + e.what());
  }
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("configuration file " + path.string() + " is not valid JSON");
  return j;
}

}  // namespace tspipe::cli
