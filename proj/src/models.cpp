#include "tspipe/models.hpp"

#include "tspipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace tspipe {

FeatureMode parse_feature_mode(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "concatenate") return FeatureMode::Concatenate;
  if (l == "none" || l.empty()) return FeatureMode::None;
  throw ParameterError("unknown feature mode '" + s + "' (expected concatenate or none)");
}

std::string to_string(FeatureMode m) { return m == FeatureMode::Concatenate ? "concatenate" : "none"; }

CellType parse_model_type(const std::string& s) {
  if (s == "linear") return CellType::Linear;
  if (s == "rnn") return CellType::Rnn;
  if (s == "gru") return CellType::Gru;
  if (s == "lstm" || s == "attention" || s == "tcn" || s == "transformer") {
    throw ParameterError("model '" + s +
                         "' is not built-in; supply it via an extension wrapper implementing the Predictor contract");
  }
  throw ParameterError("unknown model type '" + s + "' (expected linear, rnn or gru)");
}

std::string to_string(CellType c) {
  switch (c) {
    case CellType::Linear: return "linear";
    case CellType::Rnn: return "rnn";
    case CellType::Gru: return "gru";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (h_dim < 1 || n_layer < 1 || batch_size < 1 || epoch < 1) {
    throw ParameterError("h_dim, n_layer, batch_size and epoch must all be >= 1");
  }
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (ridge < 0.0) throw ParameterError("ridge must be nonnegative");
}

InputLayout layout_for(const Dataset& dataset, FeatureMode static_mode, FeatureMode time_mode, bool with_actions) {
  InputLayout l;
  l.temporal = dataset.temporal.features();
  l.static_features = static_mode == FeatureMode::Concatenate ? dataset.static_features.values.cols() : 0;
  l.time_delta = time_mode == FeatureMode::Concatenate;
  if (with_actions) {
    if (!dataset.actions) throw DataError("dataset has no action tensor; set treatment names in the problem spec");
    l.actions = static_cast<Index>(dataset.actions->names.size());
  }
  return l;
}

std::vector<Matrix> build_inputs(const Dataset& dataset, const std::vector<Index>& rows, const InputLayout& layout) {
  const auto& tt = dataset.temporal;
  if (tt.features() != layout.temporal) {
    throw DataError("model expects " + std::to_string(layout.temporal) + " temporal features, dataset has " +
                    std::to_string(tt.features()));
  }
  if (layout.static_features > 0 && dataset.static_features.values.cols() != layout.static_features) {
    throw DataError("model expects " + std::to_string(layout.static_features) + " static features, dataset has " +
                    std::to_string(dataset.static_features.values.cols()));
  }
  if (layout.actions > 0 && (!dataset.actions || static_cast<Index>(dataset.actions->names.size()) != layout.actions)) {
    throw DataError("model expects " + std::to_string(layout.actions) + " action channels");
  }
  const Index steps = tt.steps();
  const auto b = static_cast<Index>(rows.size());
  std::vector<Matrix> inputs(static_cast<std::size_t>(steps), Matrix::Zero(b, layout.width()));
  for (Index k = 0; k < b; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    const auto si = static_cast<std::size_t>(i);
    const Index len = tt.seq_len(i);
    if (layout.static_features > 0 && !dataset.static_features.observed.row(i).all()) {
      throw DataError("instance " + dataset.ids[si] + " has missing static values; impute before modelling");
    }
    for (Index t = 0; t < len; ++t) {
      if (!tt.observed[si].row(t).all()) {
        throw DataError("instance " + dataset.ids[si] + " has missing temporal values; impute before modelling");
      }
      auto row = inputs[static_cast<std::size_t>(t)].row(k);
      Index c = 0;
      row.segment(c, layout.temporal) = tt.values[si].row(t);
      c += layout.temporal;
      if (layout.actions > 0) {
        row.segment(c, layout.actions) = dataset.actions->values[si].row(t);
        c += layout.actions;
      }
      if (layout.static_features > 0) {
        row.segment(c, layout.static_features) = dataset.static_features.values.row(i);
        c += layout.static_features;
      }
      if (layout.time_delta) row(c) = t == 0 ? 0.0 : tt.time(i, t) - tt.time(i, t - 1);
    }
  }
  return inputs;
}

SequenceBatch<double> build_batch(const Dataset& dataset, const std::vector<Index>& rows, const InputLayout& layout) {
  if (!dataset.spec || !dataset.labels) throw ContractError("dataset has no problem attached; run make_problem first");
  SequenceBatch<double> batch;
  batch.inputs = build_inputs(dataset, rows, layout);
  const Index steps = dataset.temporal.steps();
  const auto b = static_cast<Index>(rows.size());
  const auto l = static_cast<Index>(dataset.label_names.size());
  batch.targets.assign(static_cast<std::size_t>(steps), Matrix::Zero(b, l));
  batch.weights.assign(static_cast<std::size_t>(steps), Matrix::Zero(b, l));
  const bool online = dataset.spec->problem == ProblemKind::Online;
  for (Index k = 0; k < b; ++k) {
    const auto si = static_cast<std::size_t>(rows[static_cast<std::size_t>(k)]);
    const auto& y = dataset.labels->values[si];
    const auto& ok = dataset.labels->valid[si];
    if (online) {
      for (Index t = 0; t < std::min(steps, y.rows()); ++t) {
        for (Index c = 0; c < l; ++c) {
          if (ok(t, c)) {
            batch.targets[static_cast<std::size_t>(t)](k, c) = y(t, c);
            batch.weights[static_cast<std::size_t>(t)](k, c) = 1.0;
          }
        }
      }
    } else {
      const Index last = dataset.temporal.seq_len(static_cast<Index>(si)) - 1;
      if (last < 0) continue;
      for (Index c = 0; c < l; ++c) {
        if (ok(0, c)) {
          batch.targets[static_cast<std::size_t>(last)](k, c) = y(0, c);
          batch.weights[static_cast<std::size_t>(last)](k, c) = 1.0;
        }
      }
    }
  }
  return batch;
}

SequenceBatch<double> select_rows(const SequenceBatch<double>& batch, const std::vector<Index>& rows) {
  SequenceBatch<double> out;
  const auto pick = [&rows](const std::vector<Matrix>& src, std::vector<Matrix>& dst) {
    dst.reserve(src.size());
    for (const auto& m : src) dst.emplace_back(m(rows, Eigen::all));
  };
  pick(batch.inputs, out.inputs);
  pick(batch.targets, out.targets);
  pick(batch.weights, out.weights);
  pick(batch.initial, out.initial);
  return out;
}

namespace {

/// Validation score of logits against a batch, in maximize orientation.
std::optional<double> batch_score(const std::vector<Matrix>& logits, const SequenceBatch<double>& batch, Task task,
                                  MetricName metric) {
  std::vector<double> s, y;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    for (Index r = 0; r < logits[t].rows(); ++r) {
      for (Index c = 0; c < logits[t].cols(); ++c) {
        if (batch.weights[t](r, c) > 0.0) {
          const double o = logits[t](r, c);
          s.push_back(task == Task::Classification ? 1.0 / (1.0 + std::exp(-o)) : o);
          y.push_back(batch.targets[t](r, c));
        }
      }
    }
  }
  const auto v = compute_metric(metric, s, y);
  if (!v) return std::nullopt;
  return maximize(metric) ? *v : -*v;
}

}  // namespace

std::vector<EpochRecord> train_network(RecurrentNet& net, const SequenceBatch<double>& train,
                                       const SequenceBatch<double>* val, Task task, MetricName metric,
                                       const TrainOptions& options, int* best_epoch) {
  const Index n = train.rows();
  if (n == 0) throw DataError("training fold is empty");
  if (task_of(metric) != task) metric = task == Task::Classification ? MetricName::Auc : MetricName::Mse;
  AdamOptimizer<double> adam(net.parameters(), options.learning_rate);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<EpochRecord> history;
  auto best_params = net.parameters();
  double best_score = -INFINITY;
  bool best_by_metric = false;
  int best = -1;
  const bool has_val = val != nullptr && val->rows() > 0;
  for (int e = 0; e < options.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (Index start = 0; start < n; start += options.batch_size) {
      const Index end = std::min<Index>(n, start + options.batch_size);
      const std::vector<Index> idx(order.begin() + start, order.begin() + end);
      const auto mb = select_rows(train, idx);
      auto grads = net.zeros_like();
      loss_sum += masked_loss<double>(net, mb, task, options.ridge, &grads);
      ++batches;
      adam.step(net.parameters(), grads);
    }
    EpochRecord rec;
    rec.train_loss = loss_sum / std::max(1, batches);
    if (has_val) {
      rec.val_loss = masked_loss<double>(net, *val, task, options.ridge, nullptr);
      const auto tr = net.forward(val->inputs, val->initial.empty() ? nullptr : &val->initial);
      const auto score = batch_score(tr.logits, *val, task, metric);
      // A defined metric always outranks the loss fallback.
      const bool by_metric = score.has_value();
      const double value = by_metric ? *score : -rec.val_loss;
      rec.val_score = value;
      const bool better = (by_metric && !best_by_metric) || (by_metric == best_by_metric && value > best_score);
      if (best < 0 || better) {
        best = e;
        best_score = value;
        best_by_metric = by_metric;
        best_params = net.parameters();
      }
    } else {
      best = e;
      best_params = net.parameters();
    }
    history.push_back(rec);
  }
  net.parameters() = best_params;
  if (best_epoch) *best_epoch = best;
  return history;
}

// ---------------------------------------------------------------------------

SequenceModel::SequenceModel(ModelConfig config) : config_(std::move(config)) { config_.validate(); }

void SequenceModel::fit(const Dataset& dataset) {
  if (!dataset.spec || !dataset.labels) throw ContractError("fit: dataset has no problem attached");
  const auto train_rows = dataset.fit_rows();
  if (train_rows.empty()) throw DataError("fit: training fold is empty");
  const auto val_rows = dataset.rows_in(Fold::Val);
  task_ = dataset.spec->task;
  problem_ = dataset.spec->problem;
  layout_ = layout_for(dataset, config_.static_mode, config_.time_mode);
  net_ = RecurrentNet(config_.model_type, layout_.width(), config_.h_dim, config_.n_layer,
                      static_cast<Index>(dataset.label_names.size()), config_.seed);
  const auto train = build_batch(dataset, train_rows, layout_);
  SequenceBatch<double> val;
  if (!val_rows.empty()) val = build_batch(dataset, val_rows, layout_);
  TrainOptions opt;
  opt.epochs = config_.epoch;
  opt.batch_size = config_.batch_size;
  opt.learning_rate = config_.learning_rate;
  opt.ridge = config_.model_type == CellType::Linear ? config_.ridge : 0.0;
  opt.seed = config_.seed;
  history_ = train_network(net_, train, val_rows.empty() ? nullptr : &val, task_, dataset.spec->metric, opt,
                           &best_epoch_);
  fitted_ = true;
}

SequenceArray assemble_predictions(const Dataset& dataset, const std::vector<Index>& rows,
                                   const std::vector<Matrix>& logits, Task task) {
  const Index steps = dataset.temporal.steps();
  const Index l = logits.empty() ? static_cast<Index>(dataset.label_names.size()) : logits.front().cols();
  const bool online = !dataset.spec || dataset.spec->problem == ProblemKind::Online;
  SequenceArray out;
  out.reserve(rows.size());
  const auto activate = [task](double o) { return task == Task::Classification ? 1.0 / (1.0 + std::exp(-o)) : o; };
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index len = dataset.temporal.seq_len(rows[k]);
    if (online) {
      Matrix p = Matrix::Zero(steps, l);
      for (Index t = 0; t < len; ++t) {
        for (Index c = 0; c < l; ++c) p(t, c) = activate(logits[static_cast<std::size_t>(t)](static_cast<Index>(k), c));
      }
      out.push_back(std::move(p));
    } else {
      Matrix p = Matrix::Zero(1, l);
      if (len > 0) {
        for (Index c = 0; c < l; ++c) {
          p(0, c) = activate(logits[static_cast<std::size_t>(len - 1)](static_cast<Index>(k), c));
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

SequenceArray SequenceModel::predict(const Dataset& dataset) const {
  if (!fitted_) throw ContractError(config_.model_id + ": predict called before fit");
  std::vector<Index> rows(static_cast<std::size_t>(dataset.instances()));
  std::iota(rows.begin(), rows.end(), Index{0});
  const auto inputs = build_inputs(dataset, rows, layout_);
  if (!inputs.empty() && inputs.front().cols() != net_.input_dim()) {
    throw DataError("input width " + std::to_string(inputs.front().cols()) + " differs from trained width " +
                    std::to_string(net_.input_dim()));
  }
  const auto tr = net_.forward(inputs);
  return assemble_predictions(dataset, rows, tr.logits, task_);
}

double SequenceModel::loss(const Dataset& dataset, const std::vector<Index>& rows) const {
  const auto batch = build_batch(dataset, rows, layout_);
  return masked_loss<double>(net_, batch, task_, config_.model_type == CellType::Linear ? config_.ridge : 0.0,
                             nullptr);
}

HyperparameterSpace SequenceModel::hyperparameter_space() const {
  return get_hyperparameter_space(config_.model_type);
}

std::unique_ptr<Predictor> SequenceModel::clone_unfitted(const std::string& model_id) const {
  return std::make_unique<SequenceModel>(tspipe::clone_unfitted(config_, model_id));
}

HyperparameterSpace get_hyperparameter_space(CellType model_type) {
  HyperparameterSpace s;
  if (model_type == CellType::Linear) {
    s.dimensions.push_back(Dimension::continuous("ridge", 1e-5, 1.0, true));
    s.dimensions.push_back(Dimension::continuous("learning_rate", 1e-4, 1e-2, true));
  } else {
    s.dimensions.push_back(Dimension::discrete("h_dim", {16, 32, 64, 100, 128}));
    s.dimensions.push_back(Dimension::discrete("n_layer", {1, 2, 3}));
    s.dimensions.push_back(Dimension::continuous("learning_rate", 1e-4, 1e-2, true));
    s.dimensions.push_back(Dimension::discrete("batch_size", {32, 64, 128}));
  }
  return s;
}

ModelConfig clone_unfitted(const ModelConfig& config, const std::string& model_id) {
  ModelConfig c = config;
  c.model_id = model_id;
  return c;
}

ModelConfig apply_configuration(ModelConfig base, const Configuration& c) {
  if (c.count("h_dim")) base.h_dim = static_cast<int>(std::lround(number(c, "h_dim")));
  if (c.count("n_layer")) base.n_layer = static_cast<int>(std::lround(number(c, "n_layer")));
  if (c.count("batch_size")) base.batch_size = static_cast<int>(std::lround(number(c, "batch_size")));
  if (c.count("epoch")) base.epoch = static_cast<int>(std::lround(number(c, "epoch")));
  if (c.count("learning_rate")) base.learning_rate = number(c, "learning_rate");
  if (c.count("ridge")) base.ridge = number(c, "ridge");
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// Persistence: text file of named arrays with hexadecimal floats (exact).

void write_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "array " << name << ' ' << m.rows() << ' ' << m.cols() << '\n' << std::hexfloat;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
    os << '\n';
  }
  os << std::defaultfloat;
}

Matrix read_matrix(std::istream& is, const std::string& expected_name) {
  std::string tag, name;
  Index rows = 0, cols = 0;
  if (!(is >> tag >> name >> rows >> cols) || tag != "array" || name != expected_name || rows < 0 || cols < 0) {
    throw LoadError("expected array '" + expected_name + "'");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      std::string tok;
      if (!(is >> tok)) throw LoadError("truncated array '" + expected_name + "'");
      char* end = nullptr;
      m(r, c) = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw LoadError("bad number in array '" + expected_name + "'");
    }
  }
  return m;
}

void write_config(std::ostream& os, const ModelConfig& c) {
  os << "model_type " << to_string(c.model_type) << '\n'
     << "model_id " << c.model_id << '\n'
     << "h_dim " << c.h_dim << '\n'
     << "n_layer " << c.n_layer << '\n'
     << "batch_size " << c.batch_size << '\n'
     << "epoch " << c.epoch << '\n'
     << "learning_rate " << std::hexfloat << c.learning_rate << '\n'
     << "ridge " << c.ridge << std::defaultfloat << '\n'
     << "static_mode " << to_string(c.static_mode) << '\n'
     << "time_mode " << to_string(c.time_mode) << '\n'
     << "seed " << c.seed << '\n';
}

ModelConfig read_config(std::istream& in) {
  ModelConfig c;
  c.model_type = parse_model_type(read_field<std::string>(in, "model_type"));
  c.model_id = read_field<std::string>(in, "model_id");
  c.h_dim = read_field<int>(in, "h_dim");
  c.n_layer = read_field<int>(in, "n_layer");
  c.batch_size = read_field<int>(in, "batch_size");
  c.epoch = read_field<int>(in, "epoch");
  c.learning_rate = read_field<double>(in, "learning_rate");
  c.ridge = read_field<double>(in, "ridge");
  c.static_mode = parse_feature_mode(read_field<std::string>(in, "static_mode"));
  c.time_mode = parse_feature_mode(read_field<std::string>(in, "time_mode"));
  c.seed = read_field<std::uint64_t>(in, "seed");
  return c;
}

void write_layout(std::ostream& os, const InputLayout& l) {
  os << "layout " << l.temporal << ' ' << l.static_features << ' ' << (l.time_delta ? 1 : 0) << ' ' << l.actions
     << '\n';
}

InputLayout read_layout(std::istream& in) {
  InputLayout l;
  std::string key;
  int td = 0;
  if (!(in >> key >> l.temporal >> l.static_features >> td >> l.actions) || key != "layout") {
    throw LoadError("expected field 'layout'");
  }
  l.time_delta = td != 0;
  return l;
}

void write_network(std::ostream& os, const std::string& tag, const RecurrentNet& net) {
  os << tag << ' ' << to_string(net.cell()) << ' ' << net.input_dim() << ' ' << net.hidden() << ' ' << net.layers()
     << ' ' << net.outputs() << '\n';
  const auto names = net.parameter_names();
  for (std::size_t k = 0; k < names.size(); ++k) write_matrix(os, tag + "." + names[k], net.parameters()[k]);
}

RecurrentNet read_network(std::istream& in, const std::string& tag) {
  std::string key, cell_name;
  Index in_dim = 0, hidden = 0, layers = 0, outputs = 0;
  if (!(in >> key >> cell_name >> in_dim >> hidden >> layers >> outputs) || key != tag) {
    throw LoadError("expected network '" + tag + "'");
  }
  const CellType cell = parse_model_type(cell_name);
  RecurrentNet net(cell, in_dim, cell == CellType::Linear ? 1 : hidden, std::max<Index>(1, layers), outputs, 0);
  const auto names = net.parameter_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    Matrix m = read_matrix(in, tag + "." + names[k]);
    if (m.rows() != net.parameters()[k].rows() || m.cols() != net.parameters()[k].cols()) {
      throw LoadError("array '" + tag + "." + names[k] + "' has the wrong shape");
    }
    net.parameters()[k] = std::move(m);
  }
  return net;
}

void write_model_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename keeps readers from observing half-written files.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write model file " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void expect_end(std::istream& in) {
  std::string key;
  if (!(in >> key) || key != "end") throw LoadError("missing end marker (truncated file?)");
}

void SequenceModel::save(const std::filesystem::path& path) const {
  if (!fitted_) throw ContractError(config_.model_id + ": save called before fit");
  std::ostringstream os;
  write_model_header(os, "sequence");
  write_config(os, config_);
  os << "task " << to_string(task_) << '\n' << "problem " << to_string(problem_) << '\n';
  write_layout(os, layout_);
  write_network(os, "net", net_);
  os << "end\n";
  write_model_file(path, os.str());
}

std::unique_ptr<SequenceModel> SequenceModel::read(std::istream& in) {
  auto model = std::make_unique<SequenceModel>(read_config(in));
  model->task_ = parse_task(read_field<std::string>(in, "task"));
  model->problem_ = parse_problem_kind(read_field<std::string>(in, "problem"));
  model->layout_ = read_layout(in);
  model->net_ = read_network(in, "net");
  expect_end(in);
  model->fitted_ = true;
  return model;
}

}  // namespace tspipe
