#include "tspipe/pathways.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tspipe {

namespace {

double activate(Task task, double o) { return task == Task::Classification ? 1.0 / (1.0 + std::exp(-o)) : o; }

/// The queried window ends at the last step with a valid label (the last
/// step of the sequence when there are no labels).
Index cutoff_of(const Dataset& dataset, Index row, int horizon) {
  Index end = dataset.temporal.seq_len(row);
  if (dataset.labels) {
    const auto& ok = dataset.labels->valid[static_cast<std::size_t>(row)];
    Index last = std::min<Index>(end, ok.rows()) - 1;
    while (last >= 0 && !ok.row(last).any()) --last;
    if (last >= 0) end = last + 1;
  }
  const Index s = end - horizon;
  if (s < 0) {
    throw DataError("instance " + dataset.ids[static_cast<std::size_t>(row)] + " has fewer than " +
                    std::to_string(horizon) + " steps");
  }
  return s;
}

std::vector<Index> all_rows(const Dataset& dataset) {
  std::vector<Index> rows(static_cast<std::size_t>(dataset.instances()));
  for (Index i = 0; i < dataset.instances(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

}  // namespace

void TreatmentConfig::validate() const {
  base.validate();
  if (base.model_type == CellType::Linear) throw ParameterError("treatment model needs a recurrent cell (rnn or gru)");
  if (projection_horizon < 1) throw ParameterError("projection_horizon must be at least 1");
  if (decoder_epoch < 0) throw ParameterError("decoder_epoch must be nonnegative");
}

TreatmentModel::TreatmentModel(TreatmentConfig config) : config_(std::move(config)) { config_.validate(); }

void TreatmentModel::fit(const Dataset& dataset) {
  if (!dataset.spec || !dataset.labels) throw ContractError("fit: dataset has no problem attached");
  if (!dataset.actions || dataset.actions->names.empty()) {
    throw DataError("treatment model needs an action tensor; list the treatment variables in ProblemSpec.treatment_names");
  }
  if (dataset.spec->problem != ProblemKind::Online) throw ParameterError("treatment model needs an online problem");
  const auto train_rows = dataset.fit_rows();
  if (train_rows.empty()) throw DataError("fit: training fold is empty");
  const auto val_rows = dataset.rows_in(Fold::Val);
  const ModelConfig& b = config_.base;
  const auto labels = static_cast<Index>(dataset.label_names.size());
  const auto actions = static_cast<Index>(dataset.actions->names.size());
  task_ = dataset.spec->task;
  layout_ = layout_for(dataset, b.static_mode, b.time_mode, true);

  // Encoder stage: identical to the predictions-pathway training loop.
  encoder_ = RecurrentNet(b.model_type, layout_.width(), b.h_dim, b.n_layer, labels, b.seed);
  const auto train = build_batch(dataset, train_rows, layout_);
  SequenceBatch<double> val;
  if (!val_rows.empty()) val = build_batch(dataset, val_rows, layout_);
  TrainOptions opt;
  opt.epochs = b.epoch;
  opt.batch_size = b.batch_size;
  opt.learning_rate = b.learning_rate;
  opt.seed = b.seed;
  encoder_history_ =
      train_network(encoder_, train, val_rows.empty() ? nullptr : &val, task_, dataset.spec->metric, opt);

  has_decoder_ = config_.projection_horizon >= 2;
  decoder_history_.clear();
  if (has_decoder_) {
    // One teacher-forced sequence per (instance, cutoff): the decoder starts
    // from the encoder state after the cutoff step and reads the recorded
    // action and the true previous outcome at each later step.
    const Index len_dec = config_.projection_horizon - 1;
    const auto decoder_batch = [&](const std::vector<Index>& rows, const SequenceBatch<double>& enc_batch) {
      const auto tr = encoder_.forward(enc_batch.inputs);
      std::vector<std::pair<Index, Index>> seqs;  // (batch row, cutoff)
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const Index len = dataset.temporal.seq_len(rows[k]);
        for (Index s = 0; s + 1 < len; ++s) seqs.emplace_back(static_cast<Index>(k), s);
      }
      SequenceBatch<double> out;
      const auto m = static_cast<Index>(seqs.size());
      if (m == 0) return out;
      out.inputs.assign(static_cast<std::size_t>(len_dec), Matrix::Zero(m, actions + labels));
      out.targets.assign(static_cast<std::size_t>(len_dec), Matrix::Zero(m, labels));
      out.weights.assign(static_cast<std::size_t>(len_dec), Matrix::Zero(m, labels));
      out.initial.assign(static_cast<std::size_t>(encoder_.layers()), Matrix::Zero(m, encoder_.hidden()));
      for (Index j = 0; j < m; ++j) {
        const auto [k, s] = seqs[static_cast<std::size_t>(j)];
        const auto row = static_cast<std::size_t>(rows[static_cast<std::size_t>(k)]);
        const Index len = dataset.temporal.seq_len(static_cast<Index>(row));
        for (Index l = 0; l < encoder_.layers(); ++l) {
          out.initial[static_cast<std::size_t>(l)].row(j) = tr.h[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)].row(k);
        }
        const auto& y = dataset.labels->values[row];
        const auto& ok = dataset.labels->valid[row];
        const auto& a = dataset.actions->values[row];
        for (Index d = 0; d < len_dec; ++d) {
          const Index t = s + 1 + d;
          if (t >= len) break;
          const auto sd = static_cast<std::size_t>(d);
          out.inputs[sd].row(j).head(actions) = a.row(t);
          for (Index c = 0; c < labels; ++c) {
            if (ok(t - 1, c)) out.inputs[sd](j, actions + c) = y(t - 1, c);
            if (ok(t, c)) {
              out.targets[sd](j, c) = y(t, c);
              out.weights[sd](j, c) = 1.0;
            }
          }
        }
      }
      return out;
    };
    decoder_ = RecurrentNet(b.model_type, actions + labels, b.h_dim, b.n_layer, labels, b.seed + 1);
    const auto dtrain = decoder_batch(train_rows, train);
    SequenceBatch<double> dval;
    if (!val_rows.empty()) dval = decoder_batch(val_rows, val);
    if (dtrain.rows() > 0) {
      TrainOptions dopt = opt;
      dopt.epochs = config_.decoder_epoch > 0 ? config_.decoder_epoch : b.epoch;
      dopt.seed = b.seed + 1;
      decoder_history_ =
          train_network(decoder_, dtrain, dval.rows() > 0 ? &dval : nullptr, task_, dataset.spec->metric, dopt);
    }
  }
  fitted_ = true;
}

SequenceArray TreatmentModel::predict(const Dataset& dataset) const {
  if (!fitted_) throw ContractError(model_id() + ": predict called before fit");
  const auto rows = all_rows(dataset);
  const auto tr = encoder_.forward(build_inputs(dataset, rows, layout_));
  return assemble_predictions(dataset, rows, tr.logits, task_);
}

SequenceArray TreatmentModel::predict_counterfactual(const Dataset& dataset, const SequenceArray& planned,
                                                     int horizon) const {
  if (!fitted_) throw ContractError(model_id() + ": counterfactual query before fit");
  if (horizon < 1) throw ParameterError("horizon must be at least 1");
  if (horizon > config_.projection_horizon) {
    throw ParameterError("horizon " + std::to_string(horizon) + " exceeds projection_horizon " +
                         std::to_string(config_.projection_horizon));
  }
  const Index n = dataset.instances();
  const Index actions = layout_.actions;
  const Index labels = encoder_.outputs();
  if (static_cast<Index>(planned.size()) != n) throw DataError("planned actions must cover every instance");
  const auto rows = all_rows(dataset);
  auto inputs = build_inputs(dataset, rows, layout_);
  std::vector<Index> cut(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& p = planned[static_cast<std::size_t>(i)];
    if (p.rows() < horizon || p.cols() != actions) {
      throw DataError("planned actions of instance " + dataset.ids[static_cast<std::size_t>(i)] + " must be [" +
                      std::to_string(horizon) + " x " + std::to_string(actions) + "]");
    }
    cut[static_cast<std::size_t>(i)] = cutoff_of(dataset, i, horizon);
    inputs[static_cast<std::size_t>(cut[static_cast<std::size_t>(i)])].row(i).segment(layout_.temporal, actions) =
        p.row(0);
  }
  const auto tr = encoder_.forward(inputs);
  SequenceArray out(static_cast<std::size_t>(n), Matrix::Zero(horizon, labels));
  std::vector<Matrix> state(static_cast<std::size_t>(encoder_.layers()), Matrix::Zero(n, encoder_.hidden()));
  Matrix prev(n, labels);
  for (Index i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(cut[static_cast<std::size_t>(i)]);
    for (Index c = 0; c < labels; ++c) {
      prev(i, c) = activate(task_, tr.logits[s](i, c));
      out[static_cast<std::size_t>(i)](0, c) = prev(i, c);
    }
    for (Index l = 0; l < encoder_.layers(); ++l) state[static_cast<std::size_t>(l)].row(i) = tr.h[s][static_cast<std::size_t>(l)].row(i);
  }
  for (int k = 1; k < horizon; ++k) {
    Matrix x(n, actions + labels);
    for (Index i = 0; i < n; ++i) x.row(i).head(actions) = planned[static_cast<std::size_t>(i)].row(k);
    x.rightCols(labels) = prev;
    const auto step = decoder_.forward({x}, &state);
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < labels; ++c) {
        prev(i, c) = activate(task_, step.logits[0](i, c));
        out[static_cast<std::size_t>(i)](k, c) = prev(i, c);
      }
    for (std::size_t l = 0; l < state.size(); ++l) state[l] = step.h[0][l];
  }
  return out;
}

SequenceArray TreatmentModel::predict_factual(const Dataset& dataset, int horizon) const {
  return predict_counterfactual(dataset, recorded_actions(dataset, horizon), horizon);
}

HyperparameterSpace TreatmentModel::hyperparameter_space() const {
  return get_hyperparameter_space(config_.base.model_type);
}

std::unique_ptr<Predictor> TreatmentModel::clone_unfitted(const std::string& model_id) const {
  TreatmentConfig c = config_;
  c.base.model_id = model_id;
  return std::make_unique<TreatmentModel>(c);
}

void TreatmentModel::save(const std::filesystem::path& path) const {
  if (!fitted_) throw ContractError(model_id() + ": save called before fit");
  std::ostringstream os;
  write_model_header(os, "treatment");
  write_config(os, config_.base);
  os << "projection_horizon " << config_.projection_horizon << '\n'
     << "decoder_epoch " << config_.decoder_epoch << '\n'
     << "task " << to_string(task_) << '\n';
  write_layout(os, layout_);
  write_network(os, "encoder", encoder_);
  os << "has_decoder " << (has_decoder_ ? 1 : 0) << '\n';
  if (has_decoder_) write_network(os, "decoder", decoder_);
  os << "end\n";
  write_model_file(path, os.str());
}

std::unique_ptr<TreatmentModel> TreatmentModel::read(std::istream& in) {
  TreatmentConfig c;
  c.base = read_config(in);
  c.projection_horizon = read_field<int>(in, "projection_horizon");
  c.decoder_epoch = read_field<int>(in, "decoder_epoch");
  auto m = std::make_unique<TreatmentModel>(c);
  m->task_ = parse_task(read_field<std::string>(in, "task"));
  m->layout_ = read_layout(in);
  m->encoder_ = read_network(in, "encoder");
  m->has_decoder_ = read_field<int>(in, "has_decoder") != 0;
  if (m->has_decoder_) m->decoder_ = read_network(in, "decoder");
  expect_end(in);
  m->fitted_ = true;
  return m;
}

SequenceArray recorded_actions(const Dataset& dataset, int horizon) {
  if (!dataset.actions) throw DataError("dataset has no action tensor; set treatment names in the problem spec");
  SequenceArray out;
  for (Index i = 0; i < dataset.instances(); ++i) {
    const Index s = cutoff_of(dataset, i, horizon);
    out.push_back(dataset.actions->values[static_cast<std::size_t>(i)].middleRows(s, horizon));
  }
  return out;
}

SequenceArray constant_plan(const Dataset& dataset, int horizon, double value) {
  if (!dataset.actions) throw DataError("dataset has no action tensor; set treatment names in the problem spec");
  const auto a = static_cast<Index>(dataset.actions->names.size());
  return SequenceArray(static_cast<std::size_t>(dataset.instances()), Matrix::Constant(horizon, a, value));
}

LabelTensor horizon_labels(const Dataset& dataset, int horizon) {
  if (!dataset.labels) throw ContractError("dataset has no labels");
  LabelTensor out;
  for (Index i = 0; i < dataset.instances(); ++i) {
    const Index s = cutoff_of(dataset, i, horizon);
    out.values.push_back(dataset.labels->values[static_cast<std::size_t>(i)].middleRows(s, horizon));
    out.valid.push_back(dataset.labels->valid[static_cast<std::size_t>(i)].middleRows(s, horizon));
  }
  return out;
}

}  // namespace tspipe
