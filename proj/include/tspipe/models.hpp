#pragma once

#include "tspipe/component.hpp"
#include "tspipe/recurrent_net.hpp"

#include <cstdint>
#include <cstdlib>
#include <istream>
#include <type_traits>
#include <optional>
#include <string>
#include <vector>

namespace tspipe {

enum class FeatureMode { Concatenate, None };
FeatureMode parse_feature_mode(const std::string& s);
std::string to_string(FeatureMode m);

/// Accepts linear, rnn and gru. The remaining names of the deep-model menu
/// (lstm, attention, tcn, transformer) are recognised and rejected with a
/// pointer to the extension contract.
CellType parse_model_type(const std::string& s);
std::string to_string(CellType c);

struct ModelConfig {
  CellType model_type = CellType::Gru;
  int h_dim = 32;
  int n_layer = 1;
  int batch_size = 64;
  int epoch = 20;
  double learning_rate = 1e-3;
  double ridge = 1e-4;  // linear model only
  FeatureMode static_mode = FeatureMode::Concatenate;
  FeatureMode time_mode = FeatureMode::Concatenate;
  std::uint64_t seed = 0;
  std::string model_id = "model";

  void validate() const;
};

/// Which channels a model reads, in input order: temporal features, then
/// static features (if concatenated), then the step's time delta (if
/// concatenated).
struct InputLayout {
  Index temporal = 0;
  Index static_features = 0;
  bool time_delta = false;
  Index actions = 0;  // treatment models append the action channels

  Index width() const { return temporal + actions + static_features + (time_delta ? 1 : 0); }
  bool operator==(const InputLayout&) const = default;
};

InputLayout layout_for(const Dataset& dataset, FeatureMode static_mode, FeatureMode time_mode,
                       bool with_actions = false);

/// Step-major model input for the given instances:
/// [temporal ⊕ actions ⊕ static ⊕ dt] per step. Requires complete inputs on
/// valid steps; padding steps are zero.
std::vector<Matrix> build_inputs(const Dataset& dataset, const std::vector<Index>& rows, const InputLayout& layout);

/// Loss targets/weights for the given instances. Online problems supervise
/// every valid step; one-shot problems supervise the last valid step only.
SequenceBatch<double> build_batch(const Dataset& dataset, const std::vector<Index>& rows, const InputLayout& layout);

/// Per-epoch training record.
struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_score = 0.0;
};

/// Native predictions-pathway model (linear, vanilla RNN or GRU).
class SequenceModel final : public Predictor {
 public:
  explicit SequenceModel(ModelConfig config);

  std::string name() const override { return to_string(config_.model_type); }
  std::string model_id() const override { return config_.model_id; }
  bool fitted() const override { return fitted_; }
  const ModelConfig& config() const { return config_; }

  void fit(const Dataset& dataset) override;
  SequenceArray predict(const Dataset& dataset) const override;

  HyperparameterSpace hyperparameter_space() const override;
  std::unique_ptr<Predictor> clone_unfitted(const std::string& model_id) const override;

  void save(const std::filesystem::path& path) const override;
  static std::unique_ptr<SequenceModel> read(std::istream& in);

  const RecurrentNet& network() const { return net_; }
  const InputLayout& layout() const { return layout_; }
  Task task() const { return task_; }
  ProblemKind problem() const { return problem_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  int best_epoch() const { return best_epoch_; }

  /// Mean masked loss of the current weights on the given rows.
  double loss(const Dataset& dataset, const std::vector<Index>& rows) const;

 private:
  ModelConfig config_;
  RecurrentNet net_;
  InputLayout layout_;
  Task task_ = Task::Classification;
  ProblemKind problem_ = ProblemKind::Online;
  bool fitted_ = false;
  int best_epoch_ = -1;
  std::vector<EpochRecord> history_;
};

/// Searchable dimensions: gru/rnn expose h_dim, n_layer, learning_rate (log)
/// and batch_size; linear exposes ridge (log) and learning_rate (log).
HyperparameterSpace get_hyperparameter_space(CellType model_type);

/// Same hyperparameters, new identifier, nothing fitted.
ModelConfig clone_unfitted(const ModelConfig& config, const std::string& model_id);

/// Applies a configuration drawn from get_hyperparameter_space() on top of a
/// base config.
ModelConfig apply_configuration(ModelConfig base, const Configuration& c);

/// Turns network logits into outputs shaped like the label tensor.
SequenceArray assemble_predictions(const Dataset& dataset, const std::vector<Index>& rows,
                                   const std::vector<Matrix>& logits, Task task);

/// Generic training driver shared with the treatment pathway: mini-batch
/// adaptive gradient steps over rows of `train`, weights of the epoch with the
/// best validation score retained (validation loss when the metric is
/// undefined, final epoch when there is no validation set).
struct TrainOptions {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double ridge = 0.0;
  std::uint64_t seed = 0;
};
std::vector<EpochRecord> train_network(RecurrentNet& net, const SequenceBatch<double>& train,
                                       const SequenceBatch<double>* val, Task task, MetricName metric,
                                       const TrainOptions& options, int* best_epoch = nullptr);

/// Rows `rows` of a batch (including initial states).
SequenceBatch<double> select_rows(const SequenceBatch<double>& batch, const std::vector<Index>& rows);

void write_matrix(std::ostream& os, const std::string& name, const Matrix& m);
Matrix read_matrix(std::istream& is, const std::string& expected_name);

// Model-file building blocks shared by every predictor that persists itself.
void write_config(std::ostream& os, const ModelConfig& c);
ModelConfig read_config(std::istream& in);
void write_layout(std::ostream& os, const InputLayout& l);
InputLayout read_layout(std::istream& in);
void write_network(std::ostream& os, const std::string& tag, const RecurrentNet& net);
RecurrentNet read_network(std::istream& in, const std::string& tag);
/// Atomic write (temporary file, then rename).
void write_model_file(const std::filesystem::path& path, const std::string& text);
/// Consumes the trailing `end` marker; its absence means a truncated file.
void expect_end(std::istream& in);

/// Reads `<key> <value>`; LoadError when the key differs or the value is
/// missing or malformed.
template <typename T>
T read_field(std::istream& in, const std::string& key) {
  std::string k;
  T v{};
  if (!(in >> k) || k != key) throw LoadError("expected field '" + key + "'");
  if constexpr (std::is_same_v<T, double>) {
    std::string tok;
    if (!(in >> tok)) throw LoadError("truncated field '" + key + "'");
    char* end = nullptr;
    v = std::strtod(tok.c_str(), &end);
    if (*end != '\0') throw LoadError("bad number for '" + key + "'");
  } else if (!(in >> v)) {
    throw LoadError("truncated field '" + key + "'");
  }
  return v;
}

}  // namespace tspipe
