#pragma once

#include "tspipe/dataset.hpp"
#include "tspipe/errors.hpp"
#include "tspipe/hyperparameter_space.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

namespace tspipe {

/// Stage component: learns state from a dataset and maps datasets to
/// datasets. Fitted state comes from the training rows only (see
/// Dataset::fit_rows), so transforming test data never refits.
class Component {
 public:
  virtual ~Component() = default;

  virtual std::string name() const = 0;

  void fit(const Dataset& dataset) {
    do_fit(dataset);
    fitted_ = true;
  }

  Dataset transform(const Dataset& dataset) const {
    if (!fitted_) throw ContractError(name() + ": transform called before fit");
    return do_transform(dataset);
  }

  Dataset fit_transform(const Dataset& dataset) {
    fit(dataset);
    return transform(dataset);
  }

  bool fitted() const { return fitted_; }

  virtual HyperparameterSpace hyperparameter_space() const { return {}; }

  /// Fresh copy with the same settings and no fitted state.
  virtual std::unique_ptr<Component> clone_unfitted() const = 0;

 protected:
  virtual void do_fit(const Dataset& dataset) = 0;
  virtual Dataset do_transform(const Dataset& dataset) const = 0;

 private:
  bool fitted_ = false;
};

/// Model component: fit on the train fold (val fold for model selection),
/// predict one [steps x labels] matrix per instance.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;
  virtual std::string model_id() const = 0;
  virtual bool fitted() const = 0;

  virtual void fit(const Dataset& dataset) = 0;
  virtual SequenceArray predict(const Dataset& dataset) const = 0;

  virtual HyperparameterSpace hyperparameter_space() const = 0;
  virtual std::unique_ptr<Predictor> clone_unfitted(const std::string& model_id) const = 0;

  /// Writes a self-describing model file readable by load_predictor().
  virtual void save(const std::filesystem::path& path) const;
};

using PredictorFactory = std::function<std::unique_ptr<Predictor>(std::uint64_t seed)>;

/// Reads the type tag at the head of a model file and dispatches to the
/// registered loader. Built-in model types register themselves.
std::unique_ptr<Predictor> load_predictor(const std::filesystem::path& path);

/// Receives the stream positioned after the header and the file's own path
/// (composite models resolve member files relative to it).
using PredictorLoader = std::function<std::unique_ptr<Predictor>(std::istream&, const std::filesystem::path&)>;
void register_predictor_loader(const std::string& type_tag, PredictorLoader loader);

/// Model-file header shared by all predictors: `tspipe-model <version> <type_tag>`.
inline constexpr int kModelFormatVersion = 1;
void write_model_header(std::ostream& os, const std::string& type_tag);

/// `<model_dir>/<model_id>.model`
std::filesystem::path model_path(const std::filesystem::path& model_dir, const std::string& model_id);

}  // namespace tspipe
