#include "tspipe/component.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace tspipe {

namespace detail {
void register_builtin_predictors();
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, PredictorLoader>& registry() {
  static std::map<std::string, PredictorLoader> r;
  return r;
}

}  // namespace

void Predictor::save(const std::filesystem::path&) const {
  throw ContractError(name() + ": model type does not support persistence");
}

void register_predictor_loader(const std::string& type_tag, PredictorLoader loader) {
  std::lock_guard lock(registry_mutex());
  registry()[type_tag] = std::move(loader);
}

void write_model_header(std::ostream& os, const std::string& type_tag) {
  os << "tspipe-model " << kModelFormatVersion << ' ' << type_tag << '\n';
}

std::unique_ptr<Predictor> load_predictor(const std::filesystem::path& path) {
  static std::once_flag builtins;
  std::call_once(builtins, detail::register_builtin_predictors);
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open model file " + path.string());
  std::string magic, tag;
  int version = 0;
  if (!(in >> magic >> version >> tag) || magic != "tspipe-model") {
    throw LoadError(path.string() + ": not a model file");
  }
  if (version != kModelFormatVersion) {
    throw LoadError(path.string() + ": unsupported model format version " + std::to_string(version));
  }
  PredictorLoader loader;
  {
    std::lock_guard lock(registry_mutex());
    const auto it = registry().find(tag);
    if (it == registry().end()) throw LoadError(path.string() + ": no loader for model type '" + tag + "'");
    loader = it->second;
  }
  in.ignore(1);
  try {
    return loader(in, path);
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

std::filesystem::path model_path(const std::filesystem::path& model_dir, const std::string& model_id) {
  return model_dir / (model_id + ".model");
}

}  // namespace tspipe
