#include "tspipe/automl.hpp"
#include "tspipe/component.hpp"
#include "tspipe/models.hpp"
#include "tspipe/pathways.hpp"

namespace tspipe::detail {

void register_builtin_predictors() {
  register_predictor_loader("sequence", [](std::istream& in, const std::filesystem::path&) -> std::unique_ptr<Predictor> {
    return SequenceModel::read(in);
  });
  register_predictor_loader("treatment", [](std::istream& in, const std::filesystem::path&) -> std::unique_ptr<Predictor> {
    return TreatmentModel::read(in);
  });
  register_predictor_loader("stepwise", [](std::istream& in, const std::filesystem::path& file) -> std::unique_ptr<Predictor> {
    return StepwiseEnsemble::read(in, file.parent_path());
  });
  register_predictor_loader("stacking", [](std::istream& in, const std::filesystem::path& file) -> std::unique_ptr<Predictor> {
    return StackingEnsemble::read(in, file.parent_path());
  });
}

}  // namespace tspipe::detail
