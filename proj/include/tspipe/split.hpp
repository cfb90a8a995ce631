#pragma once

#include "tspipe/dataset.hpp"

#include <cstdint>

namespace tspipe {

/// Random instance-level partition. Counts are the largest-remainder
/// roundings of n * (1 - prob_val - prob_test, prob_val, prob_test); the fold
/// vector depends only on (instances, probabilities, seed).
Dataset train_val_test_split(const Dataset& dataset, double prob_val, double prob_test, std::uint64_t seed,
                             bool force = false);

/// Restriction to one fold. An empty fold gives an empty dataset.
Dataset slice_fold(const Dataset& dataset, Fold fold);

/// Largest-remainder rounding of n over the given proportions.
std::vector<Index> largest_remainder_counts(Index n, const std::vector<double>& proportions);

}  // namespace tspipe
