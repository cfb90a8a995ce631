#include "tspipe/split.hpp"

#include "tspipe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tspipe {

std::vector<Index> largest_remainder_counts(Index n, const std::vector<double>& proportions) {
  std::vector<Index> counts(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  Index assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = static_cast<double>(n) * proportions[k];
    counts[k] = static_cast<Index>(std::floor(exact + 1e-9));
    assigned += counts[k];
    remainders.emplace_back(exact - static_cast<double>(counts[k]), k);
  }
  // Larger remainder first; earlier category wins ties.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n && k < remainders.size(); ++k, ++assigned) {
    ++counts[remainders[k].second];
  }
  return counts;
}

Dataset train_val_test_split(const Dataset& dataset, double prob_val, double prob_test, std::uint64_t seed,
                             bool force) {
  if (prob_val < 0.0 || prob_test < 0.0 || prob_val + prob_test > 1.0 + 1e-12) {
    throw ParameterError("split fractions must be nonnegative with prob_val + prob_test <= 1");
  }
  const bool assigned = std::any_of(dataset.fold.begin(), dataset.fold.end(),
                                    [](Fold f) { return f != Fold::Unassigned; });
  if (assigned && !force) throw ParameterError("folds already assigned; pass force to reassign");

  const Index n = dataset.instances();
  const auto counts = largest_remainder_counts(n, {std::max(0.0, 1.0 - prob_val - prob_test), prob_val, prob_test});
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Dataset out = dataset;
  std::size_t k = 0;
  const Fold tags[] = {Fold::Train, Fold::Val, Fold::Test};
  for (int c = 0; c < 3; ++c) {
    for (Index j = 0; j < counts[static_cast<std::size_t>(c)]; ++j, ++k) {
      out.fold[static_cast<std::size_t>(order[k])] = tags[c];
    }
  }
  return out;
}

Dataset slice_fold(const Dataset& dataset, Fold fold) { return dataset.subset(dataset.rows_in(fold)); }

}  // namespace tspipe
