#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pbci/classifier.hpp"

namespace pbci {

struct CrossValReport {
  std::vector<double> fold_accuracies;
  double mean_acc = 0.0;
  double sd_acc = 0.0;
  long n_trials = 0;
  std::vector<long> class_counts;
  double chance_threshold = 0.0;
  bool significant = false;
  std::uint64_t seed = 0;
};

// One-sided (1-alpha) Wilson upper bound around the accuracy of a guesser
// that draws labels in proportion to the observed class frequencies.
double wilson_chance_threshold(const std::vector<long>& class_counts, double alpha = 0.05);

using TrainFn = std::function<LinearModel(const FeatureMatrix&)>;

CrossValReport crossval_repeated(const FeatureMatrix& features, const TrainFn& train, int k,
                                 int repeats, std::uint64_t seed);

}  // namespace pbci
