#include "pbci/eval.hpp"

#include <algorithm>
#include <cmath>

#include "pbci/dist.hpp"
#include "pbci/error.hpp"
#include "pbci/rng.hpp"

namespace pbci {

double wilson_chance_threshold(const std::vector<long>& class_counts, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 0.5)) fail(errc::invalid_config, "alpha must lie in (0, 0.5)");
  long n = 0;
  for (long c : class_counts) {
    if (c < 0) fail(errc::empty_counts, "negative class count");
    n += c;
  }
  if (class_counts.empty() || n < 1) fail(errc::empty_counts, "no observations");

  double p0 = 0.0;
  for (long c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    p0 += p * p;
  }
  if (p0 >= 1.0) return 1.0;
  const double z = normal_quantile(1.0 - alpha);
  const double nn = static_cast<double>(n);
  const double bound = (p0 + z * z / (2.0 * nn) +
                        z * std::sqrt(p0 * (1.0 - p0) / nn + z * z / (4.0 * nn * nn))) /
                       (1.0 + z * z / nn);
  return std::min(1.0, bound);
}

CrossValReport crossval_repeated(const FeatureMatrix& features, const TrainFn& train, int k,
                                 int repeats, std::uint64_t seed) {
  const long n = features.x.rows();
  if (static_cast<long>(features.labels.size()) != n)
    fail(errc::dimension_mismatch, "cross-validation needs one label per observation");

  std::vector<long> class0, class1;
  for (long i = 0; i < n; ++i)
    (features.labels[static_cast<std::size_t>(i)] == 0 ? class0 : class1).push_back(i);
  if (static_cast<long>(class0.size()) < k || static_cast<long>(class1.size()) < k)
    fail(errc::class_too_small, "each class needs at least " + std::to_string(k) + " members");

  CrossValReport report;
  report.n_trials = n;
  report.class_counts = {static_cast<long>(class0.size()), static_cast<long>(class1.size())};
  report.chance_threshold = wilson_chance_threshold(report.class_counts);
  report.seed = seed;

  for (int r = 0; r < repeats; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r), 0xC5));
    std::vector<std::vector<long>> folds(static_cast<std::size_t>(k));
    for (auto* cls : {&class0, &class1}) {
      std::vector<long> order = *cls;
      rng.shuffle(order);
      for (std::size_t i = 0; i < order.size(); ++i)
        folds[i % static_cast<std::size_t>(k)].push_back(order[i]);
    }

    for (int f = 0; f < k; ++f) {
      const auto& test_idx = folds[static_cast<std::size_t>(f)];
      FeatureMatrix train_set;
      train_set.x.resize(n - static_cast<long>(test_idx.size()), features.x.cols());
      long row = 0;
      std::vector<char> in_test(static_cast<std::size_t>(n), 0);
      for (long i : test_idx) in_test[static_cast<std::size_t>(i)] = 1;
      for (long i = 0; i < n; ++i) {
        if (in_test[static_cast<std::size_t>(i)]) continue;
        train_set.x.row(row++) = features.x.row(i);
        train_set.labels.push_back(features.labels[static_cast<std::size_t>(i)]);
      }
      const LinearModel model = train(train_set);
      long correct = 0;
      for (long i : test_idx) {
        const double score = predict(model, features.x.row(i).transpose());
        const int predicted = score > 0.0 ? 1 : 0;
        if (predicted == features.labels[static_cast<std::size_t>(i)]) ++correct;
      }
      report.fold_accuracies.push_back(static_cast<double>(correct) /
                                       static_cast<double>(test_idx.size()));
    }
  }

  const long folds_total = static_cast<long>(report.fold_accuracies.size());
  double sum = 0.0;
  for (double a : report.fold_accuracies) sum += a;
  report.mean_acc = sum / static_cast<double>(folds_total);
  double ss = 0.0;
  for (double a : report.fold_accuracies) ss += (a - report.mean_acc) * (a - report.mean_acc);
  report.sd_acc = folds_total > 1 ? std::sqrt(ss / static_cast<double>(folds_total - 1)) : 0.0;
  report.significant = report.mean_acc > report.chance_threshold;
  return report;
}

}  // namespace pbci
