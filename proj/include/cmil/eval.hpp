#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmil {

/// Aligned true labels (0/1) and model scores.
struct ScoredSet {
  std::vector<int> labels;
  std::vector<double> scores;

  std::size_t size() const { return labels.size(); }
};

/// Raised by auroc when only one class is present.
class SingleClassError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Area under the ROC curve as the normalized Mann-Whitney U statistic.
/// Tied scores get average ranks, so a tied positive/negative pair counts 1/2.
double auroc(const ScoredSet& s);

struct BootstrapResult {
  double mean_diff = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_resamples = 0;
  std::uint64_t seed = 0;
};

/// Paired percentile bootstrap of auroc(a) - auroc(b). Each resample draws
/// n indices with replacement, shared by both methods; resamples missing a
/// class are redrawn. The interval is the 2.5th/97.5th percentile of the
/// resampled differences (linear interpolation between order statistics).
BootstrapResult paired_bootstrap(const ScoredSet& a, const ScoredSet& b, int n_resamples,
                                 std::uint64_t seed);

std::string to_json(const BootstrapResult& r);

/// Linear-interpolation percentile, q in [0, 100]. `values` is copied.
double percentile(std::vector<double> values, double q);

}  // namespace cmil
