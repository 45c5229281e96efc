#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cmil {

/// Row-major S x M feature block, stored in single precision.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Constants of the shifted-mean MIL generative process.
///
/// Defaults are the main experimental configuration: balanced labels,
/// 15..45 instances per bag, 768 features of which the first is
/// discriminative, a signal window of 3 and a shift of 2.
struct GenParams {
  double q_pos = 0.5;
  std::uint32_t s_low = 15;
  std::uint32_t s_high = 45;
  std::uint32_t num_features = 768;
  std::uint32_t num_discriminative = 1;
  std::uint32_t window = 3;
  double delta = 2.0;
  double mu = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  bool operator==(const GenParams&) const = default;
};

/// One labeled bag. `start_index` is 1-based (first instance of the signal
/// window) and is present exactly when `label == 1`. It is diagnostic only;
/// no model reads it.
struct Bag {
  std::uint64_t id = 0;
  int label = 0;
  std::optional<int> start_index;
  FeatureMatrix features;

  int num_instances() const { return static_cast<int>(features.rows()); }
  int num_features() const { return static_cast<int>(features.cols()); }

  bool operator==(const Bag& other) const {
    return id == other.id && label == other.label && start_index == other.start_index &&
           features.rows() == other.features.rows() && features.cols() == other.features.cols() &&
           features == other.features;
  }
};

struct Dataset {
  GenParams params;
  std::vector<Bag> bags;

  std::size_t size() const { return bags.size(); }
  bool operator==(const Dataset&) const = default;
};

/// SplitMix64 finalizer. Used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for sub-stream `stream` of `seed`; distinct streams are decorrelated.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Draws bag `bag_index`; the result depends only on (params.seed, bag_index).
Bag sample_bag(const GenParams& params, std::uint64_t bag_index);

/// Same as sample_bag but with the label forced, for tests and diagnostics.
Bag sample_bag_with_label(const GenParams& params, std::uint64_t bag_index, int label);

/// Draws bags 0..n_bags-1. `jobs` > 1 splits the work across threads; the
/// output is identical for every value of `jobs`.
Dataset sample_dataset(const GenParams& params, std::size_t n_bags, unsigned jobs = 1);

/// Random partition into (first, second) with round(train_fraction * N)
/// bags in the first part, clamped so that neither part is empty. Both
/// parts keep the original bag order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t split_seed);

/// Fraction of bags with label 1 (0 for an empty dataset).
double positive_fraction(const Dataset& ds);

}  // namespace cmil
