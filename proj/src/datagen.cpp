#include "cmil/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace cmil {

void GenParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("GenParams: " + what); };
  if (!(q_pos >= 0.0 && q_pos <= 1.0)) fail("q_pos must lie in [0, 1]");
  if (s_low < 1) fail("s_low must be >= 1");
  if (s_low > s_high) fail("s_low must not exceed s_high");
  if (num_features < 1) fail("num_features must be >= 1");
  if (num_discriminative < 1 || num_discriminative > num_features)
    fail("num_discriminative must lie in [1, num_features]");
  if (window < 1 || window > s_low) fail("window must lie in [1, s_low]");
  if (!(delta >= 0.0) || !std::isfinite(delta)) fail("delta must be finite and >= 0");
  if (!std::isfinite(mu)) fail("mu must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("sigma must be finite and > 0");
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

namespace {

Bag draw_bag(const GenParams& params, std::uint64_t bag_index, std::optional<int> forced_label) {
  std::mt19937_64 rng(derive_seed(params.seed, bag_index));

  Bag bag;
  bag.id = bag_index;
  std::bernoulli_distribution label_dist(params.q_pos);
  const bool drawn = label_dist(rng);
  bag.label = forced_label ? *forced_label : static_cast<int>(drawn);

  std::uniform_int_distribution<std::uint32_t> size_dist(params.s_low, params.s_high);
  const int S = static_cast<int>(size_dist(rng));
  const int M = static_cast<int>(params.num_features);
  const int R = static_cast<int>(params.window);

  if (bag.label == 1) {
    std::uniform_int_distribution<int> start_dist(1, S - R + 1);
    bag.start_index = start_dist(rng);
  }

  // Discriminative features are columns 0..K-1; the window covers rows
  // [first, first + R).
  const int K = static_cast<int>(params.num_discriminative);
  const int first = bag.start_index ? *bag.start_index - 1 : -1;
  std::normal_distribution<double> noise(0.0, 1.0);
  bag.features.resize(S, M);
  for (int j = 0; j < S; ++j) {
    const bool in_window = first >= 0 && j >= first && j < first + R;
    for (int m = 0; m < M; ++m) {
      const double mean = (in_window && m < K) ? params.mu + params.delta : params.mu;
      bag.features(j, m) = static_cast<float>(mean + params.sigma * noise(rng));
    }
  }
  return bag;
}

}  // namespace

Bag sample_bag(const GenParams& params, std::uint64_t bag_index) {
  params.validate();
  return draw_bag(params, bag_index, std::nullopt);
}

Bag sample_bag_with_label(const GenParams& params, std::uint64_t bag_index, int label) {
  params.validate();
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  return draw_bag(params, bag_index, label);
}

Dataset sample_dataset(const GenParams& params, std::size_t n_bags, unsigned jobs) {
  params.validate();
  if (n_bags < 1) throw std::invalid_argument("sample_dataset: n_bags must be >= 1");

  Dataset ds;
  ds.params = params;
  ds.bags.resize(n_bags);

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n_bags)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n_bags; ++i) ds.bags[i] = draw_bag(params, i, std::nullopt);
    return ds;
  }

  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < n_bags; i += jobs) ds.bags[i] = draw_bag(params, i, std::nullopt);
    });
  }
  for (auto& w : workers) w.join();
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t split_seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split_dataset: train_fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  if (n < 2) throw std::invalid_argument("split_dataset: need at least 2 bags");

  auto n_first = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_first = std::clamp<std::size_t>(n_first, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix64(split_seed));
  std::shuffle(order.begin(), order.end(), rng);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_first));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_first), order.end());

  std::pair<Dataset, Dataset> parts;
  parts.first.params = ds.params;
  parts.second.params = ds.params;
  parts.first.bags.reserve(n_first);
  parts.second.bags.reserve(n - n_first);
  for (std::size_t k = 0; k < n; ++k) {
    auto& target = k < n_first ? parts.first : parts.second;
    target.bags.push_back(ds.bags[order[k]]);
  }
  return parts;
}

double positive_fraction(const Dataset& ds) {
  if (ds.bags.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& b : ds.bags) pos += b.label == 1;
  return static_cast<double>(pos) / static_cast<double>(ds.size());
}

}  // namespace cmil
