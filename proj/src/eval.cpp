#include "cmil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "cmil/datagen.hpp"

namespace cmil {

double auroc(const ScoredSet& s) {
  if (s.labels.size() != s.scores.size())
    throw std::invalid_argument("auroc: labels and scores differ in length");
  const std::size_t n = s.size();
  std::size_t n_pos = 0;
  for (int y : s.labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auroc: labels must be 0 or 1");
    n_pos += y == 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw SingleClassError("auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Sum of average ranks (1-based) over the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t k = i;
    std::size_t pos_in_group = 0;
    while (k < n && s.scores[order[k]] == s.scores[order[i]]) {
      pos_in_group += s.labels[order[k]] == 1;
      ++k;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + k);
    rank_sum += avg_rank * static_cast<double>(pos_in_group);
    i = k;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapResult paired_bootstrap(const ScoredSet& a, const ScoredSet& b, int n_resamples,
                                 std::uint64_t seed) {
  if (n_resamples < 1) throw std::invalid_argument("paired_bootstrap: n_resamples must be >= 1");
  if (a.size() != b.size() || a.scores.size() != a.size() || b.scores.size() != b.size() ||
      a.labels != b.labels)
    throw std::invalid_argument("paired_bootstrap: score sets must share labels and length");
  // Validates that both classes exist at all; otherwise redrawing never ends.
  auroc(a);

  const std::size_t n = a.size();
  std::mt19937_64 rng(mix64(seed));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  ScoredSet ra, rb;
  ra.labels.resize(n);
  ra.scores.resize(n);
  rb.scores.resize(n);
  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(n_resamples));
  while (static_cast<int>(diffs.size()) < n_resamples) {
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = pick(rng);
      ra.labels[k] = a.labels[idx];
      ra.scores[k] = a.scores[idx];
      rb.scores[k] = b.scores[idx];
      n_pos += a.labels[idx] == 1;
    }
    if (n_pos == 0 || n_pos == n) continue;
    rb.labels = ra.labels;
    diffs.push_back(auroc(ra) - auroc(rb));
  }

  BootstrapResult r;
  r.n_resamples = n_resamples;
  r.seed = seed;
  r.mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
  r.ci_low = percentile(diffs, 2.5);
  r.ci_high = percentile(diffs, 97.5);
  return r;
}

std::string to_json(const BootstrapResult& r) {
  nlohmann::ordered_json j;
  j["mean_diff"] = r.mean_diff;
  j["ci_low"] = r.ci_low;
  j["ci_high"] = r.ci_high;
  j["n_resamples"] = r.n_resamples;
  j["seed"] = r.seed;
  return j.dump(2);
}

}  // namespace cmil
