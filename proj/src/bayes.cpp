#include "cmil/bayes.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cmil/numeric.hpp"

namespace cmil {

namespace {

void check_shape(const BayesModel& model, const Bag& bag) {
  if (bag.num_features() != static_cast<int>(model.params.num_features))
    throw std::invalid_argument("bayes: bag has " + std::to_string(bag.num_features()) +
                                " features, model expects " +
                                std::to_string(model.params.num_features));
  if (bag.num_instances() < static_cast<int>(model.params.window))
    throw std::invalid_argument("bayes: bag has fewer instances than the signal window");
}

double prior_log_odds(double q) { return std::log(q) - std::log1p(-q); }

double posterior_from_log_ratio(double q, double log_ratio) {
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;
  if (log_ratio == 0.0) return q;
  return sigmoid(log_ratio + prior_log_odds(q));
}

double log_odds_from_log_ratio(double q, double log_ratio) {
  if (q == 0.0) return -std::numeric_limits<double>::infinity();
  if (q == 1.0) return std::numeric_limits<double>::infinity();
  return log_ratio + prior_log_odds(q);
}

double normal_log_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double instance_log_ratio(const BayesModel& model, const Bag& bag, int j) {
  if (j < 0 || j >= bag.num_instances())
    throw std::out_of_range("instance_log_ratio: instance index out of range");
  if (bag.num_features() != static_cast<int>(model.params.num_features))
    throw std::invalid_argument("instance_log_ratio: feature count mismatch");
  const GenParams& p = model.params;
  const double var = p.sigma * p.sigma;
  const double slope = p.delta / var;
  const double offset = p.delta * p.delta / (2.0 * var);
  double s = 0.0;
  for (std::uint32_t m = 0; m < p.num_discriminative; ++m)
    s += slope * (static_cast<double>(bag.features(j, m)) - p.mu) - offset;
  return s;
}

Eigen::VectorXd instance_log_ratios(const BayesModel& model, const Bag& bag) {
  Eigen::VectorXd s(bag.num_instances());
  for (int j = 0; j < bag.num_instances(); ++j) s(j) = instance_log_ratio(model, bag, j);
  return s;
}

double bag_log_likelihood_ratio(const BayesModel& model, const Bag& bag) {
  check_shape(model, bag);
  const Eigen::VectorXd s = instance_log_ratios(model, bag);
  const int S = bag.num_instances();
  const int R = static_cast<int>(model.params.window);
  const int n_windows = S - R + 1;

  Eigen::VectorXd window_scores(n_windows);
  double running = s.head(R).sum();
  window_scores(0) = running;
  for (int u = 1; u < n_windows; ++u) {
    running += s(u + R - 1) - s(u - 1);
    window_scores(u) = running;
  }
  return log_mean_exp(window_scores);
}

double log_odds(const BayesModel& model, const Bag& bag) {
  return log_odds_from_log_ratio(model.params.q_pos, bag_log_likelihood_ratio(model, bag));
}

double posterior(const BayesModel& model, const Bag& bag) {
  return posterior_from_log_ratio(model.params.q_pos, bag_log_likelihood_ratio(model, bag));
}

namespace {

// Full log p(h | y) without any cancellation; `window_start` < 0 means y = 0.
double naive_class_log_likelihood(const GenParams& p, const Bag& bag, int window_start) {
  const int R = static_cast<int>(p.window);
  const int K = static_cast<int>(p.num_discriminative);
  double total = 0.0;
  for (int j = 0; j < bag.num_instances(); ++j) {
    const bool in_window = window_start >= 0 && j >= window_start && j < window_start + R;
    for (int m = 0; m < bag.num_features(); ++m) {
      const double mean = (in_window && m < K) ? p.mu + p.delta : p.mu;
      total += normal_log_pdf(static_cast<double>(bag.features(j, m)), mean, p.sigma);
    }
  }
  return total;
}

double naive_log_ratio(const BayesModel& model, const Bag& bag) {
  check_shape(model, bag);
  const GenParams& p = model.params;
  const int n_windows = bag.num_instances() - static_cast<int>(p.window) + 1;
  const double log_neg = naive_class_log_likelihood(p, bag, -1);
  Eigen::VectorXd per_start(n_windows);
  for (int u = 0; u < n_windows; ++u) per_start(u) = naive_class_log_likelihood(p, bag, u);
  // Uniform p(u | y=1) = 1 / n_windows.
  const double log_pos = log_mean_exp(per_start);
  return log_pos - log_neg;
}

}  // namespace

double naive_log_odds(const BayesModel& model, const Bag& bag) {
  return log_odds_from_log_ratio(model.params.q_pos, naive_log_ratio(model, bag));
}

double naive_posterior(const BayesModel& model, const Bag& bag) {
  return posterior_from_log_ratio(model.params.q_pos, naive_log_ratio(model, bag));
}

ScoredSet score_dataset(const BayesModel& model, const Dataset& ds, ScoreScale scale) {
  if (ds.params.num_features != model.params.num_features ||
      ds.params.num_discriminative != model.params.num_discriminative ||
      ds.params.window != model.params.window)
    throw std::invalid_argument("score_dataset: dataset shape does not match the model");
  ScoredSet out;
  out.labels.reserve(ds.size());
  out.scores.reserve(ds.size());
  for (const Bag& bag : ds.bags) {
    out.labels.push_back(bag.label);
    out.scores.push_back(scale == ScoreScale::probability ? posterior(model, bag)
                                                          : log_odds(model, bag));
  }
  return out;
}

void write_scores_csv(std::ostream& out, const ScoredSet& scores,
                      const std::vector<std::uint64_t>& ids) {
  if (!ids.empty() && ids.size() != scores.size())
    throw std::invalid_argument("write_scores_csv: ids and scores differ in length");
  out << "bag_id,label,score\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << (ids.empty() ? i : ids[i]) << ',' << scores.labels[i] << ',' << scores.scores[i]
        << '\n';
  }
  out.precision(old);
}

void write_scores_csv(const std::filesystem::path& path, const ScoredSet& scores,
                      const std::vector<std::uint64_t>& ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_scores_csv(out, scores, ids);
}

}  // namespace cmil
