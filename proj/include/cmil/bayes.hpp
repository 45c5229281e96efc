#pragma once

#include <filesystem>
#include <iosfwd>

#include <Eigen/Core>

#include "cmil/datagen.hpp"
#include "cmil/eval.hpp"

namespace cmil {

/// Exact posterior p(y = 1 | bag) under known generative parameters.
///
/// The fast path uses the closed-form reduction: only discriminative
/// features inside a candidate window contribute to the likelihood ratio,
/// so log p(h|y=1) / p(h|y=0) is the log-mean-exp over window starts of the
/// summed per-instance log ratios. The naive path evaluates the full
/// product of Normal densities over every entry and serves as an oracle.
struct BayesModel {
  GenParams params;

  explicit BayesModel(const GenParams& p) : params(p) { params.validate(); }
};

/// Log density ratio N(mu + delta, sigma^2) / N(mu, sigma^2) summed over the
/// discriminative features of instance `j` (0-based).
double instance_log_ratio(const BayesModel& model, const Bag& bag, int j);

/// instance_log_ratio for every instance of the bag.
Eigen::VectorXd instance_log_ratios(const BayesModel& model, const Bag& bag);

/// log p(h | y=1) - log p(h | y=0). Requires S >= window.
double bag_log_likelihood_ratio(const BayesModel& model, const Bag& bag);

/// Posterior log-odds; +/-inf for the degenerate priors q_pos in {0, 1}.
double log_odds(const BayesModel& model, const Bag& bag);

double posterior(const BayesModel& model, const Bag& bag);

/// Reference log-odds from the unreduced product-form likelihoods.
double naive_log_odds(const BayesModel& model, const Bag& bag);

double naive_posterior(const BayesModel& model, const Bag& bag);

enum class ScoreScale { probability, log_odds };

ScoredSet score_dataset(const BayesModel& model, const Dataset& ds,
                        ScoreScale scale = ScoreScale::probability);

/// CSV with header `bag_id,label,score`; scores printed with 17 significant
/// digits. `ids` may be empty, in which case row indices are used.
void write_scores_csv(std::ostream& out, const ScoredSet& scores,
                      const std::vector<std::uint64_t>& ids = {});
void write_scores_csv(const std::filesystem::path& path, const ScoredSet& scores,
                      const std::vector<std::uint64_t>& ids = {});

}  // namespace cmil
