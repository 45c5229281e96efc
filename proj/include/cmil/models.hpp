#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cmil/datagen.hpp"
#include "cmil/eval.hpp"
#include "cmil/pooling.hpp"

namespace cmil {

/// prediction: score every instance, then pool the scores.
/// embedding: pool the instance embeddings, then score the pooled vector.
enum class Order { prediction, embedding };

enum class Pooling { max, mean, abmil, smooth_mean, smooth_max, logsumexp, self_attention };

std::string to_string(Order order);
std::string to_string(Pooling pooling);
/// Both throw std::invalid_argument on unknown names.
Order parse_order(const std::string& name);
Pooling parse_pooling(const std::string& name);

struct LinearScorer {
  Eigen::VectorXd w;
  double b = 0.0;
};

/// A complete MIL pipeline. `kernel`, when present, convolves the instance
/// embeddings along the instance axis before anything else.
struct ModelSpec {
  std::string name;
  Order order = Order::prediction;
  Pooling pooling = Pooling::max;
  LinearScorer scorer;
  std::optional<double> alpha;  // smooth_mean, smooth_max
  std::optional<ABMILParams<double>> abmil;
  std::optional<AttnParams<double>> attention;
  std::optional<Eigen::VectorXd> kernel;

  /// Checks that pooling parameters are present iff the pooling needs them
  /// and that all shapes agree with `num_features`.
  void validate(int num_features) const;
};

struct PipelineKind {
  Order order = Order::prediction;
  Pooling pooling = Pooling::max;
  bool context = false;
};

struct HandcraftOptions {
  /// tanh linearization scale for ABMIL: U = eps * w^T, u = sharpness / eps.
  double epsilon = 1e-3;
  /// Attention logits are sharpness * (linear score) for ABMIL and
  /// self-attention. Defaults to delta / sigma^2, which makes the weights
  /// over window centres equal the posterior over the window start.
  std::optional<double> attention_sharpness;
  double alpha = 0.5;
};

/// Kernel of odd length with `window` leading ones (the centered window for
/// odd `window`; one trailing zero tap pads an even window).
Eigen::VectorXd window_kernel(int window);

/// Hand-set parameters: weight one on every discriminative feature, zero
/// elsewhere, bias -K(mu + delta/2) per instance (times R after the window
/// convolution). Attention poolings put weights proportional to
/// exp(sharpness * linear score).
ModelSpec handcrafted_model(const GenParams& params, const PipelineKind& kind,
                            const HandcraftOptions& opts = {});

/// Probability of the positive class.
double forward(const ModelSpec& spec, const Bag& bag);

/// log(p / (1 - p)) of forward(), evaluated without forming p.
double forward_log_odds(const ModelSpec& spec, const Bag& bag);

/// Attention weights of an attention pooling on `bag`: a 1 x S row for
/// ABMIL, the (S+1) x (S+1) matrix (class token first) for self-attention.
Eigen::MatrixXd attention_matrix(const ModelSpec& spec, const Bag& bag);

/// Plain CSV, one matrix row per line, 17 significant digits.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

/// Log-odds of every bag, paired with the labels.
ScoredSet score_model(const ModelSpec& spec, const Dataset& ds);

// ---------------------------------------------------------------------------
// Training of the linear family (max, mean, logsumexp, smooth_mean,
// smooth_max; either order; optional fixed convolution kernel).

bool is_trainable(const ModelSpec& spec);

struct Gradient {
  Eigen::VectorXd w;
  double b = 0.0;
  std::optional<double> alpha;
};

struct LossAndGrad {
  double loss = 0.0;
  Gradient grad;
};

/// Mean binary cross-entropy over `batch` plus weight_decay/2 * ||w||^2, and
/// its exact gradient. Max pooling differentiates through the argmax
/// (lowest index on ties).
LossAndGrad loss_and_grad(const ModelSpec& spec, std::span<const Bag> batch,
                          double weight_decay = 0.0);

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  int max_epochs = 1000;
  int patience = 100;
  bool learn_alpha = true;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auroc = 0.0;
};

struct TrainResult {
  ModelSpec model;  // parameters with the best validation AUROC
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_auroc = 0.0;
  int epochs_run = 0;
};

/// Full-batch gradient descent with early stopping on validation AUROC.
/// Epoch 0 evaluates the initial parameters.
TrainResult train(const ModelSpec& init, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);

/// Small random start: w ~ N(0, 0.01^2), b = 0, alpha = 0.5 for smoothing.
ModelSpec init_trainable(const GenParams& params, const PipelineKind& kind, std::uint64_t seed);

inline const std::vector<double> kLearningRateGrid{0.1, 0.01, 0.001, 0.0001};
inline const std::vector<double> kWeightDecayGrid{1.0, 0.1, 0.01, 0.001, 0.0001, 1e-5, 1e-6, 0.0};

struct GridRun {
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  TrainResult result;
};

struct GridSearchResult {
  std::vector<GridRun> runs;  // learning-rate major order
  std::size_t best = 0;       // highest best_val_auroc, first on ties

  const GridRun& best_run() const { return runs.at(best); }
};

/// One training run per (learning rate, weight decay); `base` supplies
/// max_epochs, patience and learn_alpha. Runs may execute on `jobs` threads;
/// the result does not depend on `jobs`.
GridSearchResult grid_search(const ModelSpec& init, const Dataset& train_set,
                             const Dataset& val_set, const std::vector<double>& learning_rates,
                             const std::vector<double>& weight_decays, const TrainConfig& base,
                             unsigned jobs = 1);

std::string model_to_json(const ModelSpec& spec);
ModelSpec model_from_json(const std::string& text);

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace cmil
