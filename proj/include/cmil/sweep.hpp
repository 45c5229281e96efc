#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmil/datagen.hpp"
#include "cmil/models.hpp"

namespace cmil {

/// One model column of a sweep: either the hand-set construction or a
/// pipeline trained from a small random start with grid search.
struct ModelEntry {
  PipelineKind kind;
  bool handcrafted = false;

  std::string method() const;
};

struct SweepOptions {
  std::vector<double> learning_rates = kLearningRateGrid;
  std::vector<double> weight_decays = kWeightDecayGrid;
  TrainConfig train;
  HandcraftOptions handcraft;
  double train_fraction = 0.8;
  unsigned jobs = 1;
  std::size_t n_test = 1000;
};

/// One results-table row. `learning_rate`/`weight_decay` are NaN and
/// `epochs_trained` is 0 for models that are not trained.
struct ResultRow {
  std::string method;
  std::string order;
  std::string pooling;
  std::size_t n_train = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string split = "test";
  double auroc = 0.0;
  int epochs_trained = 0;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
};

/// Evaluates one trained or hand-set model: draws `n_train` bags from
/// `params`, splits them, grid-searches, and scores the selected model on
/// `test`. Hand-set models ignore the training data.
ResultRow run_cell(const ModelEntry& entry, const GenParams& params, std::size_t n_train,
                   const Dataset& test, const SweepOptions& opts);

ResultRow bayes_row(const GenParams& params, std::size_t n_train, const Dataset& test);

/// For every N: a Bayes row followed by one row per model, all scored on
/// the shared `test` set.
std::vector<ResultRow> sweep_training_size(const std::vector<std::size_t>& sizes,
                                           const GenParams& base,
                                           const std::vector<ModelEntry>& models,
                                           const Dataset& test, const SweepOptions& opts);

/// For every delta: a fresh test set of opts.n_test bags, then a Bayes row
/// and one row per model trained on n_train bags.
std::vector<ResultRow> sweep_delta(const std::vector<double>& deltas, const GenParams& base,
                                   const std::vector<ModelEntry>& models, std::size_t n_train,
                                   const SweepOptions& opts);

/// Generation parameters of the training pool for a sweep cell.
GenParams training_params(const GenParams& base, std::size_t n_train);
/// Generation parameters of the common test set shared by a training-size sweep.
GenParams test_set_params(const GenParams& base);
/// Generation parameters of the per-delta test set.
GenParams delta_test_params(const GenParams& base, double delta);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);

}  // namespace cmil
