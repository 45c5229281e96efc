#include "cmil/sweep.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "cmil/bayes.hpp"

namespace cmil {

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696eULL;  // "train"
constexpr std::uint64_t kTestStream = 0x74657374ULL;     // "test"
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;  // "split"
constexpr std::uint64_t kInitStream = 0x696e6974ULL;     // "init"

std::uint64_t delta_key(double delta) { return std::bit_cast<std::uint64_t>(delta); }

}  // namespace

std::string ModelEntry::method() const {
  std::string m = handcrafted ? "handcrafted" : "trained";
  if (kind.context) m += "-context";
  return m;
}

GenParams training_params(const GenParams& base, std::size_t n_train) {
  GenParams p = base;
  p.seed = derive_seed(derive_seed(base.seed, kTrainStream), n_train);
  return p;
}

GenParams test_set_params(const GenParams& base) {
  GenParams p = base;
  p.seed = derive_seed(base.seed, kTestStream);
  return p;
}

GenParams delta_test_params(const GenParams& base, double delta) {
  GenParams p = base;
  p.delta = delta;
  p.seed = derive_seed(derive_seed(base.seed, kTestStream), delta_key(delta));
  return p;
}

ResultRow bayes_row(const GenParams& params, std::size_t n_train, const Dataset& test) {
  ResultRow row;
  row.method = "bayes";
  row.n_train = n_train;
  row.delta = params.delta;
  row.seed = params.seed;
  row.auroc = auroc(score_dataset(BayesModel(params), test, ScoreScale::log_odds));
  row.learning_rate = std::numeric_limits<double>::quiet_NaN();
  row.weight_decay = std::numeric_limits<double>::quiet_NaN();
  return row;
}

ResultRow run_cell(const ModelEntry& entry, const GenParams& params, std::size_t n_train,
                   const Dataset& test, const SweepOptions& opts) {
  ResultRow row;
  row.method = entry.method();
  row.order = to_string(entry.kind.order);
  row.pooling = to_string(entry.kind.pooling);
  row.n_train = n_train;
  row.delta = params.delta;
  row.seed = params.seed;
  row.learning_rate = std::numeric_limits<double>::quiet_NaN();
  row.weight_decay = std::numeric_limits<double>::quiet_NaN();

  if (entry.handcrafted) {
    row.auroc = auroc(score_model(handcrafted_model(params, entry.kind, opts.handcraft), test));
    return row;
  }

  const GenParams train_params = training_params(params, n_train);
  const Dataset pool = sample_dataset(train_params, n_train, opts.jobs);
  const auto [train_set, val_set] =
      split_dataset(pool, opts.train_fraction, derive_seed(train_params.seed, kSplitStream));
  const ModelSpec init =
      init_trainable(params, entry.kind, derive_seed(train_params.seed, kInitStream));
  const GridSearchResult grid = grid_search(init, train_set, val_set, opts.learning_rates,
                                            opts.weight_decays, opts.train, opts.jobs);
  const GridRun& best = grid.best_run();
  row.seed = train_params.seed;
  row.auroc = auroc(score_model(best.result.model, test));
  row.epochs_trained = best.result.epochs_run;
  row.learning_rate = best.learning_rate;
  row.weight_decay = best.weight_decay;
  return row;
}

std::vector<ResultRow> sweep_training_size(const std::vector<std::size_t>& sizes,
                                           const GenParams& base,
                                           const std::vector<ModelEntry>& models,
                                           const Dataset& test, const SweepOptions& opts) {
  if (sizes.empty()) throw std::invalid_argument("sweep_training_size: empty size grid");
  base.validate();
  std::vector<ResultRow> rows;
  const ResultRow ceiling = bayes_row(base, 0, test);
  for (std::size_t n : sizes) {
    if (n < 2) throw std::invalid_argument("sweep_training_size: N must be >= 2");
    ResultRow b = ceiling;
    b.n_train = n;
    rows.push_back(b);
    for (const auto& m : models) rows.push_back(run_cell(m, base, n, test, opts));
  }
  return rows;
}

std::vector<ResultRow> sweep_delta(const std::vector<double>& deltas, const GenParams& base,
                                   const std::vector<ModelEntry>& models, std::size_t n_train,
                                   const SweepOptions& opts) {
  if (deltas.empty()) throw std::invalid_argument("sweep_delta: empty delta grid");
  std::vector<ResultRow> rows;
  for (double delta : deltas) {
    GenParams p = base;
    p.delta = delta;
    p.validate();
    const Dataset test = sample_dataset(delta_test_params(base, delta), opts.n_test, opts.jobs);
    rows.push_back(bayes_row(p, n_train, test));
    for (const auto& m : models) rows.push_back(run_cell(m, p, n_train, test, opts));
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "method,order,pooling,N,delta,seed,split,auroc,epochs_trained,lr,weight_decay\n";
  const auto old = out.precision(17);
  auto num = [&](double v) {
    if (std::isnan(v)) return;
    out << v;
  };
  for (const auto& r : rows) {
    out << r.method << ',' << r.order << ',' << r.pooling << ',' << r.n_train << ',';
    num(r.delta);
    out << ',' << r.seed << ',' << r.split << ',';
    num(r.auroc);
    out << ',' << r.epochs_trained << ',';
    num(r.learning_rate);
    out << ',';
    num(r.weight_decay);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace cmil
