// cmil: generate synthetic MIL data, score it, train and compare models.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmil/bayes.hpp"
#include "cmil/dataset_io.hpp"
#include "cmil/eval.hpp"
#include "cmil/models.hpp"
#include "cmil/sweep.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cmil;

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;

struct Settings {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  unsigned jobs = 1;
  GenParams gen;

  std::size_t n_bags = 1000;
  std::size_t export_attention = 0;
  std::string output;
  std::string data;
  std::string test;

  std::string order = "embedding";
  std::string pooling = "max";
  bool context = false;
  double alpha = 0.5;
  double epsilon = 1e-3;
  std::optional<double> sharpness;

  std::size_t n_train = 400;
  std::vector<double> lrs = kLearningRateGrid;
  std::vector<double> wds = kWeightDecayGrid;
  int max_epochs = 1000;
  int patience = 100;
  double train_fraction = 0.8;

  std::string scores_a;
  std::string scores_b;
  int n_resamples = 500;

  std::vector<std::size_t> sizes{100, 400, 2000};
  std::vector<double> deltas{0.0, 1.0, 2.0, 3.0};
  std::vector<std::string> models{"trained:prediction:max", "trained:embedding:mean",
                                  "handcrafted:prediction:max", "handcrafted-context:embedding:max"};
  std::size_t n_test = 1000;
};

struct RunInfo {
  std::string command;
  std::string config_text;
  std::uint64_t config_hash = 0;
};

// Keys that only say where or how fast to run, not what to compute.
bool affects_results(const std::string& line) {
  for (const char* key : {"config", "out-dir", "jobs"}) {
    const std::string k = key;
    if (line.rfind(k, 0) == 0 && line.size() > k.size() &&
        (line[k.size()] == '=' || line[k.size()] == ' '))
      return false;
  }
  return true;
}

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string list(const std::vector<T>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, std::string>) out += '"' + values[i] + '"';
    else if constexpr (std::is_floating_point_v<T>) out += num(values[i]);
    else out += std::to_string(values[i]);
  }
  return out + "]";
}

std::string quoted(const std::string& v) { return '"' + v + '"'; }

// INI text that loads back through --config and reproduces the run.
std::string resolved_config(const Settings& s, const std::string& command) {
  std::ostringstream out;
  auto key = [&](const char* k, const std::string& v) { out << k << " = " << v << "\n"; };
  key("seed", std::to_string(s.seed));
  key("out-dir", quoted(s.out_dir));
  key("jobs", std::to_string(s.jobs));
  key("q-pos", num(s.gen.q_pos));
  key("s-low", std::to_string(s.gen.s_low));
  key("s-high", std::to_string(s.gen.s_high));
  key("num-features", std::to_string(s.gen.num_features));
  key("num-discriminative", std::to_string(s.gen.num_discriminative));
  key("window", std::to_string(s.gen.window));
  key("delta", num(s.gen.delta));
  key("mu", num(s.gen.mu));
  key("sigma", num(s.gen.sigma));
  key("order", quoted(s.order));
  key("pooling", quoted(s.pooling));
  key("context", s.context ? "true" : "false");
  key("alpha", num(s.alpha));
  key("epsilon", num(s.epsilon));
  if (s.sharpness) key("sharpness", num(*s.sharpness));
  key("n-train", std::to_string(s.n_train));
  key("lr", list(s.lrs));
  key("wd", list(s.wds));
  key("max-epochs", std::to_string(s.max_epochs));
  key("patience", std::to_string(s.patience));
  key("train-fraction", num(s.train_fraction));
  key("n-test", std::to_string(s.n_test));
  out << "\n[" << command << "]\n";
  if (command == "generate") {
    key("n-bags", std::to_string(s.n_bags));
    if (!s.output.empty()) key("output", quoted(s.output));
  }
  if (!s.data.empty()) key("data", quoted(s.data));
  if (s.export_attention > 0) key("export-attention", std::to_string(s.export_attention));
  if (!s.test.empty()) key("test", quoted(s.test));
  if (command == "bootstrap") {
    if (!s.scores_a.empty()) key("scores-a", quoted(s.scores_a));
    if (!s.scores_b.empty()) key("scores-b", quoted(s.scores_b));
    key("n-resamples", std::to_string(s.n_resamples));
  }
  if (command == "sweep-n") key("sizes", list(s.sizes));
  if (command == "sweep-delta") key("deltas", list(s.deltas));
  if (command.starts_with("sweep")) key("models", list(s.models));
  return out.str();
}

std::uint64_t config_hash(const std::string& text) {
  std::istringstream in(text);
  std::string line, kept;
  while (std::getline(in, line))
    if (affects_results(line)) kept += line + '\n';
  return bytes_checksum(kept);
}

PipelineKind pipeline_kind(const Settings& s) {
  return {parse_order(s.order), parse_pooling(s.pooling), s.context};
}

HandcraftOptions handcraft_options(const Settings& s) {
  HandcraftOptions h;
  h.alpha = s.alpha;
  h.epsilon = s.epsilon;
  h.attention_sharpness = s.sharpness;
  return h;
}

TrainConfig train_config(const Settings& s) {
  TrainConfig t;
  t.max_epochs = s.max_epochs;
  t.patience = s.patience;
  return t;
}

GenParams gen_params(const Settings& s) {
  GenParams p = s.gen;
  p.seed = s.seed;
  p.validate();
  return p;
}

ModelEntry parse_model_entry(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  if (parts.size() != 3) throw std::invalid_argument("model '" + text + "': expected method:order:pooling");
  ModelEntry e;
  const std::string& method = parts[0];
  if (method == "trained" || method == "trained-context") e.handcrafted = false;
  else if (method == "handcrafted" || method == "handcrafted-context") e.handcrafted = true;
  else throw std::invalid_argument("model '" + text + "': unknown method '" + method + "'");
  e.kind = {parse_order(parts[1]), parse_pooling(parts[2]), method.ends_with("-context")};
  return e;
}

fs::path out_path(const Settings& s, const std::string& name) { return fs::path(s.out_dir) / name; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json run_header(const RunInfo& run, const Settings& s) {
  json j;
  j["command"] = run.command;
  j["config_hash"] = to_hex(run.config_hash);
  j["seed"] = s.seed;
  return j;
}

// Every command leaves the resolved configuration and a run record behind.
void finish_run(const RunInfo& run, const Settings& s, json record) {
  write_text(out_path(s, "resolved_config.ini"), run.config_text);
  write_text(out_path(s, "run.json"), record.dump(2) + "\n");
}

ScoredSet read_scores_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "bag_id,label,score") throw std::runtime_error(path.string() + ": unexpected header");
  ScoredSet s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string id, label, score;
    if (!std::getline(row, id, ',') || !std::getline(row, label, ',') || !std::getline(row, score))
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    s.labels.push_back(std::stoi(label));
    s.scores.push_back(std::stod(score));
  }
  return s;
}

std::vector<std::uint64_t> bag_ids(const Dataset& ds) {
  std::vector<std::uint64_t> ids;
  for (const Bag& bag : ds.bags) ids.push_back(bag.id);
  return ids;
}

int cmd_generate(const Settings& s, const RunInfo& run) {
  const GenParams p = gen_params(s);
  const Dataset ds = sample_dataset(p, s.n_bags, s.jobs);
  const fs::path path = s.output.empty() ? out_path(s, "dataset.smb") : fs::path(s.output);
  write_dataset(ds, path);
  const std::uint64_t checksum = file_checksum(path);
  json extra = run_header(run, s);
  write_manifest(ds, path, checksum, extra.dump());
  std::cout << "bags " << ds.size() << "\n"
            << "positive_fraction " << positive_fraction(ds) << "\n"
            << "checksum " << to_hex(checksum) << "\n";
  if (p.delta == 0.0) std::cout << "no-signal dataset (delta = 0)\n";
  json rec = run_header(run, s);
  rec["dataset"] = path.string();
  rec["checksum"] = to_hex(checksum);
  finish_run(run, s, rec);
  return 0;
}

int cmd_bayes_score(const Settings& s, const RunInfo& run) {
  const Dataset ds = read_dataset(fs::path(s.data));
  const BayesModel model(ds.params);
  const ScoredSet scores = score_dataset(model, ds, ScoreScale::probability);
  write_scores_csv(out_path(s, "scores.csv"), scores, bag_ids(ds));
  const double auc = auroc(scores);
  std::cout << "bags " << ds.size() << "\n" << "auroc " << auc << "\n";
  json rec = run_header(run, s);
  rec["dataset"] = s.data;
  rec["dataset_seed"] = ds.params.seed;
  rec["auroc"] = auc;
  finish_run(run, s, rec);
  return 0;
}

int cmd_handcrafted(const Settings& s, const RunInfo& run) {
  const Dataset ds = read_dataset(fs::path(s.data));
  const ModelSpec spec = handcrafted_model(ds.params, pipeline_kind(s), handcraft_options(s));
  write_text(out_path(s, "model.json"), model_to_json(spec) + "\n");
  const ScoredSet scores = score_model(spec, ds);
  write_scores_csv(out_path(s, "scores.csv"), scores, bag_ids(ds));
  const double auc = auroc(scores);
  const std::size_t n_export = std::min(s.export_attention, ds.size());
  for (std::size_t i = 0; i < n_export; ++i) {
    std::ofstream out(out_path(s, "attention_" + std::to_string(ds.bags[i].id) + ".csv"));
    write_matrix_csv(out, attention_matrix(spec, ds.bags[i]));
  }
  std::cout << "model " << spec.name << " " << s.order << " " << s.pooling << "\n"
            << "auroc " << auc << "\n";
  json rec = run_header(run, s);
  rec["dataset"] = s.data;
  rec["dataset_seed"] = ds.params.seed;
  rec["auroc"] = auc;
  finish_run(run, s, rec);
  return 0;
}

int cmd_train(const Settings& s, const RunInfo& run) {
  Dataset pool;
  if (!s.data.empty()) {
    pool = read_dataset(fs::path(s.data));
  } else {
    pool = sample_dataset(training_params(gen_params(s), s.n_train), s.n_train, s.jobs);
  }
  const GenParams& p = pool.params;
  const auto [train_set, val_set] =
      split_dataset(pool, s.train_fraction, derive_seed(p.seed, kSplitStream));
  const ModelSpec init = init_trainable(p, pipeline_kind(s), derive_seed(p.seed, kInitStream));
  const GridSearchResult grid =
      grid_search(init, train_set, val_set, s.lrs, s.wds, train_config(s), s.jobs);
  const GridRun& best = grid.best_run();

  write_text(out_path(s, "model.json"), model_to_json(best.result.model) + "\n");
  {
    std::ofstream log(out_path(s, "training_log.csv"));
    write_training_log_csv(log, best.result.log);
  }
  {
    std::ofstream out(out_path(s, "grid.csv"));
    out << "lr,weight_decay,best_epoch,epochs_run,best_val_auroc\n";
    out.precision(17);
    for (const GridRun& r : grid.runs)
      out << r.learning_rate << ',' << r.weight_decay << ',' << r.result.best_epoch << ','
          << r.result.epochs_run << ',' << r.result.best_val_auroc << '\n';
  }
  std::cout << "train " << train_set.size() << " val " << val_set.size() << "\n"
            << "best lr " << best.learning_rate << " weight_decay " << best.weight_decay
            << " epoch " << best.result.best_epoch << "\n"
            << "val_auroc " << best.result.best_val_auroc << "\n";

  json rec = run_header(run, s);
  rec["training_seed"] = p.seed;
  rec["learning_rate"] = best.learning_rate;
  rec["weight_decay"] = best.weight_decay;
  rec["val_auroc"] = best.result.best_val_auroc;
  if (!s.test.empty()) {
    const Dataset test = read_dataset(fs::path(s.test));
    const ScoredSet scores = score_model(best.result.model, test);
    write_scores_csv(out_path(s, "scores.csv"), scores, bag_ids(test));
    const double auc = auroc(scores);
    std::cout << "test_auroc " << auc << "\n";
    rec["test"] = s.test;
    rec["test_auroc"] = auc;
  }
  finish_run(run, s, rec);
  return 0;
}

int cmd_bootstrap(const Settings& s, const RunInfo& run) {
  ScoredSet a, b;
  json rec = run_header(run, s);
  if (!s.scores_a.empty() || !s.scores_b.empty()) {
    if (s.scores_a.empty() || s.scores_b.empty())
      throw std::invalid_argument("bootstrap: give both --scores-a and --scores-b");
    a = read_scores_csv(s.scores_a);
    b = read_scores_csv(s.scores_b);
    rec["method_a"] = s.scores_a;
    rec["method_b"] = s.scores_b;
  } else {
    if (s.data.empty()) throw std::invalid_argument("bootstrap: give --data or two score files");
    const Dataset ds = read_dataset(fs::path(s.data));
    a = score_dataset(BayesModel(ds.params), ds, ScoreScale::log_odds);
    const ModelSpec spec = handcrafted_model(ds.params, pipeline_kind(s), handcraft_options(s));
    b = score_model(spec, ds);
    rec["method_a"] = "bayes";
    rec["method_b"] = spec.name + ":" + s.order + ":" + s.pooling;
    rec["dataset"] = s.data;
  }
  const BootstrapResult r = paired_bootstrap(a, b, s.n_resamples, s.seed);
  json out = json::parse(to_json(r));
  out["config_hash"] = to_hex(run.config_hash);
  write_text(out_path(s, "bootstrap.json"), out.dump(2) + "\n");
  std::cout << "mean_diff " << r.mean_diff << "\n"
            << "ci95 [" << r.ci_low << ", " << r.ci_high << "]\n";
  rec["bootstrap"] = out;
  finish_run(run, s, rec);
  return 0;
}

SweepOptions sweep_options(const Settings& s) {
  SweepOptions o;
  o.learning_rates = s.lrs;
  o.weight_decays = s.wds;
  o.train = train_config(s);
  o.handcraft = handcraft_options(s);
  o.train_fraction = s.train_fraction;
  o.jobs = s.jobs;
  o.n_test = s.n_test;
  return o;
}

std::vector<ModelEntry> model_entries(const Settings& s) {
  std::vector<ModelEntry> out;
  for (const auto& m : s.models) out.push_back(parse_model_entry(m));
  return out;
}

json sweep_metadata(const RunInfo& run, const Settings& s) {
  json j = run_header(run, s);
  j["models"] = s.models;
  j["learning_rates"] = s.lrs;
  j["weight_decays"] = s.wds;
  j["max_epochs"] = s.max_epochs;
  j["patience"] = s.patience;
  j["train_fraction"] = s.train_fraction;
  j["n_test"] = s.n_test;
  return j;
}

void write_results(const Settings& s, const std::vector<ResultRow>& rows) {
  std::ofstream out(out_path(s, "results.csv"));
  if (!out) throw std::runtime_error("cannot write results.csv");
  write_results_csv(out, rows);
}

int cmd_sweep_n(const Settings& s, const RunInfo& run) {
  const GenParams base = gen_params(s);
  const std::vector<ModelEntry> models = model_entries(s);
  const GenParams tp = test_set_params(base);
  const Dataset test = sample_dataset(tp, s.n_test, s.jobs);
  const auto rows = sweep_training_size(s.sizes, base, models, test, sweep_options(s));
  write_results(s, rows);
  json meta = sweep_metadata(run, s);
  meta["sizes"] = s.sizes;
  meta["test_policy"] = "one test set shared by every N";
  meta["test_seed"] = tp.seed;
  write_text(out_path(s, "metadata.json"), meta.dump(2) + "\n");
  for (const auto& r : rows)
    std::cout << r.n_train << ' ' << r.method << ' ' << r.order << ' ' << r.pooling << ' ' << r.auroc << "\n";
  finish_run(run, s, meta);
  return 0;
}

int cmd_sweep_delta(const Settings& s, const RunInfo& run) {
  const GenParams base = gen_params(s);
  const std::vector<ModelEntry> models = model_entries(s);
  const auto rows = sweep_delta(s.deltas, base, models, s.n_train, sweep_options(s));
  write_results(s, rows);
  json meta = sweep_metadata(run, s);
  meta["deltas"] = s.deltas;
  meta["n_train"] = s.n_train;
  meta["test_policy"] = "a fresh test set per delta";
  json seeds = json::array();
  for (double d : s.deltas) seeds.push_back({{"delta", d}, {"test_seed", delta_test_params(base, d).seed}});
  meta["test_seeds"] = seeds;
  write_text(out_path(s, "metadata.json"), meta.dump(2) + "\n");
  for (const auto& r : rows)
    std::cout << r.delta << ' ' << r.method << ' ' << r.order << ' ' << r.pooling << ' ' << r.auroc << "\n";
  finish_run(run, s, meta);
  return 0;
}

CLI::Validator pooling_check() {
  return CLI::Validator(
      [](std::string& v) -> std::string {
        try {
          parse_pooling(v);
          return {};
        } catch (const std::invalid_argument&) {
          return "unknown pooling '" + v + "'";
        }
      },
      "POOLING");
}

CLI::Validator order_check() {
  return CLI::Validator(
      [](std::string& v) -> std::string {
        try {
          parse_order(v);
          return {};
        } catch (const std::invalid_argument&) {
          return "unknown order '" + v + "'";
        }
      },
      "ORDER");
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  CLI::App app{"Synthetic correlated multiple-instance learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file with option values; command-line flags take precedence");

  app.add_option("--seed", s.seed, "Master seed")->capture_default_str();
  app.add_option("--out-dir", s.out_dir, "Directory for artifacts")->capture_default_str();
  app.add_option("--jobs", s.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* gen = app.add_option_group("generation");
  gen->add_option("--q-pos", s.gen.q_pos, "Positive-bag probability")->capture_default_str();
  gen->add_option("--s-low", s.gen.s_low, "Minimum instances per bag")->capture_default_str();
  gen->add_option("--s-high", s.gen.s_high, "Maximum instances per bag")->capture_default_str();
  gen->add_option("--num-features", s.gen.num_features, "Features per instance")->capture_default_str();
  gen->add_option("--num-discriminative", s.gen.num_discriminative, "Shifted features")->capture_default_str();
  gen->add_option("--window", s.gen.window, "Signal window length")->capture_default_str();
  gen->add_option("--delta", s.gen.delta, "Mean shift inside the window")->capture_default_str();
  gen->add_option("--mu", s.gen.mu, "Background mean")->capture_default_str();
  gen->add_option("--sigma", s.gen.sigma, "Noise standard deviation")->capture_default_str();

  auto* model = app.add_option_group("model");
  model->add_option("--order", s.order, "prediction or embedding")->check(order_check())->capture_default_str();
  model->add_option("--pooling", s.pooling, "max, mean, abmil, smooth_mean, smooth_max, logsumexp, self_attention")
      ->check(pooling_check())
      ->capture_default_str();
  model->add_flag("--context", s.context, "Convolve over instances with a window kernel first");
  model->add_option("--alpha", s.alpha, "Smoothing strength in [0, 1)")->capture_default_str();
  model->add_option("--epsilon", s.epsilon, "tanh linearization scale for hand-set ABMIL")->capture_default_str();
  model->add_option("--sharpness", s.sharpness, "Attention sharpness (default delta / sigma^2)");

  auto* training = app.add_option_group("training");
  training->add_option("--n-train", s.n_train, "Training pool size (train + validation)")->capture_default_str();
  training->add_option("--lr", s.lrs, "Learning-rate grid")->capture_default_str();
  training->add_option("--wd", s.wds, "Weight-decay grid")->capture_default_str();
  training->add_option("--max-epochs", s.max_epochs, "Epoch budget")->capture_default_str();
  training->add_option("--patience", s.patience, "Early-stopping patience")->capture_default_str();
  training->add_option("--train-fraction", s.train_fraction, "Training share of the pool")->capture_default_str();
  training->add_option("--n-test", s.n_test, "Test-set size for sweeps")->capture_default_str();

  auto* generate = app.add_subcommand("generate", "Sample a dataset and write it with a manifest");
  generate->add_option("--n-bags", s.n_bags, "Number of bags")->capture_default_str();
  generate->add_option("--output", s.output, "Dataset path (default <out-dir>/dataset.smb)");

  auto* bayes_score = app.add_subcommand("bayes-score", "Score a dataset with the exact posterior");
  bayes_score->add_option("--data", s.data, "Dataset file")->required()->check(CLI::ExistingFile);

  auto* handcrafted = app.add_subcommand("handcrafted", "Score a dataset with hand-set model parameters");
  handcrafted->add_option("--data", s.data, "Dataset file")->required()->check(CLI::ExistingFile);
  handcrafted->add_option("--export-attention", s.export_attention,
                          "Write attention weights of the first N bags as CSV (attention poolings)");

  auto* train_cmd = app.add_subcommand("train", "Grid-search and train a model");
  train_cmd->add_option("--data", s.data, "Training pool (default: sample --n-train bags)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--test", s.test, "Test dataset to score")->check(CLI::ExistingFile);

  auto* bootstrap = app.add_subcommand("bootstrap", "Paired bootstrap of an AUROC difference");
  bootstrap->add_option("--data", s.data, "Dataset: compares Bayes with the hand-set model")
      ->check(CLI::ExistingFile);
  bootstrap->add_option("--scores-a", s.scores_a, "Scores CSV of method A")->check(CLI::ExistingFile);
  bootstrap->add_option("--scores-b", s.scores_b, "Scores CSV of method B")->check(CLI::ExistingFile);
  bootstrap->add_option("--n-resamples", s.n_resamples, "Bootstrap resamples")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* sweep_n = app.add_subcommand("sweep-n", "Test AUROC against training-set size");
  sweep_n->add_option("--sizes", s.sizes, "Training-set sizes")->capture_default_str();
  sweep_n->add_option("--models", s.models, "Entries method:order:pooling")->capture_default_str();

  auto* sweep_d = app.add_subcommand("sweep-delta", "Test AUROC against the mean shift");
  sweep_d->add_option("--deltas", s.deltas, "Shift values")->capture_default_str();
  sweep_d->add_option("--models", s.models, "Entries method:order:pooling")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  RunInfo run;
  run.command = app.get_subcommands().front()->get_name();
  run.config_text = resolved_config(s, run.command);
  run.config_hash = config_hash(run.config_text);

  try {
    for (const auto& m : s.models) parse_model_entry(m);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    fs::create_directories(s.out_dir);
    if (run.command == "generate") return cmd_generate(s, run);
    if (run.command == "bayes-score") return cmd_bayes_score(s, run);
    if (run.command == "handcrafted") return cmd_handcrafted(s, run);
    if (run.command == "train") return cmd_train(s, run);
    if (run.command == "bootstrap") return cmd_bootstrap(s, run);
    if (run.command == "sweep-n") return cmd_sweep_n(s, run);
    if (run.command == "sweep-delta") return cmd_sweep_delta(s, run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
