#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "cmil_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const fs::path log = scratch() / "last_output.txt";
  const std::string cmd = std::string(CMIL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream buf;
  buf << in.rdbuf();
  r.output = buf.str();
  return r;
}

std::string value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " ");
  REQUIRE(pos != std::string::npos);
  std::istringstream in(text.substr(pos + key.size() + 1));
  std::string v;
  in >> v;
  return v;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

std::string dir(const std::string& name) { return (scratch() / name).string(); }

}  // namespace

TEST_CASE("generate is reproducible and writes a manifest") {
  const std::string common = "generate --n-bags 300 --num-features 16 --seed 7";
  const Run a = cli(common + " --out-dir " + dir("gen_a"));
  const Run b = cli(common + " --out-dir " + dir("gen_b"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(value_after(a.output, "bags") == "300");
  CHECK(value_after(a.output, "checksum") == value_after(b.output, "checksum"));
  const auto manifest = read_json(dir("gen_a") + "/dataset.smb.json");
  CHECK(manifest["checksum"] == value_after(a.output, "checksum"));
  CHECK(manifest["no_signal"] == false);
  CHECK(manifest["seed"] == 7);
  CHECK(manifest.contains("config_hash"));

  SUBCASE("resolved config regenerates the same file") {
    const Run c = cli("--config " + dir("gen_a") + "/resolved_config.ini generate --out-dir " + dir("gen_c"));
    REQUIRE(c.code == 0);
    CHECK(value_after(c.output, "checksum") == value_after(a.output, "checksum"));
    CHECK(read_json(dir("gen_c") + "/run.json")["config_hash"] ==
          read_json(dir("gen_a") + "/run.json")["config_hash"]);
  }
  SUBCASE("flags override config keys") {
    std::ofstream(dir("override.ini")) << "seed = 7\nnum-features = 16\n\n[generate]\nn-bags = 50\n";
    const Run c = cli("--config " + dir("override.ini") + " generate --n-bags 300 --out-dir " + dir("gen_d"));
    REQUIRE(c.code == 0);
    CHECK(value_after(c.output, "checksum") == value_after(a.output, "checksum"));
  }
}

TEST_CASE("default parameters produce a valid dataset") {
  const Run r = cli("generate --n-bags 20 --out-dir " + dir("gen_default"));
  REQUIRE(r.code == 0);
  const auto manifest = read_json(dir("gen_default") + "/dataset.smb.json");
  CHECK(manifest["params"]["num_features"] == 768);
  CHECK(manifest["params"]["window"] == 3);
  CHECK(cli("bayes-score --data " + dir("gen_default") + "/dataset.smb --out-dir " + dir("score_default")).code == 0);
}

TEST_CASE("bayes-score") {
  SUBCASE("no-signal data scores at chance") {
    REQUIRE(cli("generate --n-bags 1000 --num-features 8 --delta 0 --seed 2 --out-dir " + dir("gen_null")).code == 0);
    CHECK(read_json(dir("gen_null") + "/dataset.smb.json")["no_signal"] == true);
    const Run r = cli("bayes-score --data " + dir("gen_null") + "/dataset.smb --out-dir " + dir("score_null"));
    REQUIRE(r.code == 0);
    CHECK(std::abs(std::stod(value_after(r.output, "auroc")) - 0.5) <= 0.05);
    std::ifstream csv(dir("score_null") + "/scores.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "bag_id,label,score");
  }
  SUBCASE("the ceiling agrees across two independent test sets") {
    double auc[2];
    for (int k = 0; k < 2; ++k) {
      const std::string d = dir("gen_ceiling" + std::to_string(k));
      REQUIRE(cli("generate --n-bags 1000 --seed " + std::to_string(100 + k) + " --out-dir " + d).code == 0);
      const Run r = cli("bayes-score --data " + d + "/dataset.smb --out-dir " + d);
      REQUIRE(r.code == 0);
      auc[k] = std::stod(value_after(r.output, "auroc"));
      fs::remove(d + "/dataset.smb");
    }
    MESSAGE("ceiling " << auc[0] << " " << auc[1]);
    CHECK(std::abs(auc[0] - auc[1]) <= 0.02);
  }
  SUBCASE("missing or corrupt input fails") {
    CHECK(cli("bayes-score --data " + dir("does_not_exist.smb")).code != 0);
    std::ofstream(dir("corrupt.smb")) << "SMB1 but not really";
    CHECK(cli("bayes-score --data " + dir("corrupt.smb") + " --out-dir " + dir("score_bad")).code == 1);
  }
}

TEST_CASE("usage errors exit with usage text") {
  REQUIRE(cli("generate --n-bags 30 --num-features 4 --out-dir " + dir("gen_small")).code == 0);
  const Run r = cli("handcrafted --pooling median --data " + dir("gen_small") + "/dataset.smb");
  CHECK(r.code == 2);
  CHECK(r.output.find("unknown pooling") != std::string::npos);
  CHECK(r.output.find("Usage:") != std::string::npos);
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("sweep-n --models nonsense").code == 2);
}

TEST_CASE("handcrafted, train and bootstrap artifacts") {
  const std::string d = dir("gen_models");
  REQUIRE(cli("generate --n-bags 400 --num-features 16 --seed 4 --out-dir " + d).code == 0);
  const std::string data = d + "/dataset.smb";

  const Run hc = cli("handcrafted --data " + data + " --context --out-dir " + dir("hc"));
  REQUIRE(hc.code == 0);
  CHECK(fs::exists(dir("hc") + "/model.json"));
  CHECK(std::stod(value_after(hc.output, "auroc")) > 0.8);

  const Run attn = cli("handcrafted --data " + data + " --pooling self_attention --context --export-attention 2 --out-dir " +
                       dir("hc_attn"));
  REQUIRE(attn.code == 0);
  CHECK(fs::exists(dir("hc_attn") + "/attention_0.csv"));
  CHECK(fs::exists(dir("hc_attn") + "/attention_1.csv"));

  const Run tr = cli("train --num-features 16 --seed 4 --n-train 200 --lr 0.1 --wd 0 --max-epochs 40 --pooling mean --test " +
                     data + " --out-dir " + dir("train"));
  REQUIRE(tr.code == 0);
  for (const char* f : {"model.json", "training_log.csv", "grid.csv", "scores.csv", "run.json", "resolved_config.ini"})
    CHECK(fs::exists(dir("train") + "/" + f));

  const Run bs = cli("bootstrap --data " + data + " --context --n-resamples 200 --seed 5 --out-dir " + dir("boot"));
  REQUIRE(bs.code == 0);
  const auto j = read_json(dir("boot") + "/bootstrap.json");
  CHECK(j["n_resamples"] == 200);
  CHECK(j["seed"] == 5);
  CHECK(j["ci_low"].get<double>() <= j["ci_high"].get<double>());
  CHECK(j.contains("config_hash"));

  SUBCASE("from two score files") {
    REQUIRE(cli("bayes-score --data " + data + " --out-dir " + dir("bayes_scores")).code == 0);
    const Run same = cli("bootstrap --scores-a " + dir("bayes_scores") + "/scores.csv --scores-b " +
                         dir("bayes_scores") + "/scores.csv --n-resamples 50 --out-dir " + dir("boot_same"));
    REQUIRE(same.code == 0);
    const auto k = read_json(dir("boot_same") + "/bootstrap.json");
    CHECK(k["mean_diff"] == 0.0);
    CHECK(k["ci_low"] == 0.0);
    CHECK(k["ci_high"] == 0.0);
  }
}

TEST_CASE("sweeps write one row per cell") {
  const std::string grid = "--num-features 16 --lr 0.1 --wd 0 --max-epochs 20 --n-test 300";
  const Run n = cli("sweep-n " + grid + " --sizes 100 400 --out-dir " + dir("sweep_n"));
  REQUIRE(n.code == 0);
  std::ifstream csv(dir("sweep_n") + "/results.csv");
  std::string line;
  std::getline(csv, line);
  int rows = 0, bayes = 0;
  while (std::getline(csv, line)) {
    ++rows;
    if (line.rfind("bayes,", 0) == 0) ++bayes;
  }
  CHECK(rows == 2 * 5);
  CHECK(bayes == 2);
  const auto meta = read_json(dir("sweep_n") + "/metadata.json");
  CHECK(meta["sizes"] == nlohmann::json::array({100, 400}));
  CHECK(meta.contains("test_policy"));
  CHECK(meta.contains("test_seed"));

  const Run dl = cli("sweep-delta " + grid + " --deltas 0 2 --n-train 100 --models handcrafted-context:embedding:max --out-dir " +
                     dir("sweep_d"));
  REQUIRE(dl.code == 0);
  const auto dmeta = read_json(dir("sweep_d") + "/metadata.json");
  CHECK(dmeta["test_seeds"].size() == 2);
  CHECK(dmeta["n_train"] == 100);
}
