#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cmil/dataset_io.hpp"

using namespace cmil;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cmil_test_" + name);
}

DatasetFormatError::Kind read_error_kind(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_dataset(in);
  } catch (const DatasetFormatError& e) {
    return e.kind();
  }
  FAIL("expected a format error");
  return DatasetFormatError::Kind::io;
}

}  // namespace

TEST_CASE("three-bag dataset round-trips every field") {
  GenParams p;
  p.num_features = 4;
  p.num_discriminative = 2;
  p.s_low = 3;
  p.s_high = 6;
  p.q_pos = 0.7;
  p.mu = -0.25;
  p.sigma = 1.75;
  p.seed = 0xdeadbeefcafef00dULL;
  const Dataset ds = sample_dataset(p, 3);

  std::stringstream buf;
  write_dataset(ds, buf);
  const Dataset back = read_dataset(buf);
  CHECK(back.params == ds.params);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.bags[i].label == ds.bags[i].label);
    CHECK(back.bags[i].start_index == ds.bags[i].start_index);
    CHECK(back.bags[i].features == ds.bags[i].features);
  }
  CHECK(back == ds);
}

TEST_CASE("header layout is bit-exact") {
  GenParams p;
  p.num_features = 2;
  p.s_low = p.s_high = 3;
  p.seed = 1;
  const Dataset ds = sample_dataset(p, 1);
  std::ostringstream out;
  write_dataset(ds, out);
  const std::string bytes = out.str();
  const std::size_t header = 4 + 2 + 2 + 8 + 5 * 4 + 3 * 8 + 8 + 8;
  CHECK(bytes.size() == header + 4 + 1 + 4 + 3 * 2 * 4);
  CHECK(bytes.substr(0, 4) == "SMB1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  // u32 s_low follows the f64 q_pos at offset 16.
  CHECK(static_cast<unsigned char>(bytes[16]) == 3);
  // u64 N at the end of the header.
  CHECK(static_cast<unsigned char>(bytes[header - 8]) == 1);
  // Negative bags store u = -1.
  if (ds.bags[0].label == 0) CHECK(bytes.substr(header + 5, 4) == std::string(4, '\xff'));
}

TEST_CASE("serialization is a bijection on random valid datasets") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    GenParams p;
    p.num_features = 1 + rng() % 7;
    p.num_discriminative = 1 + rng() % p.num_features;
    p.s_low = 1 + rng() % 5;
    p.s_high = p.s_low + rng() % 5;
    p.window = 1 + rng() % p.s_low;
    p.q_pos = std::uniform_real_distribution<double>(0, 1)(rng);
    p.delta = std::uniform_real_distribution<double>(0, 4)(rng);
    p.mu = std::uniform_real_distribution<double>(-3, 3)(rng);
    p.sigma = std::uniform_real_distribution<double>(0.1, 3)(rng);
    p.seed = rng();
    const Dataset ds = sample_dataset(p, 1 + rng() % 20);
    std::stringstream buf;
    write_dataset(ds, buf);
    const std::string first = buf.str();
    const Dataset back = read_dataset(buf);
    CHECK(back == ds);
    std::ostringstream again;
    write_dataset(back, again);
    CHECK(again.str() == first);
  }
}

TEST_CASE("large round-trip keeps the checksum") {
  GenParams p;
  p.num_features = 16;
  p.seed = 31;
  const Dataset ds = sample_dataset(p, 10000);
  const auto path = temp_path("large.smb");
  write_dataset(ds, path);
  const std::uint64_t on_disk = file_checksum(path);
  CHECK(on_disk == dataset_checksum(ds));
  const Dataset back = read_dataset(path);
  CHECK(dataset_checksum(back) == on_disk);
  std::filesystem::remove(path);
}

TEST_CASE("format errors are reported distinctly") {
  GenParams p;
  p.num_features = 3;
  p.s_low = 3;
  p.s_high = 5;
  const Dataset ds = sample_dataset(p, 4);
  std::ostringstream out;
  write_dataset(ds, out);
  const std::string good = out.str();

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(read_error_kind(bad_magic) == DatasetFormatError::Kind::bad_magic);

  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(read_error_kind(bad_version) == DatasetFormatError::Kind::bad_version);

  CHECK(read_error_kind(good.substr(0, good.size() - 3)) == DatasetFormatError::Kind::truncated);
  CHECK(read_error_kind(good.substr(0, 6)) == DatasetFormatError::Kind::truncated);

  std::string bad_sigma = good;
  // sigma is the f64 at offset 8 + 8 + 20 + 16 = 52; make it negative.
  bad_sigma[52 + 7] = static_cast<char>(bad_sigma[52 + 7] | 0x80);
  CHECK(read_error_kind(bad_sigma) == DatasetFormatError::Kind::invalid_content);

  CHECK_THROWS_AS(read_dataset(temp_path("does_not_exist.smb")), DatasetFormatError);
}

TEST_CASE("manifest duplicates params and flags no-signal data") {
  GenParams p;
  p.num_features = 2;
  p.delta = 0.0;
  const Dataset ds = sample_dataset(p, 5);
  const auto path = temp_path("manifest.smb");
  write_dataset(ds, path);
  write_manifest(ds, path, file_checksum(path));
  std::ifstream in(path.string() + ".json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["no_signal"] == true);
  CHECK(j["n_bags"] == 5);
  CHECK(j["params"]["num_features"] == 2);
  CHECK(j["checksum"] == to_hex(file_checksum(path)));
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}
