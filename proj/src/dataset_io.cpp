#include "cmil/dataset_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <streambuf>
#include <vector>

#include <json.hpp>

namespace cmil {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'M', 'B', '1'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

  void flush_to(std::ostream& out) {
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }

 private:
  void put_le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void fill(std::size_t n, const char* what) {
    buf_.resize(n);
    pos_ = 0;
    in_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw DatasetFormatError(DatasetFormatError::Kind::truncated,
                               std::string("dataset truncated while reading ") + what);
  }

  std::uint8_t u8() { return buf_[pos_++]; }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get_le(4))); }
  std::uint64_t u64() { return get_le(8); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(4))); }
  double f64() { return std::bit_cast<double>(get_le(8)); }

 private:
  std::uint64_t get_le(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

class Fnv1aBuf : public std::streambuf {
 public:
  std::uint64_t hash() const { return hash_; }

 protected:
  int_type overflow(int_type ch) override {
    if (!traits_type::eq_int_type(ch, traits_type::eof())) add(static_cast<unsigned char>(ch));
    return traits_type::not_eof(ch);
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    for (std::streamsize i = 0; i < n; ++i) add(static_cast<unsigned char>(s[i]));
    return n;
  }

 private:
  void add(unsigned char c) {
    hash_ ^= c;
    hash_ *= 0x100000001b3ULL;
  }
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

[[noreturn]] void invalid(const std::string& what) {
  throw DatasetFormatError(DatasetFormatError::Kind::invalid_content, what);
}

}  // namespace

void write_dataset(const Dataset& ds, std::ostream& out) {
  const GenParams& p = ds.params;
  ByteWriter w;
  w.raw(kMagic.data(), kMagic.size());
  w.u16(kDatasetFormatVersion);
  w.u16(0);
  w.f64(p.q_pos);
  w.u32(p.s_low);
  w.u32(p.s_high);
  w.u32(p.num_features);
  w.u32(p.num_discriminative);
  w.u32(p.window);
  w.f64(p.delta);
  w.f64(p.mu);
  w.f64(p.sigma);
  w.u64(p.seed);
  w.u64(ds.bags.size());
  w.flush_to(out);

  for (const Bag& bag : ds.bags) {
    if (bag.features.cols() != static_cast<Eigen::Index>(p.num_features))
      throw std::invalid_argument("write_dataset: bag feature count differs from params");
    w.u32(static_cast<std::uint32_t>(bag.features.rows()));
    w.u8(static_cast<std::uint8_t>(bag.label));
    w.i32(bag.start_index ? *bag.start_index : -1);
    const float* data = bag.features.data();
    for (Eigen::Index k = 0; k < bag.features.size(); ++k) w.f32(data[k]);
    w.flush_to(out);
  }
  if (!out) throw DatasetFormatError(DatasetFormatError::Kind::io, "write_dataset: stream error");
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DatasetFormatError(DatasetFormatError::Kind::io, "cannot open for writing: " + path.string());
  write_dataset(ds, out);
  out.close();
  if (!out) throw DatasetFormatError(DatasetFormatError::Kind::io, "write failed: " + path.string());
}

Dataset read_dataset(std::istream& in) {
  ByteReader r(in);
  r.fill(8, "header");
  std::array<char, 4> magic{};
  for (auto& c : magic) c = static_cast<char>(r.u8());
  if (magic != kMagic)
    throw DatasetFormatError(DatasetFormatError::Kind::bad_magic, "not an SMB1 dataset (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kDatasetFormatVersion)
    throw DatasetFormatError(DatasetFormatError::Kind::bad_version,
                             "unsupported dataset version " + std::to_string(version));
  r.u16();

  Dataset ds;
  GenParams& p = ds.params;
  r.fill(8 + 5 * 4 + 3 * 8 + 8 + 8, "parameters");
  p.q_pos = r.f64();
  p.s_low = r.u32();
  p.s_high = r.u32();
  p.num_features = r.u32();
  p.num_discriminative = r.u32();
  p.window = r.u32();
  p.delta = r.f64();
  p.mu = r.f64();
  p.sigma = r.f64();
  p.seed = r.u64();
  const std::uint64_t n = r.u64();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    invalid(e.what());
  }

  const auto M = static_cast<Eigen::Index>(p.num_features);
  ds.bags.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t i = 0; i < n; ++i) {
    r.fill(4 + 1 + 4, "bag header");
    const std::uint32_t S = r.u32();
    const std::uint8_t y = r.u8();
    const std::int32_t u = r.i32();
    if (S < p.s_low || S > p.s_high) invalid("bag " + std::to_string(i) + ": size out of range");
    if (y > 1) invalid("bag " + std::to_string(i) + ": label must be 0 or 1");
    if (y == 0 && u != -1) invalid("bag " + std::to_string(i) + ": negative bag with start index");
    if (y == 1 && (u < 1 || u > static_cast<std::int32_t>(S - p.window + 1)))
      invalid("bag " + std::to_string(i) + ": start index out of range");

    Bag bag;
    bag.id = i;
    bag.label = y;
    if (y == 1) bag.start_index = u;
    bag.features.resize(S, M);
    r.fill(static_cast<std::size_t>(S) * static_cast<std::size_t>(M) * 4, "features");
    float* data = bag.features.data();
    for (Eigen::Index k = 0; k < bag.features.size(); ++k) data[k] = r.f32();
    ds.bags.push_back(std::move(bag));
  }
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetFormatError(DatasetFormatError::Kind::io, "cannot open: " + path.string());
  return read_dataset(in);
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  Fnv1aBuf buf;
  std::ostream out(&buf);
  write_dataset(ds, out);
  return buf.hash();
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetFormatError(DatasetFormatError::Kind::io, "cannot open: " + path.string());
  Fnv1aBuf buf;
  std::ostream out(&buf);
  out << in.rdbuf();
  return buf.hash();
}

std::uint64_t bytes_checksum(std::string_view bytes) {
  Fnv1aBuf buf;
  std::ostream out(&buf);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return buf.hash();
}

std::string to_hex(std::uint64_t value) {
  char text[17];
  std::snprintf(text, sizeof text, "%016llx", static_cast<unsigned long long>(value));
  return text;
}

void write_manifest(const Dataset& ds, const std::filesystem::path& dataset_path,
                    std::uint64_t checksum, const std::string& extra_json) {
  const GenParams& p = ds.params;
  nlohmann::ordered_json j;
  j["format"] = "SMB1";
  j["version"] = kDatasetFormatVersion;
  j["params"] = {{"q_pos", p.q_pos},   {"s_low", p.s_low},
                 {"s_high", p.s_high}, {"num_features", p.num_features},
                 {"num_discriminative", p.num_discriminative},
                 {"window", p.window}, {"delta", p.delta},
                 {"mu", p.mu},         {"sigma", p.sigma},
                 {"seed", p.seed}};
  j["n_bags"] = ds.size();
  j["positive_fraction"] = positive_fraction(ds);
  j["checksum"] = to_hex(checksum);
  j["no_signal"] = p.delta == 0.0;
  j.update(nlohmann::ordered_json::parse(extra_json));

  std::ofstream out(dataset_path.string() + ".json");
  if (!out) throw DatasetFormatError(DatasetFormatError::Kind::io, "cannot write manifest");
  out << j.dump(2) << '\n';
}

}  // namespace cmil
