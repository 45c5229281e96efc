#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmil/datagen.hpp"

namespace cmil {

// SMB1 layout (little-endian):
//   "SMB1" | u16 version=1 | u16 reserved=0
//   f64 q_pos | u32 s_low | u32 s_high | u32 M | u32 K | u32 R
//   f64 delta | f64 mu | f64 sigma | u64 seed | u64 N
//   per bag: u32 S | u8 y | i32 u (-1 when absent) | S*M f32, instance-major

class DatasetFormatError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, bad_version, truncated, invalid_content };

  DatasetFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

void write_dataset(const Dataset& ds, std::ostream& out);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Bag ids are assigned sequentially from 0 on read.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

/// 64-bit FNV-1a over the serialized bytes of `ds`.
std::uint64_t dataset_checksum(const Dataset& ds);
std::uint64_t file_checksum(const std::filesystem::path& path);
/// Same hash over an arbitrary byte string.
std::uint64_t bytes_checksum(std::string_view bytes);

std::string to_hex(std::uint64_t value);

/// Writes `<path>.json` describing the parameters, N, positive fraction,
/// checksum and a no-signal flag (delta == 0). `extra` is merged in.
void write_manifest(const Dataset& ds, const std::filesystem::path& dataset_path,
                    std::uint64_t checksum, const std::string& extra_json = "{}");

}  // namespace cmil
