#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pni/tensor.hpp"

namespace pni {

/**
 * PNIT tensor file, little-endian throughout:
 *
 *   offset 0   4 bytes   magic "PNIT"
 *   offset 4   u8        format version (1)
 *   offset 5   u8        ndim, 1..4
 *   offset 6   u32 x ndim  dims, outermost first
 *   then       f32 x prod(dims)  row-major payload
 *
 * The file must end exactly after the payload.
 *
 * PNIX index files use the same layout with magic "PNIX" and a u32 payload;
 * they carry coreset selections, provenance triples and Voronoi assignments.
 */
inline constexpr std::uint8_t kPnitVersion = 1;

class TensorIoError : public std::runtime_error {
 public:
  enum class Kind {
    kIo,               // open/read/write failure
    kBadMagic,         // not a PNIT/PNIX file
    kBadVersion,       // unknown format version
    kCorruptHeader,    // truncated header, ndim out of range, zero dim
    kPayloadMismatch,  // payload length differs from product of dims
    kNonFinite,        // NaN/Inf payload under strict reading
  };

  TensorIoError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ReadOptions {
  // Reject NaN/Inf payload values.
  bool strict = false;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, ReadOptions opts = {});

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path, ReadOptions opts = {});

struct IndexArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint32_t> data;
};

std::vector<std::uint8_t> encode_index(const IndexArray& a);
IndexArray decode_index(std::span<const std::uint8_t> bytes);

void write_index(const std::filesystem::path& path, const IndexArray& a);
IndexArray read_index(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace pni
