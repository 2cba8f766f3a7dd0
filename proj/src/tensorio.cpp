#include "pni/tensorio.hpp"

#include <bit>
#include <utility>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pni {

Tensor::Tensor(std::vector<std::uint32_t> shape, float fill)
    : dims(std::move(shape)), data(shape_numel(dims), fill) {}

std::size_t Tensor::numel() const { return shape_numel(dims); }

std::size_t shape_numel(std::span<const std::uint32_t> dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

using Kind = TensorIoError::Kind;

// Shared header codec for PNIT and PNIX.
void encode_header(std::vector<std::uint8_t>& out, const char* magic,
                   std::span<const std::uint32_t> dims) {
  if (dims.empty() || dims.size() > 4) {
    throw TensorIoError(Kind::kCorruptHeader, "ndim must be in [1,4], got " + std::to_string(dims.size()));
  }
  out.insert(out.end(), magic, magic + 4);
  out.push_back(kPnitVersion);
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
}

std::vector<std::uint32_t> decode_header(std::span<const std::uint8_t> bytes, const char* magic,
                                         std::size_t& offset) {
  if (bytes.size() < 6) {
    throw TensorIoError(Kind::kCorruptHeader, "truncated header");
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw TensorIoError(Kind::kBadMagic, std::string("bad magic, expected ") + magic);
  }
  if (bytes[4] != kPnitVersion) {
    throw TensorIoError(Kind::kBadVersion, "unsupported version " + std::to_string(bytes[4]));
  }
  const std::size_t ndim = bytes[5];
  if (ndim < 1 || ndim > 4) {
    throw TensorIoError(Kind::kCorruptHeader, "ndim out of range: " + std::to_string(ndim));
  }
  if (bytes.size() < 6 + 4 * ndim) {
    throw TensorIoError(Kind::kCorruptHeader, "truncated dims");
  }
  std::vector<std::uint32_t> dims(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes.data() + 6 + 4 * i);
  }
  offset = 6 + 4 * ndim;
  return dims;
}

void check_payload(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t numel) {
  const std::size_t available = bytes.size() - offset;
  if (available != numel * 4) {
    throw TensorIoError(Kind::kPayloadMismatch,
                        "payload mismatch: dims imply " + std::to_string(numel * 4) + " bytes, found " +
                            std::to_string(available));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.data.size() != t.numel()) {
    throw TensorIoError(Kind::kPayloadMismatch, "payload mismatch: tensor data does not match dims");
  }
  std::vector<std::uint8_t> out;
  out.reserve(6 + 4 * t.dims.size() + 4 * t.data.size());
  encode_header(out, "PNIT", t.dims);
  for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, ReadOptions opts) {
  std::size_t offset = 0;
  Tensor t;
  t.dims = decode_header(bytes, "PNIT", offset);
  const std::size_t n = shape_numel(t.dims);
  check_payload(bytes, offset, n);
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.data[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
    if (opts.strict && !std::isfinite(t.data[i])) {
      throw TensorIoError(Kind::kNonFinite, "non-finite value at element " + std::to_string(i));
    }
  }
  return t;
}

std::vector<std::uint8_t> encode_index(const IndexArray& a) {
  if (a.data.size() != shape_numel(a.dims)) {
    throw TensorIoError(Kind::kPayloadMismatch, "payload mismatch: index data does not match dims");
  }
  std::vector<std::uint8_t> out;
  encode_header(out, "PNIX", a.dims);
  for (auto v : a.data) put_u32(out, v);
  return out;
}

IndexArray decode_index(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  IndexArray a;
  a.dims = decode_header(bytes, "PNIX", offset);
  const std::size_t n = shape_numel(a.dims);
  check_payload(bytes, offset, n);
  a.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.data[i] = get_u32(bytes.data() + offset + 4 * i);
  return a;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TensorIoError(Kind::kIo, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw TensorIoError(Kind::kIo, "read failure on " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw TensorIoError(Kind::kIo, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw TensorIoError(Kind::kIo, "write failure on " + path.string());
  }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path, ReadOptions opts) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_tensor(bytes, opts);
  } catch (const TensorIoError& e) {
    throw TensorIoError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_index(const std::filesystem::path& path, const IndexArray& a) {
  write_file_bytes(path, encode_index(a));
}

IndexArray read_index(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_index(bytes);
  } catch (const TensorIoError& e) {
    throw TensorIoError(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace pni
