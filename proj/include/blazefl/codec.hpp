#pragma once

// Canonical parameter byte format and the digests computed over it.
//
// Layout: ASCII magic "BFL1", 32-bit little-endian tensor count, then per
// tensor a 32-bit rank, rank x 32-bit dims, and the elements as little-endian
// IEEE-754 single precision in row-major order. The encoding is bit-exact:
// decode(encode(p)) reproduces every value bit pattern, NaN payloads
// included. Round-wise model hashes are SHA-256 over exactly these bytes.

#include <openssl/evp.h>
#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "blazefl/tensor.hpp"

namespace blazefl::codec {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> bytes,
                             std::size_t offset) {
  return static_cast<std::uint32_t>(bytes[offset]) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 8) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 3]) << 24);
}

}  // namespace detail

inline constexpr char kMagic[4] = {'B', 'F', 'L', '1'};

inline std::size_t encoded_size(const ParamLayout& layout) {
  std::size_t n = 8;
  for (const auto& entry : layout) {
    n += 4 + 4 * entry.shape.size() + 4 * entry.numel();
  }
  return n;
}

inline std::vector<std::uint8_t> encode_params(const ModelParams& params) {
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(params.layout));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(params.layout.size()));
  std::size_t offset = 0;
  for (const auto& entry : params.layout) {
    detail::put_u32(out, static_cast<std::uint32_t>(entry.shape.size()));
    for (std::int64_t dim : entry.shape) {
      detail::put_u32(out, static_cast<std::uint32_t>(dim));
    }
    const std::size_t count = entry.numel();
    for (std::size_t i = 0; i < count; ++i) {
      detail::put_u32(out, std::bit_cast<std::uint32_t>(params.values[offset + i]));
    }
    offset += count;
  }
  return out;
}

// The layout is trusted metadata; the byte stream must agree with it exactly.
inline ModelParams decode_params(std::span<const std::uint8_t> bytes,
                                 const ParamLayout& layout) {
  if (bytes.size() != encoded_size(layout)) {
    throw FormatError("decode_params: byte length does not match layout");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("decode_params: bad magic");
  }
  std::size_t pos = 4;
  if (detail::get_u32(bytes, pos) != layout.size()) {
    throw FormatError("decode_params: tensor count does not match layout");
  }
  pos += 4;
  ModelParams params;
  params.layout = layout;
  params.values.resize(layout_numel(layout));
  std::size_t offset = 0;
  for (const auto& entry : layout) {
    if (detail::get_u32(bytes, pos) != entry.shape.size()) {
      throw FormatError("decode_params: rank does not match layout");
    }
    pos += 4;
    for (std::int64_t dim : entry.shape) {
      if (detail::get_u32(bytes, pos) != static_cast<std::uint32_t>(dim)) {
        throw FormatError("decode_params: dim does not match layout");
      }
      pos += 4;
    }
    const std::size_t count = entry.numel();
    for (std::size_t i = 0; i < count; ++i) {
      params.values[offset + i] =
          std::bit_cast<float>(detail::get_u32(bytes, pos));
      pos += 4;
    }
    offset += count;
  }
  return params;
}

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &digest_len,
                 EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256_hex: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * digest_len);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

inline std::uint32_t crc32_of(const std::string& text) {
  return crc32_of(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace blazefl::codec
