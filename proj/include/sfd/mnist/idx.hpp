#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfd::mnist {

struct IdxParseError : std::runtime_error {
  std::size_t offset;
  IdxParseError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

/// Decoded IDX payload: u8 elements with the header's dimensions.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Parses the canonical big-endian IDX containers: magic 0x00000801 is a
/// 1-D u8 label vector, 0x00000803 a 3-D u8 image tensor.
inline IdxTensor parse_idx(const std::uint8_t* bytes, std::size_t size) {
  auto read_u32 = [&](std::size_t off) -> std::uint32_t {
    if (off + 4 > size) throw IdxParseError("truncated header", off);
    return (static_cast<std::uint32_t>(bytes[off]) << 24) |
           (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[off + 3]);
  };
  const std::uint32_t magic = read_u32(0);
  std::size_t ndims;
  if (magic == 0x00000801u)
    ndims = 1;
  else if (magic == 0x00000803u)
    ndims = 3;
  else
    throw IdxParseError("unsupported IDX magic " + std::to_string(magic), 0);

  IdxTensor t;
  std::size_t total = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    t.dims.push_back(read_u32(4 + 4 * i));
    total *= t.dims.back();
  }
  const std::size_t payload_off = 4 + 4 * ndims;
  if (payload_off + total > size)
    throw IdxParseError("truncated payload, need " + std::to_string(total) + " bytes",
                        payload_off);
  t.data.assign(bytes + payload_off, bytes + payload_off + total);
  return t;
}

inline IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
  return parse_idx(bytes.data(), bytes.size());
}

}  // namespace sfd::mnist
