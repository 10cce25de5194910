#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/generative.hpp"
#include "sfd/models.hpp"

namespace sfd {

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw std::runtime_error("container truncated");
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  read_bytes(is, &v, sizeof(T));
  return v;
}

inline void expect_magic(std::istream& is, const char expected[4]) {
  char m[4];
  read_bytes(is, m, 4);
  if (std::memcmp(m, expected, 4) != 0)
    throw std::runtime_error(std::string("bad magic, expected ") +
                             std::string(expected, 4));
}

}  // namespace detail

/// SFDB: sample-batch cache. Little-endian layout:
/// magic "SFDB"; u32 K, d_v, d_s, d, n; n u16 labels; n*(d_v+d_s)*d f64
/// feature values, row-major.
inline void save_batch(const SampleBatch& batch, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_batch: cannot open " + path);
  detail::write_bytes(os, "SFDB", 4);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(batch.K));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(batch.d_v));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(batch.d_s));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(batch.d));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(batch.n));
  detail::write_bytes(os, batch.y.data(), batch.y.size() * sizeof(std::uint16_t));
  detail::write_bytes(os, batch.x.data(), batch.x.size() * sizeof(double));
  if (!os) throw std::runtime_error("save_batch: write failed for " + path);
}

inline SampleBatch load_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_batch: cannot open " + path);
  detail::expect_magic(is, "SFDB");
  SampleBatch b;
  b.K = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  b.d_v = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  b.d_s = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  b.d = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  b.n = static_cast<std::int64_t>(detail::read_pod<std::uint32_t>(is));
  b.y.resize(static_cast<std::size_t>(b.n));
  detail::read_bytes(is, b.y.data(), b.y.size() * sizeof(std::uint16_t));
  b.x.resize(static_cast<std::size_t>(b.n) * (b.d_v + b.d_s) * b.d);
  detail::read_bytes(is, b.x.data(), b.x.size() * sizeof(double));
  return b;
}

/// SFDM: model container, same family. Layout: magic "SFDM"; u32 kind
/// (1 = linear classifier, 2 = two-layer MLP); kind-specific payload.
/// Linear payload: u32 K, d, n_features; n_features u32 mask multiplicities;
/// f64 scale; d*K f64 classifier, row-major.
inline constexpr std::uint32_t kModelKindLinear = 1;
inline constexpr std::uint32_t kModelKindMlp = 2;

inline void save_model(const LinearModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_model: cannot open " + path);
  detail::write_bytes(os, "SFDM", 4);
  detail::write_pod<std::uint32_t>(os, kModelKindLinear);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(model.w.cols));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(model.w.rows));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(model.mask.n_features()));
  for (int m : model.mask.multiplicity)
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(m));
  detail::write_pod<double>(os, model.scale);
  detail::write_bytes(os, model.w.data.data(), model.w.data.size() * sizeof(double));
  if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

inline LinearModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_model: cannot open " + path);
  detail::expect_magic(is, "SFDM");
  if (detail::read_pod<std::uint32_t>(is) != kModelKindLinear)
    throw std::runtime_error("load_model: not a linear-model container: " + path);
  const auto k = detail::read_pod<std::uint32_t>(is);
  const auto d = detail::read_pod<std::uint32_t>(is);
  const auto nf = detail::read_pod<std::uint32_t>(is);
  LinearModel model;
  model.mask.multiplicity.resize(nf);
  for (auto& m : model.mask.multiplicity)
    m = static_cast<int>(detail::read_pod<std::uint32_t>(is));
  model.scale = detail::read_pod<double>(is);
  model.w = Matrix(d, k);
  detail::read_bytes(is, model.w.data.data(), model.w.data.size() * sizeof(double));
  return model;
}

}  // namespace sfd
