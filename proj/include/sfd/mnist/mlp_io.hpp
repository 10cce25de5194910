#pragma once

#include <fstream>
#include <string>

#include "sfd/mnist/mlp.hpp"
#include "sfd/serialize.hpp"

namespace sfd::mnist {

/// MLP payload of the SFDM container: u32 in, hidden, out dims; then
/// f32 W1 (in x hidden), b1, W2 (hidden x out), b2, all row-major.
inline void save_mlp(const MlpModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_mlp: cannot open " + path);
  sfd::detail::write_bytes(os, "SFDM", 4);
  sfd::detail::write_pod<std::uint32_t>(os, kModelKindMlp);
  sfd::detail::write_pod<std::uint32_t>(os, kInputDim);
  sfd::detail::write_pod<std::uint32_t>(os, kHidden);
  sfd::detail::write_pod<std::uint32_t>(os, kClasses);
  sfd::detail::write_bytes(os, model.w1.data(), model.w1.size() * sizeof(float));
  sfd::detail::write_bytes(os, model.b1.data(), model.b1.size() * sizeof(float));
  sfd::detail::write_bytes(os, model.w2.data(), model.w2.size() * sizeof(float));
  sfd::detail::write_bytes(os, model.b2.data(), model.b2.size() * sizeof(float));
  if (!os) throw std::runtime_error("save_mlp: write failed for " + path);
}

inline MlpModel load_mlp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_mlp: cannot open " + path);
  sfd::detail::expect_magic(is, "SFDM");
  if (sfd::detail::read_pod<std::uint32_t>(is) != kModelKindMlp)
    throw std::runtime_error("load_mlp: not an MLP container: " + path);
  if (sfd::detail::read_pod<std::uint32_t>(is) != kInputDim ||
      sfd::detail::read_pod<std::uint32_t>(is) != kHidden ||
      sfd::detail::read_pod<std::uint32_t>(is) != kClasses)
    throw std::runtime_error("load_mlp: unexpected dimensions in " + path);
  MlpModel model;
  sfd::detail::read_bytes(is, model.w1.data(), model.w1.size() * sizeof(float));
  sfd::detail::read_bytes(is, model.b1.data(), model.b1.size() * sizeof(float));
  sfd::detail::read_bytes(is, model.w2.data(), model.w2.size() * sizeof(float));
  sfd::detail::read_bytes(is, model.b2.data(), model.b2.size() * sizeof(float));
  return model;
}

}  // namespace sfd::mnist
