#pragma once

#include <cmath>
#include <stdexcept>

#include "sfd/linalg.hpp"
#include "sfd/rng.hpp"

namespace sfd {

enum class BankMode { standard_basis, random_qr };

/// m mutually orthonormal column vectors in R^d.
struct OrthonormalBank {
  Matrix columns;  // d x m
  BankMode mode = BankMode::standard_basis;
};

/// Standard-basis mode returns the first m canonical basis vectors;
/// random-qr orthonormalizes a Gaussian matrix (modified Gram-Schmidt with
/// one re-orthogonalization pass, positive diagonal for determinism).
inline OrthonormalBank build_orthonormal_bank(std::size_t count, std::size_t dim,
                                              BankMode mode, RngStream stream) {
  if (dim < count)
    throw std::invalid_argument("build_orthonormal_bank: dim < count");
  OrthonormalBank bank;
  bank.mode = mode;
  bank.columns = Matrix(dim, count);
  if (mode == BankMode::standard_basis) {
    for (std::size_t j = 0; j < count; ++j) bank.columns(j, j) = 1.0;
    return bank;
  }
  Matrix& q = bank.columns;
  for (std::size_t j = 0; j < count; ++j)
    for (std::size_t i = 0; i < dim; ++i) q(i, j) = stream.next_gaussian();
  for (std::size_t j = 0; j < count; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < dim; ++i) proj += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < dim; ++i) q(i, j) -= proj * q(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12)
      throw std::runtime_error("build_orthonormal_bank: degenerate draw");
    double sign = q(j, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < dim; ++i) q(i, j) *= sign / norm;
  }
  return bank;
}

}  // namespace sfd
