#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sfd/linalg.hpp"
#include "sfd/rng.hpp"

namespace sfd {

/// A probability with its Monte-Carlo uncertainty. Exact results carry
/// stderr 0 and n_draws 0.
struct ProbEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n_draws = 0;
};

/// Phi(x), the standard normal CDF.
inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

namespace detail {

struct GaussLegendre48 {
  std::array<double, 48> node;
  std::array<double, 48> weight;

  GaussLegendre48() {
    // Newton iteration on P_48; standard construction, exact to double
    // precision. Nodes on [-1, 1].
    constexpr int n = 48;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      node[i] = x;
      weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendre48& gl48() {
  static const GaussLegendre48 table;
  return table;
}

}  // namespace detail

/// P(Z1 > a, Z2 > b) for standard bivariate normal with correlation rho.
/// Quadrature over the classical single-integral reduction
///   L(a,b,rho) = Phi(-a)Phi(-b)
///              + (1/2pi) \int_0^{asin rho} exp(-(a^2+b^2-2ab sin t)/(2cos^2 t)) dt,
/// whose integrand is smooth over the whole correlation range.
inline double bvn_upper_orthant(double a, double b, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0))
    throw std::domain_error("bvn_upper_orthant: |rho| > 1");
  if (rho == 1.0) return std_normal_cdf(-std::max(a, b));
  if (rho == -1.0) {
    const double v = 1.0 - std_normal_cdf(a) - std_normal_cdf(b);
    return v > 0.0 ? v : 0.0;
  }

  const auto& gl = detail::gl48();
  const double upper = std::asin(rho);
  const double half = 0.5 * upper;
  const double aa = a * a, bb = b * b, ab = a * b;
  double integral = 0.0;
  for (int i = 0; i < 48; ++i) {
    const double t = half + half * gl.node[i];
    const double s = std::sin(t);
    const double c2 = 1.0 - s * s;
    integral += gl.weight[i] * std::exp(-(aa + bb - 2.0 * ab * s) / (2.0 * c2));
  }
  integral *= half / 6.283185307179586476925286766559;
  double v = std_normal_cdf(-a) * std_normal_cdf(-b) + integral;
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return v;
}

/// Monte-Carlo estimate of P(all coordinates > 0) for N(mean, cov).
inline ProbEstimate mvn_orthant_mc(const std::vector<double>& mean, const Matrix& cov,
                                   std::uint64_t n_draws, RngStream stream) {
  if (n_draws < 1) throw std::invalid_argument("mvn_orthant_mc: n_draws < 1");
  const std::size_t m = mean.size();
  if (cov.rows != m || cov.cols != m)
    throw std::invalid_argument("mvn_orthant_mc: cov shape mismatch");
  const Matrix l = cholesky(cov);
  std::vector<double> g(m);
  std::uint64_t hits = 0;
  for (std::uint64_t it = 0; it < n_draws; ++it) {
    for (std::size_t i = 0; i < m; ++i) g[i] = stream.next_gaussian();
    bool all_pos = true;
    for (std::size_t i = 0; i < m && all_pos; ++i) {
      double z = mean[i];
      for (std::size_t k = 0; k <= i; ++k) z += l(i, k) * g[k];
      all_pos = z > 0.0;
    }
    hits += all_pos;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n_draws);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n_draws)), n_draws};
}

/// Small-noise bound eps = 1 - Phi(1/(sigma * n_total))^K, evaluated through
/// log1p/expm1 so tiny tail masses survive.
inline double epsilon_bound(double sigma, int n_total, int K) {
  if (!(sigma > 0.0) || n_total < 1 || K < 2)
    throw std::invalid_argument("epsilon_bound: bad arguments");
  const double x = 1.0 / (sigma * static_cast<double>(n_total));
  const double q = 0.5 * std::erfc(x * 0.70710678118654752440084436210485);
  return -std::expm1(static_cast<double>(K) * std::log1p(-q));
}

}  // namespace sfd
