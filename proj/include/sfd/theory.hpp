#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sfd/normal.hpp"
#include "sfd/rng.hpp"

namespace sfd {

/// Feature-count description of a two-model comparison.
struct ModelConfig {
  int n_v1 = 0, n_s1 = 0;
  int n_v2 = 0, n_s2 = 0;
  int n_vo = 0, n_so = 0;
  double p = 0.0;
  int K = 3;

  void validate() const {
    if (K < 2 || n_v1 < 0 || n_s1 < 0 || n_v2 < 0 || n_s2 < 0)
      throw std::invalid_argument("ModelConfig: negative counts");
    if (n_vo < 0 || n_vo > std::min(n_v1, n_v2) || n_so < 0 || n_so > std::min(n_s1, n_s2))
      throw std::invalid_argument("ModelConfig: overlap exceeds component counts");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ModelConfig: p outside [0,1]");
  }
};

/// Orthant probability P(eta_i > 0 for all i) of the (K-1)-dimensional
/// Gaussian eta ~ N(x 1, M) with M_ii = p(K+2-pK)/K and M_ij = p(K+1-pK)/K.
/// Exact (quadrature) for K <= 3, Monte Carlo with stderr above that.
inline ProbEstimate fp(double x, double p, int K, std::uint64_t mc_draws = 4000000,
                       RngStream mc_stream = RngStream(0x5fd00001ULL)) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("fp: p outside [0,1]");
  if (K < 2) throw std::invalid_argument("fp: K < 2");
  if (p == 0.0) return {x > 0.0 ? 1.0 : 0.0, 0.0, 0};
  const double var = p * (K + 2 - p * K) / K;
  const double cov = p * (K + 1 - p * K) / K;
  const double sd = std::sqrt(var);
  if (K == 2) return {std_normal_cdf(x / sd), 0.0, 0};
  if (K == 3) {
    const double a = -x / sd;
    return {bvn_upper_orthant(a, a, cov / var), 0.0, 0};
  }
  std::vector<double> mean(static_cast<std::size_t>(K - 1), x);
  Matrix m(static_cast<std::size_t>(K - 1), static_cast<std::size_t>(K - 1), cov);
  for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(K); ++i) m(i, i) = var;
  return mvn_orthant_mc(mean, m, mc_draws, mc_stream);
}

namespace detail {

inline std::vector<double> log_factorials(std::size_t up_to) {
  std::vector<double> table{0.0};
  while (table.size() <= up_to)
    table.push_back(table.back() + std::log(static_cast<double>(table.size())));
  return table;
}

/// Enumerates compositions of `total` into `parts` nonnegative integers.
template <typename F>
void for_each_composition(int total, int parts, std::vector<int>& buf, int pos, F&& fn) {
  if (pos == parts - 1) {
    buf[static_cast<std::size_t>(pos)] = total;
    fn(buf);
    return;
  }
  for (int v = 0; v <= total; ++v) {
    buf[static_cast<std::size_t>(pos)] = v;
    for_each_composition(total - v, parts, buf, pos + 1, fn);
  }
}

inline double compositions_count(int total, int parts) {
  double c = 1.0;
  for (int i = 1; i < parts; ++i) c = c * (total + i) / i;
  return c;
}

}  // namespace detail

/// Exact small-noise OOD accuracy by enumeration: the spurious pool splits
/// into a non-overlap pool of size n_s - 2 n_so (unit coefficient) and an
/// overlap pool of size n_so (coefficient C); each feature keeps its class
/// column with probability 1-p+p/K or lands on a specific wrong class with
/// probability p/K. Outcomes score 1 / 1/(N+1) / 0 by margin sign and tie
/// count. n_v and n_s count features with multiplicity (two-model sums for
/// composed predictors).
inline double g_exact(int n_v, int n_s, int n_vo, int n_so, double C, double p, int K) {
  if (K < 2) throw std::invalid_argument("g_exact: K < 2");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("g_exact: p outside [0,1]");
  const int pool = n_s - 2 * n_so;
  if (pool < 0 || n_so < 0 || n_vo < 0)
    throw std::invalid_argument("g_exact: inconsistent counts");
  if (detail::compositions_count(pool, K) * detail::compositions_count(n_so, K) > 1e8)
    throw std::invalid_argument("g_exact: enumeration too large");

  const double inv_shift = (n_v - 2 * n_vo) + C * n_vo;
  const double stay = 1.0 - p + p / K;
  const double move = p / K;
  const double log_stay = stay > 0.0 ? std::log(stay) : -std::numeric_limits<double>::infinity();
  const double log_move = move > 0.0 ? std::log(move) : -std::numeric_limits<double>::infinity();
  const std::vector<double> lf =
      detail::log_factorials(static_cast<std::size_t>(std::max(pool, n_so)));

  // Composition layout: index 0 = stayed, 1..K-1 = landed on wrong class l.
  std::vector<int> r(static_cast<std::size_t>(K)), o(static_cast<std::size_t>(K));
  double sum = 0.0, kahan = 0.0;
  auto add = [&](double term) {
    const double y = term - kahan;
    const double t = sum + y;
    kahan = (t - sum) - y;
    sum = t;
  };

  auto log_multinomial = [&](const std::vector<int>& counts, int total) {
    double lp = lf[static_cast<std::size_t>(total)];
    if (counts[0] > 0) lp += counts[0] * log_stay;
    lp -= lf[static_cast<std::size_t>(counts[0])];
    for (int l = 1; l < K; ++l) {
      const int c = counts[static_cast<std::size_t>(l)];
      if (c > 0) lp += c * log_move;
      lp -= lf[static_cast<std::size_t>(c)];
    }
    return lp;
  };
  auto degenerate = [&](const std::vector<int>& counts) {
    if (stay == 0.0 && counts[0] > 0) return true;
    if (move == 0.0)
      for (int l = 1; l < K; ++l)
        if (counts[static_cast<std::size_t>(l)] > 0) return true;
    return false;
  };

  detail::for_each_composition(pool, K, r, 0, [&](const std::vector<int>& rr) {
    if (degenerate(rr)) return;
    const double log_pr = log_multinomial(rr, pool);
    detail::for_each_composition(n_so, K, o, 0, [&](const std::vector<int>& oo) {
      if (degenerate(oo)) return;
      double min_margin = std::numeric_limits<double>::infinity();
      int ties = 0;
      for (int l = 1; l < K; ++l) {
        const double margin = inv_shift + (rr[0] - rr[static_cast<std::size_t>(l)]) +
                              C * (oo[0] - oo[static_cast<std::size_t>(l)]);
        if (margin < min_margin - 1e-9) {
          min_margin = margin;
          ties = 1;
        } else if (margin < min_margin + 1e-9) {
          ties += 1;
        }
      }
      double value;
      if (min_margin > 1e-9)
        value = 1.0;
      else if (min_margin < -1e-9)
        value = 0.0;
      else
        value = 1.0 / static_cast<double>(ties + 1);
      if (value > 0.0) add(value * std::exp(log_pr + log_multinomial(oo, n_so)));
    });
  });
  return sum;
}

/// Illustrative-example closed forms (expected-accuracy form of the
/// appendix proof, the one the simulation table matches):
/// individual = 1 - 5p^3/27, ensemble = 1 - 2p^5/81 - 17p^6/729.
inline std::pair<double, double> prop1_values(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("prop1_values: p outside [0,1]");
  const double p3 = p * p * p;
  const double p5 = p3 * p * p;
  return {1.0 - 5.0 * p3 / 27.0, 1.0 - 2.0 * p5 / 81.0 - 17.0 * p5 * p / 729.0};
}

/// Overlap example (one shared invariant + one shared spurious feature):
/// ose = 1 - 4p^4/81 - 8p^5/243, wse = 1 - 4p^4/81 - p^5/27 as stated; note
/// the source's own case analysis derives these with the opposite
/// assignment, which the Monte-Carlo evaluator confirms (the coefficient-4
/// composition attains the larger value).
inline std::pair<double, double> overlap_example_values(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("overlap_example_values: p outside [0,1]");
  const double p4 = p * p * p * p;
  const double p5 = p4 * p;
  return {1.0 - 4.0 * p4 / 81.0 - 8.0 * p5 / 243.0, 1.0 - 4.0 * p4 / 81.0 - p5 / 27.0};
}

enum class PredictorKind { individual1, individual2, ose, wse };

/// F_p argument of the general OSE/WSE results for the given predictor;
/// +infinity for an all-invariant (n_s = 0) model.
inline double prop23_argument(const ModelConfig& c, PredictorKind kind) {
  c.validate();
  const double t = 1.0 - c.p;
  switch (kind) {
    case PredictorKind::individual1:
      if (c.n_s1 == 0) return std::numeric_limits<double>::infinity();
      return (t * c.n_s1 + c.n_v1) / std::sqrt(static_cast<double>(c.n_s1));
    case PredictorKind::individual2:
      if (c.n_s2 == 0) return std::numeric_limits<double>::infinity();
      return (t * c.n_s2 + c.n_v2) / std::sqrt(static_cast<double>(c.n_s2));
    case PredictorKind::ose: {
      const double den = c.n_s1 + c.n_s2 + 2.0 * c.n_so;
      if (den == 0.0) return std::numeric_limits<double>::infinity();
      return (t * (c.n_s1 + c.n_s2) + (c.n_v1 + c.n_v2)) / std::sqrt(den);
    }
    case PredictorKind::wse: {
      const double den = c.n_s1 + c.n_s2 + 14.0 * c.n_so;
      if (den == 0.0) return std::numeric_limits<double>::infinity();
      return (t * (c.n_s1 + c.n_s2 + 2.0 * c.n_so) + (c.n_v1 + c.n_v2 + 2.0 * c.n_vo)) /
             std::sqrt(den);
    }
  }
  return 0.0;
}

/// General OSE/WSE accuracy: F_p applied to the respective argument.
inline ProbEstimate prop23_values(const ModelConfig& c, PredictorKind kind,
                                  std::uint64_t mc_draws = 4000000,
                                  RngStream mc_stream = RngStream(0x5fd00001ULL)) {
  const double arg = prop23_argument(c, kind);
  if (std::isinf(arg)) return {1.0, 0.0, 0};  // all-invariant model, accuracy 1 - O(eps)
  return fp(arg, c.p, c.K, mc_draws, mc_stream);
}

struct Prop4Result {
  double balanced = 0.0;  // lambda = 1
  double large = 0.0;     // lambda > sqrt(5)
  double drop = 0.0;      // balanced - large
  double bound = 0.0;     // 34 p^3 / 729
};

/// Imbalanced-scaling numbers for the illustrative example: the balanced WSE
/// equals the ensemble closed form, the large-lambda regime collapses to
/// 1 - 5p^6/243 - 2p^3/27, and the drop exceeds 34p^3/729.
inline Prop4Result prop4_imbalanced(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("prop4_imbalanced: p outside [0,1]");
  Prop4Result r;
  r.balanced = prop1_values(p).second;
  const double p3 = p * p * p;
  r.large = 1.0 - 5.0 * p3 * p3 / 243.0 - 2.0 * p3 / 27.0;
  r.drop = r.balanced - r.large;
  r.bound = 34.0 * p3 / 729.0;
  return r;
}

enum class WseOseVerdict { wse_wins, ose_wins_or_ties };

/// Decides WSE vs OSE for symmetric models (both learn n_v invariant and n_s
/// spurious features, overlap fractions rho_v, rho_s) by comparing the exact
/// F_p arguments of the general results; F_p is strictly increasing, so the
/// sign of the argument difference is the sign of the accuracy difference.
inline WseOseVerdict wse_ose_condition(int n_v, int n_s, double rho_v, double rho_s,
                                       double p) {
  if (!(rho_v >= 0.0 && rho_v <= 1.0 && rho_s >= 0.0 && rho_s <= 1.0))
    throw std::invalid_argument("wse_ose_condition: rho outside [0,1]");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("wse_ose_condition: p outside [0,1]");
  if (n_v < 0 || n_s < 0) throw std::invalid_argument("wse_ose_condition: negative counts");
  const double n_vo = rho_v * n_v;
  const double n_so = rho_s * n_s;
  const double t = 1.0 - p;
  const double den_w = 2.0 * n_s + 14.0 * n_so;
  const double den_o = 2.0 * n_s + 2.0 * n_so;
  if (den_w == 0.0 || den_o == 0.0) {
    // No spurious features anywhere: both accuracies are 1 - O(eps).
    return n_vo > 0.0 ? WseOseVerdict::wse_wins : WseOseVerdict::ose_wins_or_ties;
  }
  const double arg_w = (t * (2.0 * n_s + 2.0 * n_so) + 2.0 * n_v + 2.0 * n_vo) / std::sqrt(den_w);
  const double arg_o = (t * 2.0 * n_s + 2.0 * n_v) / std::sqrt(den_o);
  return arg_w > arg_o ? WseOseVerdict::wse_wins : WseOseVerdict::ose_wins_or_ties;
}

}  // namespace sfd
