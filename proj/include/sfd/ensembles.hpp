#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sfd/blas_env.hpp"
#include "sfd/models.hpp"

namespace sfd {

enum class EnsembleKind { ose, wse, wse_lambda };

namespace detail {

/// Evaluable form of a weight-space composition: real-valued featurizer
/// weights (lambda makes them non-integer) and a folded classifier.
struct WeightedLinear {
  std::vector<double> phi;  // per-feature featurizer weights
  Matrix w;                 // d x K, component scales folded in
  double scale = 1.0;
};

inline Matrix weighted_masked_sum(const SampleBatch& batch, const std::vector<double>& phi) {
  Matrix z(static_cast<std::size_t>(batch.n), static_cast<std::size_t>(batch.d));
  for (std::int64_t i = 0; i < batch.n; ++i) {
    double* row = z.row(static_cast<std::size_t>(i));
    for (std::size_t f = 0; f < phi.size(); ++f) {
      if (phi[f] == 0.0) continue;
      const double* blk = batch.block(i, static_cast<int>(f));
      for (int t = 0; t < batch.d; ++t) row[t] += phi[f] * blk[t];
    }
  }
  return z;
}

inline Matrix predict_logits(const WeightedLinear& m, const SampleBatch& batch) {
  pin_blas_single_thread();
  const Matrix z = weighted_masked_sum(batch, m.phi);
  Matrix logits(static_cast<std::size_t>(batch.n), m.w.cols);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(batch.n),
              static_cast<int>(m.w.cols), batch.d, m.scale, z.data.data(), batch.d,
              m.w.data.data(), static_cast<int>(m.w.cols), 0.0, logits.data.data(),
              static_cast<int>(m.w.cols));
  return logits;
}

}  // namespace detail

/// Two LinearModels composed in output space, weight space, or imbalanced
/// weight space.
struct EnsembleModel {
  EnsembleKind kind = EnsembleKind::ose;
  LinearModel m1, m2;
  double lambda = 1.0;
  std::optional<LinearModel> composed;      // cached for kind == wse
  detail::WeightedLinear combined;          // evaluable form for WSE kinds
};

namespace detail {

inline void check_same_world(const LinearModel& a, const LinearModel& b) {
  if (!a.w.same_shape(b.w) || a.mask.n_features() != b.mask.n_features())
    throw std::invalid_argument("ensemble: component models from different specs");
}

inline WeightedLinear compose_weighted(const LinearModel& m1, const LinearModel& m2,
                                       double lambda) {
  WeightedLinear c;
  c.phi.resize(m1.mask.multiplicity.size());
  for (std::size_t f = 0; f < c.phi.size(); ++f)
    c.phi[f] = m1.mask.multiplicity[f] + lambda * m2.mask.multiplicity[f];
  c.w = Matrix(m1.w.rows, m1.w.cols);
  for (std::size_t t = 0; t < c.w.data.size(); ++t)
    c.w.data[t] = m1.scale * m1.w.data[t] + lambda * m2.scale * m2.w.data[t];
  c.scale = 0.25;
  return c;
}

}  // namespace detail

/// Output space ensemble: logits(x) = (logits_1(x) + logits_2(x)) / 2.
inline EnsembleModel ose(const LinearModel& m1, const LinearModel& m2) {
  detail::check_same_world(m1, m2);
  EnsembleModel e;
  e.kind = EnsembleKind::ose;
  e.m1 = m1;
  e.m2 = m2;
  return e;
}

/// Weight space ensemble: logits(x) = (W1 + W2)^T (x (Phi1 + Phi2)) / 4.
inline EnsembleModel wse(const LinearModel& m1, const LinearModel& m2) {
  detail::check_same_world(m1, m2);
  EnsembleModel e;
  e.kind = EnsembleKind::wse;
  e.m1 = m1;
  e.m2 = m2;
  e.combined = detail::compose_weighted(m1, m2, 1.0);
  LinearModel composed;
  composed.mask = FeatureMask::zeros(m1.mask.n_features());
  for (std::size_t f = 0; f < composed.mask.multiplicity.size(); ++f)
    composed.mask.multiplicity[f] = m1.mask.multiplicity[f] + m2.mask.multiplicity[f];
  composed.w = e.combined.w;
  composed.scale = 0.25;
  e.composed = std::move(composed);
  return e;
}

/// Imbalanced weight space ensemble:
/// logits(x) = (W1 + lambda W2)^T (x (Phi1 + lambda Phi2)) / 4.
inline EnsembleModel wse_imbalanced(const LinearModel& m1, const LinearModel& m2,
                                    double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("wse_imbalanced: lambda <= 0");
  detail::check_same_world(m1, m2);
  EnsembleModel e;
  e.kind = EnsembleKind::wse_lambda;
  e.m1 = m1;
  e.m2 = m2;
  e.lambda = lambda;
  e.combined = detail::compose_weighted(m1, m2, lambda);
  return e;
}

inline Matrix predict_logits(const EnsembleModel& model, const SampleBatch& batch) {
  if (model.kind == EnsembleKind::ose) {
    Matrix l1 = predict_logits(model.m1, batch);
    const Matrix l2 = predict_logits(model.m2, batch);
    for (std::size_t t = 0; t < l1.data.size(); ++t)
      l1.data[t] = 0.5 * (l1.data[t] + l2.data[t]);
    return l1;
  }
  return detail::predict_logits(model.combined, batch);
}

/// Per-feature logit coefficients of a (possibly composed) predictor, and
/// their invariant/spurious mass bookkeeping. Normalized so the smallest
/// positive coefficient is 1; zero exactly where no component uses a feature.
struct EffectiveCoeffs {
  std::vector<double> c;
  int d_v = 0;
  double n_v_eff = 0.0;
  double n_s_eff = 0.0;
};

namespace detail {

/// Projection of the classifier column k onto mu_f(k), averaged over k: the
/// per-feature classifier coefficient (exactly mask_f for closed forms).
inline double classifier_coefficient(const FeatureSpec& spec, const Matrix& w, int f) {
  const Matrix& mu = spec.mu(f);
  double acc = 0.0;
  for (int k = 0; k < spec.K; ++k) {
    double s = 0.0;
    for (int i = 0; i < spec.d; ++i)
      s += w(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) *
           mu(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    acc += s;
  }
  return acc / spec.K;
}

inline EffectiveCoeffs finalize_coeffs(const FeatureSpec& spec, std::vector<double> c) {
  double min_pos = 0.0;
  for (double v : c)
    if (v > 0.0 && (min_pos == 0.0 || v < min_pos)) min_pos = v;
  if (min_pos > 0.0)
    for (double& v : c) v /= min_pos;
  EffectiveCoeffs out;
  out.d_v = spec.d_v;
  out.c = std::move(c);
  for (int f = 0; f < spec.n_features(); ++f)
    (f < spec.d_v ? out.n_v_eff : out.n_s_eff) += out.c[static_cast<std::size_t>(f)];
  return out;
}

inline std::vector<double> raw_coeffs(const FeatureSpec& spec, const LinearModel& m) {
  std::vector<double> c(static_cast<std::size_t>(spec.n_features()), 0.0);
  for (int f = 0; f < spec.n_features(); ++f) {
    const int phi = m.mask.multiplicity[static_cast<std::size_t>(f)];
    if (phi == 0) continue;
    c[static_cast<std::size_t>(f)] = m.scale * phi * classifier_coefficient(spec, m.w, f);
  }
  return c;
}

}  // namespace detail

inline EffectiveCoeffs effective_coeffs(const FeatureSpec& spec, const LinearModel& m) {
  return detail::finalize_coeffs(spec, detail::raw_coeffs(spec, m));
}

inline EffectiveCoeffs effective_coeffs(const FeatureSpec& spec, const EnsembleModel& e) {
  std::vector<double> c(static_cast<std::size_t>(spec.n_features()), 0.0);
  if (e.kind == EnsembleKind::ose) {
    const std::vector<double> c1 = detail::raw_coeffs(spec, e.m1);
    const std::vector<double> c2 = detail::raw_coeffs(spec, e.m2);
    for (std::size_t f = 0; f < c.size(); ++f) c[f] = 0.5 * (c1[f] + c2[f]);
  } else {
    for (int f = 0; f < spec.n_features(); ++f) {
      const double phi = e.combined.phi[static_cast<std::size_t>(f)];
      if (phi == 0.0) continue;
      c[static_cast<std::size_t>(f)] =
          e.combined.scale * phi * detail::classifier_coefficient(spec, e.combined.w, f);
    }
  }
  return detail::finalize_coeffs(spec, std::move(c));
}

}  // namespace sfd
