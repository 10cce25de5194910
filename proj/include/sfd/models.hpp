#pragma once

#include <cblas.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/blas_env.hpp"
#include "sfd/generative.hpp"
#include "sfd/linalg.hpp"
#include "sfd/rng.hpp"

namespace sfd {

/// Per-feature usage weights of a featurizer. Individual models use {0,1};
/// weight-space compositions sum masks and may reach 2.
struct FeatureMask {
  std::vector<int> multiplicity;

  static FeatureMask zeros(int n_features) {
    FeatureMask m;
    m.multiplicity.assign(static_cast<std::size_t>(n_features), 0);
    return m;
  }
  static FeatureMask of_indices(int n_features, const std::vector<int>& indices) {
    FeatureMask m = zeros(n_features);
    for (int f : indices) m.multiplicity.at(static_cast<std::size_t>(f)) += 1;
    return m;
  }

  int n_features() const { return static_cast<int>(multiplicity.size()); }
  int used_count() const {
    int c = 0;
    for (int v : multiplicity) c += v > 0;
    return c;
  }
  int weight_total() const {
    int c = 0;
    for (int v : multiplicity) c += v;
    return c;
  }
};

struct LinearModel {
  FeatureMask mask;
  Matrix w;            // d x K
  double scale = 1.0;  // positive, multiplies logits
};

/// Infinite-sample classifier: W(k) = sum over used features of
/// mask_f * mu_f(k). With normalize, scale = 1/sqrt(sum of multiplicities);
/// argmax decisions are identical either way.
inline LinearModel closed_form_classifier(const FeatureSpec& spec, const FeatureMask& mask,
                                          bool normalize = true) {
  if (mask.n_features() != spec.n_features())
    throw std::invalid_argument("closed_form_classifier: mask length mismatch");
  if (mask.used_count() == 0)
    throw std::invalid_argument("closed_form_classifier: empty mask");
  LinearModel model;
  model.mask = mask;
  model.w = Matrix(static_cast<std::size_t>(spec.d), static_cast<std::size_t>(spec.K));
  for (int f = 0; f < spec.n_features(); ++f) {
    const int m = mask.multiplicity[static_cast<std::size_t>(f)];
    if (m == 0) continue;
    const Matrix& mu = spec.mu(f);
    for (std::size_t i = 0; i < model.w.rows; ++i)
      for (std::size_t k = 0; k < model.w.cols; ++k)
        model.w(i, k) += m * mu(i, k);
  }
  model.scale = normalize ? 1.0 / std::sqrt(static_cast<double>(mask.weight_total())) : 1.0;
  return model;
}

/// n x d matrix of per-sample mask-weighted block sums.
inline Matrix masked_sum(const SampleBatch& batch, const FeatureMask& mask) {
  if (mask.n_features() != batch.d_v + batch.d_s)
    throw std::invalid_argument("masked_sum: mask length mismatch");
  Matrix z(static_cast<std::size_t>(batch.n), static_cast<std::size_t>(batch.d));
  for (std::int64_t i = 0; i < batch.n; ++i) {
    double* row = z.row(static_cast<std::size_t>(i));
    for (int f = 0; f < mask.n_features(); ++f) {
      const int m = mask.multiplicity[static_cast<std::size_t>(f)];
      if (m == 0) continue;
      const double* blk = batch.block(i, f);
      for (int t = 0; t < batch.d; ++t) row[t] += m * blk[t];
    }
  }
  return z;
}

/// logits = scale * (masked block sum)^T W, one row per sample.
inline Matrix predict_logits(const LinearModel& model, const SampleBatch& batch) {
  if (static_cast<int>(model.w.rows) != batch.d)
    throw std::invalid_argument("predict_logits: embedding dim mismatch");
  detail::pin_blas_single_thread();
  const Matrix z = masked_sum(batch, model.mask);
  Matrix logits(static_cast<std::size_t>(batch.n), model.w.cols);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(batch.n),
              static_cast<int>(model.w.cols), batch.d, model.scale, z.data.data(),
              batch.d, model.w.data.data(), static_cast<int>(model.w.cols), 0.0,
              logits.data.data(), static_cast<int>(model.w.cols));
  return logits;
}

/// Argmax per row; exact ties are broken uniformly at random from the stream,
/// so an (N+1)-way tie is correct with probability 1/(N+1) in expectation.
inline std::vector<std::uint16_t> predict_labels(const Matrix& logits, RngStream& stream) {
  std::vector<std::uint16_t> labels(logits.rows);
  std::vector<std::uint16_t> ties;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    double best = row[0];
    ties.assign(1, 0);
    for (std::size_t k = 1; k < logits.cols; ++k) {
      if (row[k] > best) {
        best = row[k];
        ties.assign(1, static_cast<std::uint16_t>(k));
      } else if (row[k] == best) {
        ties.push_back(static_cast<std::uint16_t>(k));
      }
    }
    labels[i] = ties.size() == 1
                    ? ties[0]
                    : ties[stream.next_below(static_cast<std::uint64_t>(ties.size()))];
  }
  return labels;
}

/// Full-batch gradient descent on softmax cross-entropy over mask-summed
/// features. The batch must be an ID draw; steps=0 returns the (small
/// Gaussian) initialization unchanged.
inline LinearModel fit_classifier_erm(const FeatureSpec& spec, const SampleBatch& batch,
                                      const FeatureMask& mask, int steps, double lr,
                                      RngStream stream) {
  if (steps < 0) throw std::invalid_argument("fit_classifier_erm: steps < 0");
  if (mask.used_count() == 0)
    throw std::invalid_argument("fit_classifier_erm: empty mask");
  const int n = static_cast<int>(batch.n);
  const int d = spec.d;
  const int K = spec.K;

  LinearModel model;
  model.mask = mask;
  model.scale = 1.0;
  model.w = Matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(K));
  const double init_scale = 0.01 / std::sqrt(static_cast<double>(d));
  for (double& v : model.w.data) v = init_scale * stream.next_gaussian();
  if (steps == 0) return model;

  detail::pin_blas_single_thread();
  const Matrix z = masked_sum(batch, mask);
  Matrix probs(static_cast<std::size_t>(n), static_cast<std::size_t>(K));
  Matrix grad(static_cast<std::size_t>(d), static_cast<std::size_t>(K));
  for (int step = 0; step < steps; ++step) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, K, d, 1.0, z.data.data(),
                d, model.w.data.data(), K, 0.0, probs.data.data(), K);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      double* row = probs.row(static_cast<std::size_t>(i));
      double mx = row[0];
      for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
      double sum = 0.0;
      for (int k = 0; k < K; ++k) {
        row[k] = std::exp(row[k] - mx);
        sum += row[k];
      }
      const int yi = batch.y[static_cast<std::size_t>(i)];
      loss -= std::log(row[yi] / sum);
      for (int k = 0; k < K; ++k) row[k] /= sum;
      row[yi] -= 1.0;
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("fit_classifier_erm: loss became non-finite at step " +
                               std::to_string(step));
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, d, K, n, 1.0 / n, z.data.data(),
                d, probs.data.data(), K, 0.0, grad.data.data(), K);
    for (std::size_t t = 0; t < model.w.data.size(); ++t)
      model.w.data[t] -= lr * grad.data[t];
  }
  return model;
}

/// Minimum over classes of the cosine similarity between the two classifiers'
/// columns, compared in the softmax gauge (common across-class column mean
/// removed from each side first).
inline double centered_column_cosine(const LinearModel& a, const LinearModel& b) {
  if (!a.w.same_shape(b.w))
    throw std::invalid_argument("centered_column_cosine: shape mismatch");
  const std::size_t d = a.w.rows, K = a.w.cols;
  Matrix ca = a.w, cb = b.w;
  for (std::size_t i = 0; i < d; ++i) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      ma += ca(i, k);
      mb += cb(i, k);
    }
    ma /= static_cast<double>(K);
    mb /= static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) {
      ca(i, k) -= ma;
      cb(i, k) -= mb;
    }
  }
  double worst = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      num += ca(i, k) * cb(i, k);
      na += ca(i, k) * ca(i, k);
      nb += cb(i, k) * cb(i, k);
    }
    worst = std::min(worst, num / std::sqrt(na * nb));
  }
  return worst;
}

}  // namespace sfd
