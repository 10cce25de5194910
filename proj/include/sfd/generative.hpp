#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sfd/linalg.hpp"
#include "sfd/orthobank.hpp"
#include "sfd/rng.hpp"

namespace sfd {

/// The latent world: K classes, d_v invariant and d_s spurious feature
/// matrices with mutually orthonormal columns, Gaussian noise sigma.
struct FeatureSpec {
  int K = 3;
  int d_v = 0;
  int d_s = 0;
  int d = 0;  // embedding dimension per feature block
  double sigma = 0.01;
  BankMode bank_mode = BankMode::standard_basis;
  std::vector<Matrix> mu_v;  // d_v matrices, each d x K
  std::vector<Matrix> mu_s;  // d_s matrices, each d x K

  int n_features() const { return d_v + d_s; }
  bool is_invariant(int f) const { return f < d_v; }
  const Matrix& mu(int f) const {
    return f < d_v ? mu_v[static_cast<std::size_t>(f)]
                   : mu_s[static_cast<std::size_t>(f - d_v)];
  }
};

/// One environment draw: q[j][k] is the class index whose latent column
/// spurious feature j displays for true class k. Invariant features are
/// implicitly the identity and not stored.
struct TransformSet {
  std::vector<std::vector<int>> q;  // d_s rows, K entries each

  bool is_identity() const {
    for (std::size_t j = 0; j < q.size(); ++j)
      for (std::size_t k = 0; k < q[j].size(); ++k)
        if (q[j][k] != static_cast<int>(k)) return false;
    return true;
  }
};

struct EnvironmentLaw {
  double p = 0.0;  // probability that a spurious column is re-drawn uniformly
};

struct SampleBatch {
  int K = 0, d_v = 0, d_s = 0, d = 0;
  std::int64_t n = 0;
  std::vector<std::uint16_t> y;  // class indices in [0, K)
  std::vector<double> x;         // n * (d_v + d_s) * d, blocks contiguous per sample

  const double* block(std::int64_t i, int f) const {
    return x.data() + (i * (d_v + d_s) + f) * d;
  }
  double* block(std::int64_t i, int f) {
    return x.data() + (i * (d_v + d_s) + f) * d;
  }
};

/// Builds a K-class world whose mu columns are drawn from one orthonormal
/// bank, partitioned invariant-first. Default embedding dim is
/// K * (d_v + d_s), the smallest that fits the bank.
inline FeatureSpec make_feature_spec(int K, int d_v, int d_s, double sigma,
                                     BankMode mode, RngStream stream, int d = 0) {
  if (K < 2 || d_v < 0 || d_s < 0 || d_v + d_s < 1 || sigma < 0.0)
    throw std::invalid_argument("make_feature_spec: bad arguments");
  const int total_cols = K * (d_v + d_s);
  if (d == 0) d = total_cols;
  if (d < total_cols)
    throw std::invalid_argument("make_feature_spec: d too small for orthonormal columns");

  OrthonormalBank bank = build_orthonormal_bank(
      static_cast<std::size_t>(total_cols), static_cast<std::size_t>(d), mode, stream);

  FeatureSpec spec;
  spec.K = K;
  spec.d_v = d_v;
  spec.d_s = d_s;
  spec.d = d;
  spec.sigma = sigma;
  spec.bank_mode = mode;
  int col = 0;
  for (int f = 0; f < d_v + d_s; ++f) {
    Matrix m(static_cast<std::size_t>(d), static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k, ++col)
      for (int i = 0; i < d; ++i)
        m(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) =
            bank.columns(static_cast<std::size_t>(i), static_cast<std::size_t>(col));
    if (f < d_v)
      spec.mu_v.push_back(std::move(m));
    else
      spec.mu_s.push_back(std::move(m));
  }
  return spec;
}

/// The ID environment: every Q is the identity.
inline TransformSet id_environment(const FeatureSpec& spec) {
  TransformSet t;
  t.q.assign(static_cast<std::size_t>(spec.d_s), std::vector<int>(spec.K));
  for (auto& row : t.q)
    for (int k = 0; k < spec.K; ++k) row[static_cast<std::size_t>(k)] = k;
  return t;
}

/// One OOD environment draw: independently per spurious feature and class
/// column, keep the column with probability 1-p, else re-draw uniformly over
/// the K classes.
inline TransformSet sample_environment(const FeatureSpec& spec, const EnvironmentLaw& law,
                                       RngStream& stream) {
  if (!(law.p >= 0.0 && law.p <= 1.0))
    throw std::invalid_argument("sample_environment: p outside [0,1]");
  TransformSet t = id_environment(spec);
  for (int j = 0; j < spec.d_s; ++j)
    for (int k = 0; k < spec.K; ++k)
      if (stream.next_double() < law.p)
        t.q[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
            static_cast<int>(stream.next_below(static_cast<std::uint64_t>(spec.K)));
  return t;
}

namespace detail {

/// Generates one sample into `blocks` ((d_v+d_s) x d scratch) and returns its
/// label. Each sample consumes exactly one child stream, so shard order never
/// changes the data.
inline int generate_sample(const FeatureSpec& spec, const TransformSet& transforms,
                           RngStream& sample_stream, double* blocks) {
  const int y = static_cast<int>(sample_stream.next_below(static_cast<std::uint64_t>(spec.K)));
  const int nf = spec.n_features();
  for (int f = 0; f < nf; ++f) {
    const Matrix& mu = spec.mu(f);
    const int col = f < spec.d_v
                        ? y
                        : transforms.q[static_cast<std::size_t>(f - spec.d_v)]
                                      [static_cast<std::size_t>(y)];
    double* out = blocks + static_cast<std::size_t>(f) * spec.d;
    if (spec.sigma == 0.0) {
      for (int i = 0; i < spec.d; ++i)
        out[i] = mu(static_cast<std::size_t>(i), static_cast<std::size_t>(col));
    } else {
      for (int i = 0; i < spec.d; ++i)
        out[i] = mu(static_cast<std::size_t>(i), static_cast<std::size_t>(col)) +
                 spec.sigma * sample_stream.next_gaussian();
    }
  }
  return y;
}

}  // namespace detail

/// Draws n labelled samples under the given environment. y is uniform over
/// classes; block f is N(mu_f Q_f y, sigma^2 I_d). Bit-identical for a fixed
/// (seed, stream_id) regardless of how callers shard the index range.
inline SampleBatch sample_batch(const FeatureSpec& spec, const TransformSet& transforms,
                                std::int64_t n, RngStream stream) {
  if (n < 1) throw std::invalid_argument("sample_batch: n < 1");
  if (static_cast<int>(transforms.q.size()) != spec.d_s)
    throw std::invalid_argument("sample_batch: transform count != d_s");
  SampleBatch batch;
  batch.K = spec.K;
  batch.d_v = spec.d_v;
  batch.d_s = spec.d_s;
  batch.d = spec.d;
  batch.n = n;
  batch.y.resize(static_cast<std::size_t>(n));
  batch.x.resize(static_cast<std::size_t>(n) * spec.n_features() * spec.d);
  for (std::int64_t i = 0; i < n; ++i) {
    RngStream child = stream.child(static_cast<std::uint64_t>(i));
    batch.y[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(
        detail::generate_sample(spec, transforms, child, batch.block(i, 0)));
  }
  return batch;
}

}  // namespace sfd
