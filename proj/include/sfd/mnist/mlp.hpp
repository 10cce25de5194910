#pragma once

#include <cblas.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/blas_env.hpp"
#include "sfd/mnist/color.hpp"
#include "sfd/rng.hpp"

namespace sfd::mnist {

inline constexpr int kInputDim = kImageBytes;  // 5292
inline constexpr int kHidden = 64;
inline constexpr int kClasses = 10;

/// 2-layer ReLU MLP: 5292 -> 64 -> 10.
struct MlpModel {
  std::vector<float> w1;  // kInputDim x kHidden, row-major
  std::vector<float> b1;  // kHidden
  std::vector<float> w2;  // kHidden x kClasses, row-major
  std::vector<float> b2;  // kClasses

  MlpModel()
      : w1(static_cast<std::size_t>(kInputDim) * kHidden),
        b1(kHidden),
        w2(static_cast<std::size_t>(kHidden) * kClasses),
        b2(kClasses) {}
};

struct TrainConfig {
  float lr = 1e-3f;
  int batch_size = 100;
  int steps = 5000;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  float label_smoothing = 0.0f;  // alpha in [0,1); alpha/(K-1) off-class mass
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr > 0.f) || batch_size < 1 || steps < 0 || !(beta1 > 0.f) || !(beta2 > 0.f) ||
        !(adam_eps > 0.f) || !(label_smoothing >= 0.f && label_smoothing < 1.f))
      throw std::invalid_argument("TrainConfig: bad hyperparameters");
  }
};

namespace detail {

inline void fill_input(const ColorBatch& batch, const std::int64_t* idx, int count,
                       float* x) {
  for (int b = 0; b < count; ++b) {
    const std::uint8_t* img = batch.image(idx[b]);
    float* row = x + static_cast<std::size_t>(b) * kInputDim;
    for (int t = 0; t < kInputDim; ++t) row[t] = img[t] * (1.0f / 255.0f);
  }
}

/// logits = relu(X W1 + b1) W2 + b2 for `count` rows; hidden activations are
/// left in `h` for the backward pass.
inline void forward(const MlpModel& m, const float* x, int count, float* h, float* logits) {
  for (int b = 0; b < count; ++b)
    for (int j = 0; j < kHidden; ++j)
      h[static_cast<std::size_t>(b) * kHidden + j] = m.b1[static_cast<std::size_t>(j)];
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, count, kHidden, kInputDim, 1.0f,
              x, kInputDim, m.w1.data(), kHidden, 1.0f, h, kHidden);
  for (std::size_t t = 0; t < static_cast<std::size_t>(count) * kHidden; ++t)
    if (h[t] < 0.f) h[t] = 0.f;
  for (int b = 0; b < count; ++b)
    for (int k = 0; k < kClasses; ++k)
      logits[static_cast<std::size_t>(b) * kClasses + k] = m.b2[static_cast<std::size_t>(k)];
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, count, kClasses, kHidden, 1.0f,
              h, kHidden, m.w2.data(), kClasses, 1.0f, logits, kClasses);
}

inline void adam_update(std::vector<float>& param, std::vector<float>& g,
                        std::vector<float>& m1, std::vector<float>& m2,
                        const TrainConfig& cfg, float bias1, float bias2) {
  for (std::size_t t = 0; t < param.size(); ++t) {
    m1[t] = cfg.beta1 * m1[t] + (1.f - cfg.beta1) * g[t];
    m2[t] = cfg.beta2 * m2[t] + (1.f - cfg.beta2) * g[t] * g[t];
    const float mhat = m1[t] / bias1;
    const float vhat = m2[t] / bias2;
    param[t] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

}  // namespace detail

/// Minibatch Adam on softmax cross-entropy (targets smoothed when
/// label_smoothing > 0). Deterministic for a fixed seed; returns the
/// final-step model. Throws on a non-finite loss, naming the step.
inline MlpModel train_mlp(const ColorBatch& train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.n < 1) throw std::invalid_argument("train_mlp: empty batch");
  sfd::detail::pin_blas_single_thread();

  MlpModel model;
  RngStream init_stream = RngStream(cfg.seed).child(0);
  const float s1 = std::sqrt(2.0f / kInputDim);
  const float s2 = std::sqrt(2.0f / kHidden);
  for (auto& v : model.w1) v = s1 * static_cast<float>(init_stream.next_gaussian());
  for (auto& v : model.w2) v = s2 * static_cast<float>(init_stream.next_gaussian());
  if (cfg.steps == 0) return model;

  RngStream batch_stream = RngStream(cfg.seed).child(1);
  const int B = cfg.batch_size;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(B));
  std::vector<float> x(static_cast<std::size_t>(B) * kInputDim);
  std::vector<float> h(static_cast<std::size_t>(B) * kHidden);
  std::vector<float> logits(static_cast<std::size_t>(B) * kClasses);
  std::vector<float> gw1(model.w1.size()), gb1(model.b1.size());
  std::vector<float> gw2(model.w2.size()), gb2(model.b2.size());
  std::vector<float> mw1(model.w1.size()), vw1(model.w1.size());
  std::vector<float> mb1(model.b1.size()), vb1(model.b1.size());
  std::vector<float> mw2(model.w2.size()), vw2(model.w2.size());
  std::vector<float> mb2(model.b2.size()), vb2(model.b2.size());
  std::vector<float> dh_tmp(static_cast<std::size_t>(B) * kHidden);

  const float off_target = cfg.label_smoothing / (kClasses - 1);
  const float on_target = 1.f - cfg.label_smoothing;

  for (int step = 1; step <= cfg.steps; ++step) {
    for (int b = 0; b < B; ++b)
      idx[static_cast<std::size_t>(b)] = static_cast<std::int64_t>(
          batch_stream.next_below(static_cast<std::uint64_t>(train.n)));
    detail::fill_input(train, idx.data(), B, x.data());
    detail::forward(model, x.data(), B, h.data(), logits.data());

    // Softmax + smoothed cross-entropy; logits become dL/dlogits * B.
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
      float* row = logits.data() + static_cast<std::size_t>(b) * kClasses;
      float mx = row[0];
      for (int k = 1; k < kClasses; ++k) mx = std::max(mx, row[k]);
      float sum = 0.f;
      for (int k = 0; k < kClasses; ++k) {
        row[k] = std::exp(row[k] - mx);
        sum += row[k];
      }
      const int y = train.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
      for (int k = 0; k < kClasses; ++k) {
        const float p = row[k] / sum;
        const float target = k == y ? on_target : off_target;
        if (target > 0.f) loss -= target * std::log(std::max(p, 1e-30f));
        row[k] = p - target;
      }
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("train_mlp: loss became non-finite at step " +
                               std::to_string(step));

    const float inv_b = 1.0f / B;
    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kHidden, kClasses, B, inv_b,
                h.data(), kHidden, logits.data(), kClasses, 0.f, gw2.data(), kClasses);
    std::fill(gb2.begin(), gb2.end(), 0.f);
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < kClasses; ++k)
        gb2[static_cast<std::size_t>(k)] +=
            inv_b * logits[static_cast<std::size_t>(b) * kClasses + k];

    // dH = dLogits W2^T, masked by relu'(A1) (h holds relu(A1), so h > 0).
    std::vector<float>& dh = h;  // aliases h; the mask reads h[t] first
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, B, kHidden, kClasses, 1.f,
                logits.data(), kClasses, model.w2.data(), kClasses, 0.f, dh_tmp.data(),
                kHidden);
    for (std::size_t t = 0; t < dh_tmp.size(); ++t)
      dh[t] = h[t] > 0.f ? dh_tmp[t] : 0.f;

    cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kInputDim, kHidden, B, inv_b,
                x.data(), kInputDim, dh.data(), kHidden, 0.f, gw1.data(), kHidden);
    std::fill(gb1.begin(), gb1.end(), 0.f);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < kHidden; ++j)
        gb1[static_cast<std::size_t>(j)] += inv_b * dh[static_cast<std::size_t>(b) * kHidden + j];

    const float bias1 = 1.f - std::pow(cfg.beta1, static_cast<float>(step));
    const float bias2 = 1.f - std::pow(cfg.beta2, static_cast<float>(step));
    detail::adam_update(model.w1, gw1, mw1, vw1, cfg, bias1, bias2);
    detail::adam_update(model.b1, gb1, mb1, vb1, cfg, bias1, bias2);
    detail::adam_update(model.w2, gw2, mw2, vw2, cfg, bias1, bias2);
    detail::adam_update(model.b2, gb2, mb2, vb2, cfg, bias1, bias2);
  }
  return model;
}

/// Per-sample logits over the whole batch, chunked. Output n x 10.
inline std::vector<float> mlp_logits(const MlpModel& model, const ColorBatch& batch) {
  sfd::detail::pin_blas_single_thread();
  constexpr int kChunk = 512;
  std::vector<float> out(static_cast<std::size_t>(batch.n) * kClasses);
  std::vector<float> x(static_cast<std::size_t>(kChunk) * kInputDim);
  std::vector<float> h(static_cast<std::size_t>(kChunk) * kHidden);
  std::vector<std::int64_t> idx(kChunk);
  for (std::int64_t start = 0; start < batch.n; start += kChunk) {
    const int count = static_cast<int>(std::min<std::int64_t>(kChunk, batch.n - start));
    for (int b = 0; b < count; ++b) idx[static_cast<std::size_t>(b)] = start + b;
    detail::fill_input(batch, idx.data(), count, x.data());
    detail::forward(model, x.data(), count, h.data(),
                    out.data() + static_cast<std::size_t>(start) * kClasses);
  }
  return out;
}

inline std::vector<std::uint8_t> mlp_predict(const MlpModel& model, const ColorBatch& batch) {
  const std::vector<float> logits = mlp_logits(model, batch);
  std::vector<std::uint8_t> pred(static_cast<std::size_t>(batch.n));
  for (std::int64_t i = 0; i < batch.n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * kClasses;
    int best = 0;
    for (int k = 1; k < kClasses; ++k)
      if (row[k] > row[best]) best = k;
    pred[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return pred;
}

enum class EvalColorMode { single, ose };

/// single: argmax of one model's logits. ose: argmax of the two models'
/// summed logits.
inline double eval_color(const std::vector<const MlpModel*>& models, const ColorBatch& batch,
                         EvalColorMode mode) {
  const std::size_t need = mode == EvalColorMode::single ? 1 : 2;
  if (models.size() != need)
    throw std::invalid_argument("eval_color: expected " + std::to_string(need) + " model(s)");
  std::vector<float> logits = mlp_logits(*models[0], batch);
  if (mode == EvalColorMode::ose) {
    const std::vector<float> logits2 = mlp_logits(*models[1], batch);
    for (std::size_t t = 0; t < logits.size(); ++t) logits[t] += logits2[t];
  }
  std::uint64_t hits = 0;
  for (std::int64_t i = 0; i < batch.n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * kClasses;
    int best = 0;
    for (int k = 1; k < kClasses; ++k)
      if (row[k] > row[best]) best = k;
    hits += best == batch.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(batch.n);
}

/// Fraction of samples whose prediction changes when a 7x7 grid cell is
/// blacked out (digit-stroke pixels kept).
inline double occlusion_sensitivity_cell(const MlpModel& model, const ColorBatch& batch,
                                         int grid_row, int grid_col) {
  if (grid_row < 0 || grid_row >= kGrid || grid_col < 0 || grid_col >= kGrid)
    throw std::invalid_argument("occlusion_sensitivity_cell: bad cell");
  const std::vector<std::uint8_t> baseline = mlp_predict(model, batch);
  sfd::detail::pin_blas_single_thread();
  constexpr int kChunk = 512;
  std::vector<float> x(static_cast<std::size_t>(kChunk) * kInputDim);
  std::vector<float> h(static_cast<std::size_t>(kChunk) * kHidden);
  std::vector<float> logits(static_cast<std::size_t>(kChunk) * kClasses);
  std::vector<std::int64_t> idx(kChunk);
  std::uint64_t changed = 0;
  for (std::int64_t start = 0; start < batch.n; start += kChunk) {
    const int count = static_cast<int>(std::min<std::int64_t>(kChunk, batch.n - start));
    for (int b = 0; b < count; ++b) idx[static_cast<std::size_t>(b)] = start + b;
    detail::fill_input(batch, idx.data(), count, x.data());
    for (int b = 0; b < count; ++b) {
      const std::uint8_t* strokes = batch.strokes(start + b);
      float* row = x.data() + static_cast<std::size_t>(b) * kInputDim;
      for (int r = grid_row * kCell; r < (grid_row + 1) * kCell; ++r)
        for (int c = grid_col * kCell; c < (grid_col + 1) * kCell; ++c) {
          if (strokes[r * kCanvas + c]) continue;
          float* px = row + (r * kCanvas + c) * 3;
          px[0] = px[1] = px[2] = 0.f;
        }
    }
    detail::forward(model, x.data(), count, h.data(), logits.data());
    for (int b = 0; b < count; ++b) {
      const float* row = logits.data() + static_cast<std::size_t>(b) * kClasses;
      int best = 0;
      for (int k = 1; k < kClasses; ++k)
        if (row[k] > row[best]) best = k;
      changed += best != baseline[static_cast<std::size_t>(start + b)];
    }
  }
  return static_cast<double>(changed) / static_cast<double>(batch.n);
}

inline double occlusion_sensitivity(const MlpModel& model, const ColorBatch& batch,
                                    int patch_id) {
  const auto [gr, gc] = patch_cell(patch_id);
  return occlusion_sensitivity_cell(model, batch, gr, gc);
}

}  // namespace sfd::mnist
