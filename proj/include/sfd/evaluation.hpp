#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/ensembles.hpp"
#include "sfd/generative.hpp"
#include "sfd/models.hpp"
#include "sfd/normal.hpp"

namespace sfd {

/// Non-owning view of either predictor kind.
struct PredictorRef {
  const LinearModel* linear = nullptr;
  const EnsembleModel* ensemble = nullptr;

  PredictorRef(const LinearModel& m) : linear(&m) {}
  PredictorRef(const EnsembleModel& e) : ensemble(&e) {}
};

inline Matrix predict_logits(const PredictorRef& p, const SampleBatch& batch) {
  return p.linear ? predict_logits(*p.linear, batch) : predict_logits(*p.ensemble, batch);
}

inline EffectiveCoeffs effective_coeffs(const FeatureSpec& spec, const PredictorRef& p) {
  return p.linear ? effective_coeffs(spec, *p.linear) : effective_coeffs(spec, *p.ensemble);
}

/// Counts of the 8 correctness groups indexed by (model1, model2, ensemble).
struct GroupCounts {
  std::array<std::uint64_t, 8> counts{};
  std::uint64_t n = 0;

  static constexpr int index(bool c1, bool c2, bool ce) {
    return (c1 ? 4 : 0) | (c2 ? 2 : 0) | (ce ? 1 : 0);
  }
  std::uint64_t fft() const { return counts[index(false, false, true)]; }
  std::uint64_t ttf() const { return counts[index(true, true, false)]; }
};

struct GroupStats {
  GroupCounts counts;
  double fft_ratio = 0.0;  // (|FFT| - |TTF|) / n
  double improve_tt_ff = 0.0;
  double improve_tf_ft = 0.0;
  double improve_all = 0.0;
};

struct ConfidenceMargin {
  double mean_confidence = 0.0;
  double mean_margin = 0.0;
  double mean_confidence_correct = 0.0;
  double mean_confidence_incorrect = 0.0;
  double mean_margin_correct = 0.0;
  double mean_margin_incorrect = 0.0;
  std::uint64_t n_correct = 0;
  std::uint64_t n_incorrect = 0;
};

/// Composite evaluation record; assembled by the experiment runner.
struct EvalReport {
  std::string method;  // "analytic" or "sampled"
  ProbEstimate accuracy;
  std::vector<double> per_class;
  std::optional<GroupStats> groups;
  std::optional<ConfidenceMargin> confidence;
  double worst_case = -1.0;    // filled when requested
  double epsilon_meta = 0.0;   // small-noise bound attached in analytic mode
  std::uint64_t n_env = 0;
  std::int64_t n_per_env = 0;
};

/// Fraction correct on a labelled batch, with binomial standard error.
inline ProbEstimate accuracy(const PredictorRef& pred, const SampleBatch& batch,
                             RngStream& stream) {
  if (batch.n < 1) throw std::invalid_argument("accuracy: empty batch");
  const Matrix logits = predict_logits(pred, batch);
  const std::vector<std::uint16_t> yhat = predict_labels(logits, stream);
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < yhat.size(); ++i) hits += yhat[i] == batch.y[i];
  const double p = static_cast<double>(hits) / static_cast<double>(batch.n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(batch.n)),
          static_cast<std::uint64_t>(batch.n)};
}

/// Small-noise conditional accuracy per class: class scores
/// s_l = sum_f c_f 1[Q_f(k) = e_l]; the class is right when its own score is
/// the strict maximum, worth 1/(N+1) on an (N+1)-way tie, 0 otherwise.
inline std::vector<double> conditional_accuracy_analytic(const EffectiveCoeffs& coeffs,
                                                         const TransformSet& transforms,
                                                         const FeatureSpec& spec) {
  if (static_cast<int>(coeffs.c.size()) != spec.n_features())
    throw std::invalid_argument("conditional_accuracy_analytic: coeffs length mismatch");
  std::vector<double> acc(static_cast<std::size_t>(spec.K));
  std::vector<double> score(static_cast<std::size_t>(spec.K));
  for (int k = 0; k < spec.K; ++k) {
    std::fill(score.begin(), score.end(), 0.0);
    for (int f = 0; f < spec.d_v; ++f) score[static_cast<std::size_t>(k)] += coeffs.c[static_cast<std::size_t>(f)];
    for (int j = 0; j < spec.d_s; ++j) {
      const int dest = transforms.q[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      score[static_cast<std::size_t>(dest)] += coeffs.c[static_cast<std::size_t>(spec.d_v + j)];
    }
    double mx = score[0];
    for (int l = 1; l < spec.K; ++l) mx = std::max(mx, score[static_cast<std::size_t>(l)]);
    const double tol = 1e-9 * std::max(1.0, std::abs(mx));
    if (score[static_cast<std::size_t>(k)] < mx - tol) {
      acc[static_cast<std::size_t>(k)] = 0.0;
      continue;
    }
    int ties = 0;  // classes sharing the maximum, true class included
    for (int l = 0; l < spec.K; ++l) ties += score[static_cast<std::size_t>(l)] >= mx - tol;
    acc[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(ties);
  }
  return acc;
}

/// Minimum conditional accuracy over adversarial environments, in closed
/// form: the optimal adversary redirects every spurious column of class k to
/// one wrong class, so each class is worth 1, 1/2 or 0 by the sign of
/// (invariant mass) - (spurious mass).
inline double worst_case_accuracy(const EffectiveCoeffs& coeffs, const FeatureSpec& spec) {
  if (static_cast<int>(coeffs.c.size()) != spec.n_features())
    throw std::invalid_argument("worst_case_accuracy: coeffs length mismatch");
  double inv_mass = 0.0, spur_mass = 0.0;
  for (int f = 0; f < spec.n_features(); ++f)
    (f < spec.d_v ? inv_mass : spur_mass) += coeffs.c[static_cast<std::size_t>(f)];
  const double tol = 1e-9 * std::max(1.0, std::max(inv_mass, spur_mass));
  if (inv_mass > spur_mass + tol) return 1.0;
  if (inv_mass < spur_mass - tol) return 0.0;
  return 0.5;
}

namespace detail {

/// Linear pieces of a predictor; logits(x) = sum_i out_weight_i * scale_i *
/// W_i^T (x phi_i).
struct LinearPiece {
  std::vector<double> phi;
  const Matrix* w = nullptr;
  double scale = 1.0;
  double out_weight = 1.0;
};

inline std::vector<LinearPiece> linear_pieces(const PredictorRef& pred) {
  std::vector<LinearPiece> pieces;
  auto from_model = [](const LinearModel& m, double out_weight) {
    LinearPiece p;
    p.phi.assign(m.mask.multiplicity.begin(), m.mask.multiplicity.end());
    p.w = &m.w;
    p.scale = m.scale;
    p.out_weight = out_weight;
    return p;
  };
  if (pred.linear) {
    pieces.push_back(from_model(*pred.linear, 1.0));
  } else if (pred.ensemble->kind == EnsembleKind::ose) {
    pieces.push_back(from_model(pred.ensemble->m1, 0.5));
    pieces.push_back(from_model(pred.ensemble->m2, 0.5));
  } else {
    LinearPiece p;
    p.phi = pred.ensemble->combined.phi;
    p.w = &pred.ensemble->combined.w;
    p.scale = pred.ensemble->combined.scale;
    p.out_weight = 1.0;
    pieces.push_back(p);
  }
  return pieces;
}

/// Streams n fresh samples of one environment through several predictors
/// without materializing the batch; records correctness bits per predictor
/// (and optionally labels). Sample i draws from stream.child(i), so results
/// are independent of sharding.
inline void sampled_correctness(const FeatureSpec& spec, const TransformSet& transforms,
                                const std::vector<PredictorRef>& preds, std::int64_t n,
                                RngStream stream,
                                std::vector<std::vector<std::uint8_t>>& correct,
                                std::vector<std::uint16_t>* labels = nullptr) {
  std::vector<std::vector<LinearPiece>> pieces;
  pieces.reserve(preds.size());
  for (const auto& p : preds) pieces.push_back(linear_pieces(p));

  correct.assign(preds.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
  if (labels) labels->assign(static_cast<std::size_t>(n), 0);

  const int nf = spec.n_features();
  std::vector<double> blocks(static_cast<std::size_t>(nf) * spec.d);
  std::vector<double> z(static_cast<std::size_t>(spec.d));
  std::vector<double> logits(static_cast<std::size_t>(spec.K));
  std::vector<int> ties;

  for (std::int64_t i = 0; i < n; ++i) {
    RngStream sample_stream = stream.child(static_cast<std::uint64_t>(i));
    const int y = generate_sample(spec, transforms, sample_stream, blocks.data());
    if (labels) (*labels)[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(y);
    for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
      std::fill(logits.begin(), logits.end(), 0.0);
      for (const LinearPiece& piece : pieces[pi]) {
        std::fill(z.begin(), z.end(), 0.0);
        for (int f = 0; f < nf; ++f) {
          const double phi = piece.phi[static_cast<std::size_t>(f)];
          if (phi == 0.0) continue;
          const double* blk = blocks.data() + static_cast<std::size_t>(f) * spec.d;
          for (int t = 0; t < spec.d; ++t) z[static_cast<std::size_t>(t)] += phi * blk[t];
        }
        const double common = piece.out_weight * piece.scale;
        const Matrix& w = *piece.w;
        for (int t = 0; t < spec.d; ++t) {
          const double zt = z[static_cast<std::size_t>(t)];
          if (zt == 0.0) continue;
          const double* wrow = w.row(static_cast<std::size_t>(t));
          for (int k = 0; k < spec.K; ++k)
            logits[static_cast<std::size_t>(k)] += common * zt * wrow[k];
        }
      }
      double best = logits[0];
      ties.assign(1, 0);
      for (int k = 1; k < spec.K; ++k) {
        if (logits[static_cast<std::size_t>(k)] > best) {
          best = logits[static_cast<std::size_t>(k)];
          ties.assign(1, k);
        } else if (logits[static_cast<std::size_t>(k)] == best) {
          ties.push_back(k);
        }
      }
      const int pick =
          ties.size() == 1
              ? ties[0]
              : ties[sample_stream.next_below(static_cast<std::uint64_t>(ties.size()))];
      correct[pi][static_cast<std::size_t>(i)] = pick == y;
    }
  }
}

}  // namespace detail

struct EvalMode {
  enum class Kind { analytic, sampled } kind = Kind::analytic;
  std::int64_t n_per_env = 2000;

  static EvalMode analytic() { return {Kind::analytic, 0}; }
  static EvalMode sampled(std::int64_t n_per_env) { return {Kind::sampled, n_per_env}; }
};

/// Expected OOD accuracy: mean over n_env sampled environments of the
/// conditional accuracy (small-noise analytic or freshly sampled batches).
/// stderr is taken across environments. Environment e draws everything from
/// stream.child(e), so any sharding reproduces bit-identically.
inline ProbEstimate ood_accuracy_mc(const PredictorRef& pred, const FeatureSpec& spec,
                                    const EnvironmentLaw& law, std::uint64_t n_env,
                                    const EvalMode& mode, RngStream stream) {
  if (n_env < 1) throw std::invalid_argument("ood_accuracy_mc: n_env < 1");
  const EffectiveCoeffs coeffs =
      mode.kind == EvalMode::Kind::analytic ? effective_coeffs(spec, pred) : EffectiveCoeffs{};
  double sum = 0.0, sumsq = 0.0;
  std::vector<std::vector<std::uint8_t>> correct;
  const std::vector<PredictorRef> preds{pred};
  for (std::uint64_t e = 0; e < n_env; ++e) {
    RngStream env_stream = stream.child(e);
    const TransformSet transforms = sample_environment(spec, law, env_stream);
    double acc_e = 0.0;
    if (mode.kind == EvalMode::Kind::analytic) {
      const std::vector<double> per_class =
          conditional_accuracy_analytic(coeffs, transforms, spec);
      for (double a : per_class) acc_e += a;
      acc_e /= static_cast<double>(spec.K);
    } else {
      detail::sampled_correctness(spec, transforms, preds, mode.n_per_env, env_stream,
                                  correct);
      std::uint64_t hits = 0;
      for (std::uint8_t c : correct[0]) hits += c;
      acc_e = static_cast<double>(hits) / static_cast<double>(mode.n_per_env);
    }
    sum += acc_e;
    sumsq += acc_e * acc_e;
  }
  const double mean = sum / static_cast<double>(n_env);
  const double var = std::max(0.0, sumsq / static_cast<double>(n_env) - mean * mean);
  return {mean, n_env > 1 ? std::sqrt(var / static_cast<double>(n_env - 1)) : 0.0, n_env};
}

/// Same estimate for several predictors at once; sampled mode shares every
/// drawn batch across predictors, which is also what group decompositions
/// need.
inline std::vector<ProbEstimate> ood_accuracy_mc_multi(
    const std::vector<PredictorRef>& preds, const FeatureSpec& spec,
    const EnvironmentLaw& law, std::uint64_t n_env, const EvalMode& mode,
    RngStream stream) {
  if (n_env < 1) throw std::invalid_argument("ood_accuracy_mc_multi: n_env < 1");
  const std::size_t m = preds.size();
  std::vector<EffectiveCoeffs> coeffs;
  if (mode.kind == EvalMode::Kind::analytic)
    for (const auto& p : preds) coeffs.push_back(effective_coeffs(spec, p));
  std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
  std::vector<std::vector<std::uint8_t>> correct;
  for (std::uint64_t e = 0; e < n_env; ++e) {
    RngStream env_stream = stream.child(e);
    const TransformSet transforms = sample_environment(spec, law, env_stream);
    if (mode.kind == EvalMode::Kind::analytic) {
      for (std::size_t i = 0; i < m; ++i) {
        const std::vector<double> per_class =
            conditional_accuracy_analytic(coeffs[i], transforms, spec);
        double acc_e = 0.0;
        for (double a : per_class) acc_e += a;
        acc_e /= static_cast<double>(spec.K);
        sum[i] += acc_e;
        sumsq[i] += acc_e * acc_e;
      }
    } else {
      detail::sampled_correctness(spec, transforms, preds, mode.n_per_env, env_stream,
                                  correct);
      for (std::size_t i = 0; i < m; ++i) {
        std::uint64_t hits = 0;
        for (std::uint8_t c : correct[i]) hits += c;
        const double acc_e =
            static_cast<double>(hits) / static_cast<double>(mode.n_per_env);
        sum[i] += acc_e;
        sumsq[i] += acc_e * acc_e;
      }
    }
  }
  std::vector<ProbEstimate> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double mean = sum[i] / static_cast<double>(n_env);
    const double var = std::max(0.0, sumsq[i] / static_cast<double>(n_env) - mean * mean);
    out[i] = {mean, n_env > 1 ? std::sqrt(var / static_cast<double>(n_env - 1)) : 0.0,
              n_env};
  }
  return out;
}

/// 8-way correctness decomposition plus the derived ratios of the
/// improvement-contribution identity.
inline GroupStats group_decomposition(const std::vector<std::uint16_t>& preds1,
                                      const std::vector<std::uint16_t>& preds2,
                                      const std::vector<std::uint16_t>& preds_ens,
                                      const std::vector<std::uint16_t>& labels) {
  const std::size_t n = labels.size();
  if (preds1.size() != n || preds2.size() != n || preds_ens.size() != n)
    throw std::invalid_argument("group_decomposition: length mismatch");
  GroupStats g;
  g.counts.n = n;
  std::array<std::uint64_t, 8> ens_correct_in{};  // ensemble hits per (c1,c2) family
  std::array<std::uint64_t, 8> m1_correct_in{};
  std::array<std::uint64_t, 8> m2_correct_in{};
  for (std::size_t i = 0; i < n; ++i) {
    const bool c1 = preds1[i] == labels[i];
    const bool c2 = preds2[i] == labels[i];
    const bool ce = preds_ens[i] == labels[i];
    g.counts.counts[static_cast<std::size_t>(GroupCounts::index(c1, c2, ce))] += 1;
    const int fam = (c1 ? 2 : 0) | (c2 ? 1 : 0);  // TT=3, TF=2, FT=1, FF=0
    ens_correct_in[static_cast<std::size_t>(fam)] += ce;
    m1_correct_in[static_cast<std::size_t>(fam)] += c1;
    m2_correct_in[static_cast<std::size_t>(fam)] += c2;
  }
  const double dn = static_cast<double>(n);
  auto improve = [&](std::initializer_list<int> fams) {
    double e = 0.0, a = 0.0, b = 0.0;
    for (int fam : fams) {
      e += static_cast<double>(ens_correct_in[static_cast<std::size_t>(fam)]);
      a += static_cast<double>(m1_correct_in[static_cast<std::size_t>(fam)]);
      b += static_cast<double>(m2_correct_in[static_cast<std::size_t>(fam)]);
    }
    return (e - std::max(a, b)) / dn;
  };
  g.improve_tt_ff = improve({3, 0});
  g.improve_tf_ft = improve({2, 1});
  g.improve_all = improve({3, 2, 1, 0});
  g.fft_ratio = (static_cast<double>(g.counts.fft()) - static_cast<double>(g.counts.ttf())) / dn;
  return g;
}

/// Softmax confidence (largest class probability) and margin
/// (true-class probability minus best wrong-class probability), aggregated
/// overall and per correctness group.
inline ConfidenceMargin confidence_margin(const Matrix& logits,
                                          const std::vector<std::uint16_t>& labels) {
  if (logits.rows != labels.size())
    throw std::invalid_argument("confidence_margin: length mismatch");
  ConfidenceMargin out;
  double conf_sum = 0.0, margin_sum = 0.0;
  double conf_c = 0.0, conf_i = 0.0, margin_c = 0.0, margin_i = 0.0;
  std::vector<double> prob(logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    double mx = row[0];
    for (std::size_t k = 1; k < logits.cols; ++k) mx = std::max(mx, row[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      prob[k] = std::exp(row[k] - mx);
      sum += prob[k];
    }
    double best = 0.0, best_wrong = 0.0;
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      prob[k] /= sum;
      if (prob[k] > best) {
        best = prob[k];
        argmax = k;
      }
      if (k != labels[i]) best_wrong = std::max(best_wrong, prob[k]);
    }
    const double margin = prob[labels[i]] - best_wrong;
    conf_sum += best;
    margin_sum += margin;
    if (argmax == labels[i]) {
      out.n_correct += 1;
      conf_c += best;
      margin_c += margin;
    } else {
      out.n_incorrect += 1;
      conf_i += best;
      margin_i += margin;
    }
  }
  const double dn = static_cast<double>(logits.rows);
  out.mean_confidence = conf_sum / dn;
  out.mean_margin = margin_sum / dn;
  out.mean_confidence_correct = out.n_correct ? conf_c / static_cast<double>(out.n_correct) : 0.0;
  out.mean_confidence_incorrect =
      out.n_incorrect ? conf_i / static_cast<double>(out.n_incorrect) : 0.0;
  out.mean_margin_correct = out.n_correct ? margin_c / static_cast<double>(out.n_correct) : 0.0;
  out.mean_margin_incorrect =
      out.n_incorrect ? margin_i / static_cast<double>(out.n_incorrect) : 0.0;
  return out;
}

}  // namespace sfd
