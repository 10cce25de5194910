#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/ensembles.hpp"
#include "sfd/evaluation.hpp"
#include "sfd/generative.hpp"
#include "sfd/models.hpp"
#include "sfd/theory.hpp"

namespace sfd {

/// Feature counts of the four named simulation examples.
inline ModelConfig example_config(const std::string& name, double p, int K = 3) {
  ModelConfig c;
  c.p = p;
  c.K = K;
  if (name == "1-1") {
    c = {2, 3, 2, 3, 0, 0, p, K};
  } else if (name == "1-2") {
    c = {2, 3, 2, 3, 1, 1, p, K};
  } else if (name == "2-1") {
    c = {5, 20, 4, 20, 0, 0, p, K};
  } else if (name == "2-2") {
    c = {5, 20, 5, 20, 4, 1, p, K};
  } else {
    throw std::invalid_argument("unknown example '" + name + "' (use 1-1, 1-2, 2-1, 2-2)");
  }
  c.validate();
  return c;
}

/// A fully built two-model world: the smallest FeatureSpec containing both
/// models' features, masks laid out so the requested overlaps land on shared
/// indices, closed-form classifiers and their three ensembles.
struct ExampleSetup {
  ModelConfig config;
  FeatureSpec spec;
  FeatureMask mask1, mask2;
  LinearModel m1, m2;
  EnsembleModel ose_model, wse_model;
};

inline ExampleSetup make_setup(const ModelConfig& config, double sigma, std::uint64_t seed,
                               BankMode mode = BankMode::standard_basis,
                               bool normalize = true) {
  config.validate();
  ExampleSetup s;
  s.config = config;
  const int d_v = config.n_v1 + config.n_v2 - config.n_vo;
  const int d_s = config.n_s1 + config.n_s2 - config.n_so;
  s.spec = make_feature_spec(config.K, d_v, d_s, sigma, mode, RngStream(seed, 1));

  // Model 1 takes the leading invariant/spurious indices, model 2 the
  // trailing ones; the overlap regions coincide by construction.
  std::vector<int> idx1, idx2;
  for (int f = 0; f < config.n_v1; ++f) idx1.push_back(f);
  for (int f = d_v - config.n_v2; f < d_v; ++f) idx2.push_back(f);
  for (int f = 0; f < config.n_s1; ++f) idx1.push_back(d_v + f);
  for (int f = d_s - config.n_s2; f < d_s; ++f) idx2.push_back(d_v + f);

  s.mask1 = FeatureMask::of_indices(d_v + d_s, idx1);
  s.mask2 = FeatureMask::of_indices(d_v + d_s, idx2);
  s.m1 = closed_form_classifier(s.spec, s.mask1, normalize);
  s.m2 = closed_form_classifier(s.spec, s.mask2, normalize);
  s.ose_model = ose(s.m1, s.m2);
  s.wse_model = wse(s.m1, s.m2);
  return s;
}

inline ExampleSetup make_example(const std::string& name, double p, double sigma,
                                 std::uint64_t seed,
                                 BankMode mode = BankMode::standard_basis,
                                 bool normalize = true) {
  return make_setup(example_config(name, p), sigma, seed, mode, normalize);
}

/// Per-environment joint evaluation of (m1, m2, ensemble) with shared
/// sampled batches: group counts pool over environments, fft ratios are kept
/// per environment for bootstrap use.
struct JointSimulation {
  GroupStats pooled;
  std::vector<double> fft_ratio_per_env;
  ProbEstimate acc_m1, acc_m2, acc_ens;
};

inline JointSimulation simulate_joint(const ExampleSetup& setup, const PredictorRef& ens,
                                      const EnvironmentLaw& law, std::uint64_t n_env,
                                      std::int64_t n_per_env, RngStream stream) {
  JointSimulation out;
  std::vector<PredictorRef> preds{setup.m1, setup.m2, ens};
  std::vector<std::vector<std::uint8_t>> correct;
  std::vector<std::uint16_t> labels;
  GroupCounts pooled;
  std::array<double, 3> acc_sum{}, acc_sumsq{};
  std::array<std::uint64_t, 8> m1c{}, m2c{}, ensc{};  // per (c1,c2) family tallies
  std::array<std::uint64_t, 4> fam_m1{}, fam_m2{}, fam_ens{};
  for (std::uint64_t e = 0; e < n_env; ++e) {
    RngStream env_stream = stream.child(e);
    const TransformSet transforms = sample_environment(setup.spec, law, env_stream);
    detail::sampled_correctness(setup.spec, transforms, preds, n_per_env, env_stream,
                                correct, &labels);
    std::uint64_t fft = 0, ttf = 0;
    std::array<std::uint64_t, 3> hits{};
    for (std::int64_t i = 0; i < n_per_env; ++i) {
      const bool c1 = correct[0][static_cast<std::size_t>(i)];
      const bool c2 = correct[1][static_cast<std::size_t>(i)];
      const bool ce = correct[2][static_cast<std::size_t>(i)];
      pooled.counts[static_cast<std::size_t>(GroupCounts::index(c1, c2, ce))] += 1;
      const int fam = (c1 ? 2 : 0) | (c2 ? 1 : 0);
      fam_m1[static_cast<std::size_t>(fam)] += c1;
      fam_m2[static_cast<std::size_t>(fam)] += c2;
      fam_ens[static_cast<std::size_t>(fam)] += ce;
      hits[0] += c1;
      hits[1] += c2;
      hits[2] += ce;
      fft += !c1 && !c2 && ce;
      ttf += c1 && c2 && !ce;
    }
    out.fft_ratio_per_env.push_back(
        (static_cast<double>(fft) - static_cast<double>(ttf)) / static_cast<double>(n_per_env));
    for (int m = 0; m < 3; ++m) {
      const double a = static_cast<double>(hits[static_cast<std::size_t>(m)]) /
                       static_cast<double>(n_per_env);
      acc_sum[static_cast<std::size_t>(m)] += a;
      acc_sumsq[static_cast<std::size_t>(m)] += a * a;
    }
  }
  pooled.n = n_env * static_cast<std::uint64_t>(n_per_env);
  out.pooled.counts = pooled;
  const double dn = static_cast<double>(pooled.n);
  auto improve = [&](std::initializer_list<int> fams) {
    double e = 0.0, a = 0.0, b = 0.0;
    for (int fam : fams) {
      e += static_cast<double>(fam_ens[static_cast<std::size_t>(fam)]);
      a += static_cast<double>(fam_m1[static_cast<std::size_t>(fam)]);
      b += static_cast<double>(fam_m2[static_cast<std::size_t>(fam)]);
    }
    return (e - std::max(a, b)) / dn;
  };
  out.pooled.improve_tt_ff = improve({3, 0});
  out.pooled.improve_tf_ft = improve({2, 1});
  out.pooled.improve_all = improve({3, 2, 1, 0});
  out.pooled.fft_ratio =
      (static_cast<double>(pooled.fft()) - static_cast<double>(pooled.ttf())) / dn;

  auto finish = [&](int m) -> ProbEstimate {
    const double mean = acc_sum[static_cast<std::size_t>(m)] / static_cast<double>(n_env);
    const double var = std::max(
        0.0, acc_sumsq[static_cast<std::size_t>(m)] / static_cast<double>(n_env) - mean * mean);
    return {mean, n_env > 1 ? std::sqrt(var / static_cast<double>(n_env - 1)) : 0.0, n_env};
  };
  out.acc_m1 = finish(0);
  out.acc_m2 = finish(1);
  out.acc_ens = finish(2);
  return out;
}

}  // namespace sfd
