#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sfd/ensembles.hpp"
#include "sfd/evaluation.hpp"
#include "sfd/experiments.hpp"

using namespace sfd;

TEST_CASE("ensembling a model with itself preserves logits") {
  const ExampleSetup s = make_example("1-1", 0.9, 0.01, 200);
  const SampleBatch batch = sample_batch(s.spec, id_environment(s.spec), 128, RngStream(201));
  const Matrix base = predict_logits(s.m1, batch);

  const Matrix via_ose = predict_logits(ose(s.m1, s.m1), batch);
  for (std::size_t t = 0; t < base.data.size(); ++t)
    REQUIRE_THAT(via_ose.data[t], Catch::Matchers::WithinAbs(base.data[t], 1e-12));

  // (1/4) * 2W^T (x * 2Phi) collapses to the component model exactly.
  const Matrix via_wse = predict_logits(wse(s.m1, s.m1), batch);
  for (std::size_t t = 0; t < base.data.size(); ++t)
    REQUIRE_THAT(via_wse.data[t], Catch::Matchers::WithinAbs(base.data[t], 1e-12));

  const Matrix via_lambda = predict_logits(wse_imbalanced(s.m1, s.m1, 1.0), batch);
  for (std::size_t t = 0; t < base.data.size(); ++t)
    REQUIRE_THAT(via_lambda.data[t], Catch::Matchers::WithinAbs(base.data[t], 1e-12));
}

TEST_CASE("output averaging of (0.4,0.6,0) and (0.4,0,0.6) gives (0.4,0.3,0.3)") {
  const FeatureSpec spec =
      make_feature_spec(3, 1, 2, 0.0, BankMode::standard_basis, RngStream(210));
  auto probe_model = [&](double t0, double t1, double t2) {
    LinearModel m;
    m.mask = FeatureMask::of_indices(3, {0});
    m.scale = 1.0;
    m.w = Matrix(static_cast<std::size_t>(spec.d), 3);
    const double t[3] = {t0, t1, t2};
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < spec.d; ++i)
        m.w(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) =
            t[k] * spec.mu_v[0](static_cast<std::size_t>(i), 0);
    return m;
  };
  const LinearModel m1 = probe_model(0.4, 0.6, 0.0);
  const LinearModel m2 = probe_model(0.4, 0.0, 0.6);
  SampleBatch batch = sample_batch(spec, id_environment(spec), 16, RngStream(211));
  const EnsembleModel e = ose(m1, m2);
  const Matrix logits = predict_logits(e, batch);
  for (std::int64_t i = 0; i < batch.n; ++i) {
    if (batch.y[static_cast<std::size_t>(i)] != 0) continue;
    REQUIRE_THAT(logits(static_cast<std::size_t>(i), 0), Catch::Matchers::WithinAbs(0.4, 1e-12));
    REQUIRE_THAT(logits(static_cast<std::size_t>(i), 1), Catch::Matchers::WithinAbs(0.3, 1e-12));
    REQUIRE_THAT(logits(static_cast<std::size_t>(i), 2), Catch::Matchers::WithinAbs(0.3, 1e-12));
    RngStream tie(212);
    REQUIRE(predict_labels(logits, tie)[static_cast<std::size_t>(i)] == 0);
  }
}

TEST_CASE("disjoint masks at sigma=0: WSE logits are half the OSE logits") {
  const ExampleSetup s = make_example("1-1", 0.9, 0.0, 220);
  RngStream env_stream(221);
  const TransformSet t = sample_environment(s.spec, {0.9}, env_stream);
  const SampleBatch batch = sample_batch(s.spec, t, 512, RngStream(222));
  const Matrix lo = predict_logits(s.ose_model, batch);
  const Matrix lw = predict_logits(s.wse_model, batch);
  for (std::size_t i = 0; i < lo.data.size(); ++i)
    REQUIRE_THAT(lw.data[i], Catch::Matchers::WithinAbs(0.5 * lo.data[i], 1e-12));
  RngStream tie1(223, 0), tie2(223, 0);
  REQUIRE(predict_labels(lo, tie1) == predict_labels(lw, tie2));
}

TEST_CASE("effective coefficients: individual model is all ones on its mask") {
  const ExampleSetup s = make_example("1-1", 0.9, 0.01, 230);
  const EffectiveCoeffs c = effective_coeffs(s.spec, s.m1);
  for (int f = 0; f < s.spec.n_features(); ++f) {
    const double want = s.mask1.multiplicity[static_cast<std::size_t>(f)] ? 1.0 : 0.0;
    REQUIRE_THAT(c.c[static_cast<std::size_t>(f)], Catch::Matchers::WithinAbs(want, 1e-10));
  }
  REQUIRE_THAT(c.n_v_eff, Catch::Matchers::WithinAbs(2.0, 1e-9));
  REQUIRE_THAT(c.n_s_eff, Catch::Matchers::WithinAbs(3.0, 1e-9));
}

TEST_CASE("effective coefficients of the overlap example") {
  const ExampleSetup s = make_example("1-2", 0.9, 0.01, 231);
  // Layout: invariants v1,v2,v3 (v2 shared), spurious s1..s5 (s3 shared).
  const std::vector<double> want_wse = {1, 4, 1, 1, 1, 4, 1, 1};
  const std::vector<double> want_ose = {1, 2, 1, 1, 1, 2, 1, 1};
  const EffectiveCoeffs cw = effective_coeffs(s.spec, s.wse_model);
  const EffectiveCoeffs co = effective_coeffs(s.spec, s.ose_model);
  for (std::size_t f = 0; f < want_wse.size(); ++f) {
    REQUIRE_THAT(cw.c[f], Catch::Matchers::WithinAbs(want_wse[f], 1e-9));
    REQUIRE_THAT(co.c[f], Catch::Matchers::WithinAbs(want_ose[f], 1e-9));
  }
}

TEST_CASE("effective coefficients under imbalanced scaling") {
  const ExampleSetup s = make_example("1-1", 0.9, 0.01, 232);
  const double lambda = std::sqrt(5.0);
  const EnsembleModel e = wse_imbalanced(s.m1, s.m2, lambda);
  const EffectiveCoeffs c = effective_coeffs(s.spec, e);
  // Model-1-only features normalize to 1; model-2-only features carry
  // lambda^2 = 5.
  for (int f : {0, 1, 4, 5, 6})
    REQUIRE_THAT(c.c[static_cast<std::size_t>(f)], Catch::Matchers::WithinAbs(1.0, 1e-9));
  for (int f : {2, 3, 7, 8, 9})
    REQUIRE_THAT(c.c[static_cast<std::size_t>(f)], Catch::Matchers::WithinAbs(5.0, 1e-9));
}

TEST_CASE("lambda=1 imbalanced WSE equals plain WSE") {
  const ExampleSetup s = make_example("1-2", 0.9, 0.01, 233);
  const SampleBatch batch = sample_batch(s.spec, id_environment(s.spec), 64, RngStream(234));
  const Matrix a = predict_logits(s.wse_model, batch);
  const Matrix b = predict_logits(wse_imbalanced(s.m1, s.m2, 1.0), batch);
  for (std::size_t t = 0; t < a.data.size(); ++t)
    REQUIRE_THAT(b.data[t], Catch::Matchers::WithinAbs(a.data[t], 1e-12));
}

TEST_CASE("large lambda hands every decision to the second model") {
  const ExampleSetup s = make_example("1-1", 0.9, 0.0, 235);
  RngStream env_stream(236);
  const TransformSet t = sample_environment(s.spec, {0.9}, env_stream);
  const SampleBatch batch = sample_batch(s.spec, t, 512, RngStream(237));
  const EnsembleModel e = wse_imbalanced(s.m1, s.m2, 1000.0);
  RngStream tie1(238, 0), tie2(238, 0);
  const Matrix m2_logits = predict_logits(s.m2, batch);
  const auto lam = predict_labels(predict_logits(e, batch), tie1);
  const auto m2 = predict_labels(m2_logits, tie2);
  int compared = 0;
  for (std::int64_t i = 0; i < batch.n; ++i) {
    // Rows where model 2 ties are broken at random on both sides; compare
    // only unique-argmax rows.
    const double* row = m2_logits.row(static_cast<std::size_t>(i));
    const double mx = std::max({row[0], row[1], row[2]});
    int at_max = 0;
    for (int k = 0; k < 3; ++k) at_max += row[k] == mx;
    if (at_max > 1) continue;
    ++compared;
    REQUIRE(lam[static_cast<std::size_t>(i)] == m2[static_cast<std::size_t>(i)]);
  }
  REQUIRE(compared > 300);
}

TEST_CASE("effective-coefficient reconstruction matches noiseless logits") {
  const ExampleSetup s = make_example("1-2", 0.9, 0.0, 240);
  RngStream env_stream(241);
  const std::vector<PredictorRef> preds{s.m1, s.m2, s.ose_model, s.wse_model};
  for (const PredictorRef& pred : preds) {
    const EffectiveCoeffs c = effective_coeffs(s.spec, pred);
    double factor = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const TransformSet t = sample_environment(s.spec, {0.7}, env_stream);
      const SampleBatch batch = sample_batch(s.spec, t, 3, RngStream(242, rep));
      const Matrix logits = predict_logits(pred, batch);
      for (std::int64_t i = 0; i < batch.n; ++i) {
        const int y = batch.y[static_cast<std::size_t>(i)];
        std::vector<double> score(3, 0.0);
        for (int f = 0; f < s.spec.d_v; ++f)
          score[static_cast<std::size_t>(y)] += c.c[static_cast<std::size_t>(f)];
        for (int j = 0; j < s.spec.d_s; ++j)
          score[static_cast<std::size_t>(
              t.q[static_cast<std::size_t>(j)][static_cast<std::size_t>(y)])] +=
              c.c[static_cast<std::size_t>(s.spec.d_v + j)];
        for (int k = 0; k < 3; ++k) {
          const double have = logits(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
          if (factor == 0.0 && score[static_cast<std::size_t>(k)] > 0.0 && have != 0.0)
            factor = have / score[static_cast<std::size_t>(k)];
          if (factor != 0.0)
            REQUIRE_THAT(have,
                         Catch::Matchers::WithinAbs(factor * score[static_cast<std::size_t>(k)],
                                                    1e-10));
        }
      }
    }
    REQUIRE(factor > 0.0);
  }
}

TEST_CASE("composition rejects mismatched worlds and bad lambda") {
  const ExampleSetup a = make_example("1-1", 0.9, 0.01, 250);
  const FeatureSpec other =
      make_feature_spec(3, 1, 1, 0.01, BankMode::standard_basis, RngStream(251));
  const LinearModel foreign = closed_form_classifier(other, FeatureMask::of_indices(2, {0}));
  REQUIRE_THROWS_AS(ose(a.m1, foreign), std::invalid_argument);
  REQUIRE_THROWS_AS(wse(a.m1, foreign), std::invalid_argument);
  REQUIRE_THROWS_AS(wse_imbalanced(a.m1, a.m2, 0.0), std::invalid_argument);
}
