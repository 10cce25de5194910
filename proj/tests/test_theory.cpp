#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sfd/evaluation.hpp"
#include "sfd/experiments.hpp"
#include "sfd/theory.hpp"

using namespace sfd;

TEST_CASE("fp: saturation, degeneracy, closed forms") {
  REQUIRE_THAT(fp(100.0, 0.9, 3).value, Catch::Matchers::WithinAbs(1.0, 1e-6));
  REQUIRE(fp(5.0, 0.0, 3).value == 1.0);
  REQUIRE(fp(-5.0, 0.0, 3).value == 0.0);
  // K=2 reduces to a single Gaussian coordinate.
  const double v = fp(1.0, 0.5, 2).value;
  REQUIRE_THAT(v, Catch::Matchers::WithinAbs(std_normal_cdf(1.0 / std::sqrt(0.75)), 1e-12));
}

TEST_CASE("fp at the simulation-table arguments (exact orthant values)") {
  // The paper's table prints 0.941 / 0.910 / 0.980 / 0.992 / 0.983 for these
  // arguments, but its own orthant definition evaluates to the values below
  // (mpmath references); the exact-enumeration route reproduces the table's
  // individual-model cells instead. See the acceptance output for the
  // cell-by-cell comparison.
  const double sqrt20 = std::sqrt(20.0);
  CHECK_THAT(fp((0.1 * 20 + 5) / sqrt20, 0.9, 3).value,
             Catch::Matchers::WithinAbs(0.94758574415106192, 1e-9));
  CHECK_THAT(fp((0.1 * 20 + 4) / sqrt20, 0.9, 3).value,
             Catch::Matchers::WithinAbs(0.90923621729338941, 1e-9));
  CHECK_THAT(fp(13.0 / std::sqrt(40.0), 0.9, 3).value,
             Catch::Matchers::WithinAbs(0.98762314138746808, 1e-9));
  CHECK_THAT(fp(14.0 / std::sqrt(42.0), 0.9, 3).value,
             Catch::Matchers::WithinAbs(0.99129307544071839, 1e-9));
  CHECK_THAT(fp(22.2 / std::sqrt(54.0), 0.9, 3).value,
             Catch::Matchers::WithinAbs(0.99972988244625637, 1e-9));
}

TEST_CASE("fp is monotone on a 50-point grid") {
  for (double p : {0.3, 0.9}) {
    double prev = -1.0;
    for (int i = 0; i < 50; ++i) {
      const double x = -2.0 + 6.0 * i / 49.0;
      const double v = fp(x, p, 3).value;
      REQUIRE(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("fp cross-checks against the Monte-Carlo orthant at K=3 and K=5") {
  const ProbEstimate mc3 = fp(1.2, 0.8, 3, 1, RngStream(1));  // exact path ignores draws
  Matrix cov(2, 2);
  const double var = 0.8 * (5 - 0.8 * 3) / 3, c = 0.8 * (4 - 0.8 * 3) / 3;
  cov(0, 0) = cov(1, 1) = var;
  cov(0, 1) = cov(1, 0) = c;
  const ProbEstimate mc = mvn_orthant_mc({1.2, 1.2}, cov, 4000000, RngStream(401));
  REQUIRE(std::abs(mc3.value - mc.value) < 3 * mc.stderr_);

  const ProbEstimate k5 = fp(1.0, 0.7, 5, 2000000, RngStream(402));
  REQUIRE(k5.stderr_ > 0.0);
  REQUIRE(k5.value > 0.5);
  REQUIRE(k5.value < 1.0);
}

TEST_CASE("g_exact reproduces the illustrative-example closed forms") {
  for (double p : {0.3, 0.6, 0.9}) {
    const auto [ind, ens] = prop1_values(p);
    REQUIRE_THAT(g_exact(2, 3, 0, 0, 0, p, 3), Catch::Matchers::WithinAbs(ind, 1e-9));
    REQUIRE_THAT(g_exact(4, 6, 0, 0, 0, p, 3), Catch::Matchers::WithinAbs(ens, 1e-9));
  }
  REQUIRE_THAT(g_exact(2, 3, 0, 0, 0, 0.9, 3), Catch::Matchers::WithinAbs(0.865, 1e-9));
  REQUIRE_THAT(g_exact(4, 6, 0, 0, 0, 0.9, 3), Catch::Matchers::WithinAbs(0.973027, 1e-9));
  REQUIRE(g_exact(5, 20, 0, 0, 0, 0.0, 3) == 1.0);
  REQUIRE_THROWS_AS(g_exact(2, 200000, 0, 0, 0, 0.9, 12), std::invalid_argument);
}

TEST_CASE("g_exact matches the overlap-example polynomials (proof labeling)") {
  // The proposition statement labels these (ose, wse); the paper's own case
  // analysis derives the first from coefficient-4 margins and the second from
  // coefficient-2 margins, and the enumeration agrees with the proof.
  for (double p : {0.4, 0.9}) {
    const auto [first, second] = overlap_example_values(p);
    REQUIRE_THAT(g_exact(4, 6, 1, 1, 4, p, 3), Catch::Matchers::WithinAbs(first, 1e-9));
    REQUIRE_THAT(g_exact(4, 6, 1, 1, 2, p, 3), Catch::Matchers::WithinAbs(second, 1e-9));
  }
}

TEST_CASE("overlap example: Monte-Carlo adjudication of the WSE/OSE labels") {
  const auto [stated_ose, stated_wse] = overlap_example_values(0.9);
  REQUIRE_THAT(stated_ose, Catch::Matchers::WithinAbs(0.94816, 1e-5));
  REQUIRE_THAT(stated_wse, Catch::Matchers::WithinAbs(0.94573, 1e-5));
  const ExampleSetup s = make_example("1-2", 0.9, 0.01, 410);
  const ProbEstimate mc_wse = ood_accuracy_mc(s.wse_model, s.spec, {0.9}, 100000,
                                              EvalMode::analytic(), RngStream(411));
  const ProbEstimate mc_ose = ood_accuracy_mc(s.ose_model, s.spec, {0.9}, 100000,
                                              EvalMode::analytic(), RngStream(412));
  // The coefficient-4 composition (WSE) attains the *larger* stated value:
  // the data supports the proof's labeling, not the proposition statement's.
  REQUIRE(std::abs(mc_wse.value - stated_ose) < 3 * mc_wse.stderr_);
  REQUIRE(std::abs(mc_ose.value - stated_wse) < 3 * mc_ose.stderr_);
}

TEST_CASE("prop1 closed forms at the table point") {
  const auto [ind, ens] = prop1_values(0.9);
  REQUIRE_THAT(ind, Catch::Matchers::WithinAbs(0.865, 1e-12));
  REQUIRE_THAT(ens, Catch::Matchers::WithinAbs(0.97303, 1e-5));
  const auto [i0, e0] = prop1_values(0.0);
  REQUIRE(i0 == 1.0);
  REQUIRE(e0 == 1.0);
}

TEST_CASE("prop23 arguments and degenerate guards") {
  const ModelConfig ex22 = example_config("2-2", 0.9);
  REQUIRE_THAT(prop23_argument(ex22, PredictorKind::wse),
               Catch::Matchers::WithinAbs(22.2 / std::sqrt(54.0), 1e-12));
  REQUIRE_THAT(prop23_argument(ex22, PredictorKind::ose),
               Catch::Matchers::WithinAbs(14.0 / std::sqrt(42.0), 1e-12));
  const ModelConfig ex21 = example_config("2-1", 0.9);
  REQUIRE_THAT(prop23_argument(ex21, PredictorKind::ose),
               Catch::Matchers::WithinAbs(13.0 / std::sqrt(40.0), 1e-12));
  REQUIRE_THAT(prop23_argument(ex21, PredictorKind::individual1),
               Catch::Matchers::WithinAbs(7.0 / std::sqrt(20.0), 1e-12));

  ModelConfig all_inv{3, 0, 2, 5, 0, 0, 0.9, 3};
  REQUIRE(prop23_values(all_inv, PredictorKind::individual1).value == 1.0);
}

TEST_CASE("prop4 imbalanced values and bound") {
  const Prop4Result r = prop4_imbalanced(0.9);
  REQUIRE_THAT(r.large, Catch::Matchers::WithinAbs(0.935065, 1e-6));
  REQUIRE_THAT(r.balanced, Catch::Matchers::WithinAbs(0.973027, 1e-6));
  REQUIRE_THAT(r.bound, Catch::Matchers::WithinAbs(0.034, 1e-6));
  REQUIRE(r.drop > r.bound);
  const Prop4Result zero = prop4_imbalanced(0.0);
  REQUIRE(zero.balanced == 1.0);
  REQUIRE(zero.large == 1.0);
  REQUIRE(zero.drop == 0.0);
}

TEST_CASE("prop4 large-lambda value matches the lambda=3 evaluator") {
  const ExampleSetup s = make_example("1-1", 0.9, 0.01, 420);
  const EnsembleModel e = wse_imbalanced(s.m1, s.m2, 3.0);
  const ProbEstimate mc =
      ood_accuracy_mc(e, s.spec, {0.9}, 100000, EvalMode::analytic(), RngStream(421));
  REQUIRE(std::abs(mc.value - prop4_imbalanced(0.9).large) < 3 * mc.stderr_);
}

TEST_CASE("wse_ose_condition: edges and strictness") {
  REQUIRE(wse_ose_condition(10, 20, 0.3, 0.0, 0.9) == WseOseVerdict::wse_wins);
  REQUIRE(wse_ose_condition(10, 20, 0.0, 0.0, 0.9) == WseOseVerdict::ose_wins_or_ties);
  REQUIRE(wse_ose_condition(10, 20, 0.2, 0.0, 1.0) == WseOseVerdict::wse_wins);
  // No overlap at all: arguments coincide, ties go to OSE.
  REQUIRE(wse_ose_condition(5, 0, 0.0, 0.0, 0.5) == WseOseVerdict::ose_wins_or_ties);
  REQUIRE_THROWS_AS(wse_ose_condition(10, 20, 1.5, 0.0, 0.9), std::invalid_argument);
}

TEST_CASE("wse_ose_condition agrees with the prop23 sign on the example-3 grid") {
  const double p = 0.9;
  for (int nvo = 0; nvo <= 5; ++nvo)
    for (int nso = 0; nso <= 5; ++nso) {
      const ModelConfig c{10, 20, 10, 20, nvo, nso, p, 3};
      const double diff =
          prop23_argument(c, PredictorKind::wse) - prop23_argument(c, PredictorKind::ose);
      const WseOseVerdict verdict =
          wse_ose_condition(10, 20, nvo / 10.0, nso / 20.0, p);
      REQUIRE((verdict == WseOseVerdict::wse_wins) == (diff > 0.0));
    }
}

TEST_CASE("g_exact approaches fp in the Gaussian regime") {
  // n_s >= 20: within 0.02; n_s >= 6: within 0.05.
  const double p = 0.9;
  REQUIRE(std::abs(g_exact(5, 20, 0, 0, 0, p, 3) -
                   fp((0.1 * 20 + 5) / std::sqrt(20.0), p, 3).value) < 0.02);
  REQUIRE(std::abs(g_exact(9, 40, 0, 0, 0, p, 3) -
                   fp(13.0 / std::sqrt(40.0), p, 3).value) < 0.02);
  REQUIRE(std::abs(g_exact(4, 6, 0, 0, 0, p, 3) -
                   fp((0.1 * 6 + 4) / std::sqrt(6.0), p, 3).value) < 0.05);
}

TEST_CASE("OSE dominates the symmetric no-overlap individual") {
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
    const ModelConfig c{3, 8, 3, 8, 0, 0, p, 3};
    REQUIRE(prop23_values(c, PredictorKind::ose).value + 1e-12 >=
            prop23_values(c, PredictorKind::individual1).value);
  }
}

TEST_CASE("closed forms agree with the analytic Monte-Carlo on all examples") {
  struct Row {
    const char* name;
    double m1, m2, ose_v, wse_v;
  };
  const double p = 0.9;
  const Row rows[] = {
      {"1-1", g_exact(2, 3, 0, 0, 0, p, 3), g_exact(2, 3, 0, 0, 0, p, 3),
       g_exact(4, 6, 0, 0, 0, p, 3), g_exact(4, 6, 0, 0, 0, p, 3)},
      {"2-1", g_exact(5, 20, 0, 0, 0, p, 3), g_exact(4, 20, 0, 0, 0, p, 3),
       g_exact(9, 40, 0, 0, 0, p, 3), g_exact(9, 40, 0, 0, 0, p, 3)},
      {"2-2", g_exact(5, 20, 0, 0, 0, p, 3), g_exact(5, 20, 0, 0, 0, p, 3),
       g_exact(10, 40, 4, 1, 2, p, 3), g_exact(10, 40, 4, 1, 4, p, 3)},
  };
  for (const Row& row : rows) {
    const ExampleSetup s = make_example(row.name, p, 0.01, 430);
    const RngStream stream(431);
    const auto check = [&](const PredictorRef& pred, double want) {
      const ProbEstimate mc =
          ood_accuracy_mc(pred, s.spec, {p}, 100000, EvalMode::analytic(), stream);
      REQUIRE(std::abs(mc.value - want) < 3 * mc.stderr_ + 1e-4);
    };
    check(s.m1, row.m1);
    check(s.m2, row.m2);
    check(s.ose_model, row.ose_v);
    check(s.wse_model, row.wse_v);
  }
}
