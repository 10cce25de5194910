#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sfd/mnist/color.hpp"
#include "sfd/mnist/mlp.hpp"

extern "C" void openblas_set_num_threads(int);

using namespace sfd::mnist;

namespace {

MnistSet synthetic_digits(std::uint32_t n, std::uint64_t seed = 7) {
  MnistSet s;
  s.n = n;
  s.rows = 28;
  s.cols = 28;
  s.images.assign(static_cast<std::size_t>(n) * 28 * 28, 0);
  s.labels.resize(n);
  sfd::RngStream stream(seed);
  for (std::uint32_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(stream.next_below(10));
    s.labels[i] = static_cast<std::uint8_t>(label);
    std::uint8_t* img = s.images.data() + static_cast<std::size_t>(i) * 28 * 28;
    for (int t = 0; t < 12; ++t) img[(8 + t) * 28 + (4 + (label + t) % 18)] = 220;
  }
  return s;
}

ColorBatch small_train(std::uint32_t n = 2000) {
  ColorConfig cfg;
  cfg.seed = 17;
  return build_color_dataset(synthetic_digits(n), cfg, Split::train);
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const ColorBatch train = small_train(400);
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.seed = 5;
  const MlpModel a = train_mlp(train, cfg);
  const MlpModel b = train_mlp(train, cfg);
  REQUIRE(a.w1 == b.w1);
  REQUIRE(a.b1 == b.b1);
  REQUIRE(a.w2 == b.w2);
  REQUIRE(a.b2 == b.b2);
}

TEST_CASE("training is unchanged by the BLAS thread setting") {
  const ColorBatch train = small_train(400);
  TrainConfig cfg;
  cfg.steps = 40;
  cfg.seed = 6;
  openblas_set_num_threads(1);
  const MlpModel a = train_mlp(train, cfg);
  openblas_set_num_threads(4);
  const MlpModel b = train_mlp(train, cfg);
  openblas_set_num_threads(1);
  REQUIRE(a.w1 == b.w1);
  REQUIRE(a.w2 == b.w2);
}

TEST_CASE("zero steps returns the initialization") {
  const ColorBatch train = small_train(100);
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.seed = 9;
  const MlpModel a = train_mlp(train, cfg);
  const MlpModel b = train_mlp(train, cfg);
  REQUIRE(a.w1 == b.w1);
  REQUIRE(a.b1 == std::vector<float>(kHidden, 0.f));
}

TEST_CASE("short training separates the color task") {
  const ColorBatch train = small_train(2000);
  TrainConfig cfg;
  cfg.steps = 600;
  cfg.seed = 11;
  const MlpModel model = train_mlp(train, cfg);
  REQUIRE(eval_color({&model}, train, EvalColorMode::single) > 0.95);
}

TEST_CASE("near-total label smoothing collapses confidence") {
  const ColorBatch train = small_train(600);
  TrainConfig cfg;
  cfg.steps = 400;
  cfg.seed = 12;
  cfg.label_smoothing = 0.9999f;
  const MlpModel model = train_mlp(train, cfg);
  const std::vector<float> logits = mlp_logits(model, train);
  double conf = 0.0;
  for (std::int64_t i = 0; i < train.n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * kClasses;
    float mx = row[0];
    for (int k = 1; k < kClasses; ++k) mx = std::max(mx, row[k]);
    double sum = 0.0, best = 0.0;
    for (int k = 0; k < kClasses; ++k) sum += std::exp(row[k] - mx);
    best = 1.0 / sum;  // exp(0)/sum for the max row
    conf += best;
  }
  conf /= static_cast<double>(train.n);
  REQUIRE(conf < 0.2);
}

TEST_CASE("eval_color checks model arity") {
  const ColorBatch train = small_train(50);
  TrainConfig cfg;
  cfg.steps = 0;
  const MlpModel m = train_mlp(train, cfg);
  REQUIRE_THROWS_AS(eval_color({&m}, train, EvalColorMode::ose), std::invalid_argument);
  REQUIRE_THROWS_AS(eval_color({&m, &m}, train, EvalColorMode::single), std::invalid_argument);
  // OSE of a model with itself equals the single accuracy exactly.
  REQUIRE(eval_color({&m, &m}, train, EvalColorMode::ose) ==
          eval_color({&m}, train, EvalColorMode::single));
}

TEST_CASE("occlusion: blacking a cell moves some predictions, bad ids rejected") {
  const ColorBatch train = small_train(800);
  TrainConfig cfg;
  cfg.steps = 400;
  cfg.seed = 13;
  const MlpModel model = train_mlp(train, cfg);
  // On a heavily corrupted test split the 32 color votes disagree, margins
  // thin out, and removing single patches flips some predictions.
  ColorConfig test_cfg;
  test_cfg.seed = 18;
  test_cfg.p_test = 0.9;
  const ColorBatch test =
      build_color_dataset(synthetic_digits(800, 8), test_cfg, Split::test);
  double total = 0.0;
  for (int j = 0; j < kPatches; ++j) total += occlusion_sensitivity(model, test, j);
  REQUIRE(total > 0.0);  // a trained model uses the colors
  REQUIRE_THROWS_AS(occlusion_sensitivity(model, test, 32), std::invalid_argument);
}

TEST_CASE("occlusion control: a reserved black cell changes nothing") {
  const ColorBatch train = small_train(500);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.seed = 14;
  const MlpModel model = train_mlp(train, cfg);
  // Cell (2,2) is reserved: already black outside strokes, and strokes are
  // excluded from masking, so occluding it is a no-op.
  REQUIRE(occlusion_sensitivity_cell(model, train, 2, 2) == 0.0);
}
