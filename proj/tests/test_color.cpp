#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "sfd/mnist/color.hpp"
#include "sfd/rng.hpp"

using namespace sfd::mnist;

namespace {

/// Synthetic digit corpus: a few stroke pixels per digit, label-dependent.
MnistSet synthetic_digits(std::uint32_t n, std::uint64_t seed = 99) {
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
    // A diagonal stroke whose position depends on the label; mixed
    // intensities cover both the >0.5 and <=0.5 blend branches.
    for (int t = 0; t < 12; ++t) {
      img[(8 + t) * 28 + (8 + (label + t) % 12)] = 255;
      img[(9 + t) * 28 + (8 + (label + t) % 12)] = 100;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("patch geometry: 32 patches, reserved center") {
  int reserved = 0;
  for (int gr = 0; gr < kGrid; ++gr)
    for (int gc = 0; gc < kGrid; ++gc) reserved += is_reserved_cell(gr, gc);
  REQUIRE(reserved == 4);
  REQUIRE(patch_cell(0) == std::pair<int, int>{0, 0});
  REQUIRE(patch_cell(31) == std::pair<int, int>{5, 5});
  REQUIRE_THROWS_AS(patch_cell(32), std::invalid_argument);
}

TEST_CASE("train split: every patch shows its mapped color") {
  const MnistSet digits = synthetic_digits(64);
  ColorConfig cfg;
  cfg.seed = 5;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::train);
  for (std::int64_t i = 0; i < batch.n; ++i)
    for (int j = 0; j < kPatches; ++j)
      REQUIRE(batch.patch_colors[static_cast<std::size_t>(i * kPatches + j)] ==
              cfg.patch_map(j, batch.labels[static_cast<std::size_t>(i)]));
}

TEST_CASE("train split: patch pixels equal the palette color off-stroke") {
  const MnistSet digits = synthetic_digits(8);
  ColorConfig cfg;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::train);
  for (std::int64_t i = 0; i < 8; ++i) {
    const std::uint8_t* img = batch.image(i);
    // Patch 0 is cell (0,0), untouched by the centered digit.
    const auto& rgb = cfg.palette[batch.patch_colors[static_cast<std::size_t>(i * kPatches)]];
    for (int r = 0; r < kCell; ++r)
      for (int c = 0; c < kCell; ++c) {
        const std::uint8_t* px = img + (r * kCanvas + c) * 3;
        REQUIRE(px[0] == rgb[0]);
        REQUIRE(px[1] == rgb[1]);
        REQUIRE(px[2] == rgb[2]);
      }
  }
}

TEST_CASE("reserved cells are black outside digit strokes") {
  const MnistSet digits = synthetic_digits(8);
  ColorConfig cfg;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::train);
  for (std::int64_t i = 0; i < 8; ++i) {
    const std::uint8_t* img = batch.image(i);
    const std::uint8_t* digit =
        digits.images.data() + static_cast<std::size_t>(i) * 28 * 28;
    for (int gr = 2; gr <= 3; ++gr)
      for (int gc = 2; gc <= 3; ++gc)
        for (int r = gr * kCell; r < (gr + 1) * kCell; ++r)
          for (int c = gc * kCell; c < (gc + 1) * kCell; ++c) {
            const int dr = r - kDigitOffset, dc = c - kDigitOffset;
            const std::uint8_t dv =
                (dr >= 0 && dr < 28 && dc >= 0 && dc < 28) ? digit[dr * 28 + dc] : 0;
            if (dv != 0) continue;
            const std::uint8_t* px = img + (r * kCanvas + c) * 3;
            REQUIRE(px[0] == 0);
            REQUIRE(px[1] == 0);
            REQUIRE(px[2] == 0);
          }
  }
}

TEST_CASE("test split at p=1: correlated-color frequency is 1/10") {
  const MnistSet digits = synthetic_digits(10000);
  ColorConfig cfg;
  cfg.p_test = 1.0;
  cfg.seed = 11;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::test);
  std::int64_t correlated = 0, total = 0;
  for (std::int64_t i = 0; i < batch.n; ++i)
    for (int j = 0; j < kPatches; ++j) {
      correlated += batch.patch_colors[static_cast<std::size_t>(i * kPatches + j)] ==
                    cfg.patch_map(j, batch.labels[static_cast<std::size_t>(i)]);
      total += 1;
    }
  const double freq = static_cast<double>(correlated) / static_cast<double>(total);
  const double se = std::sqrt(0.1 * 0.9 / static_cast<double>(total));
  REQUIRE(std::abs(freq - 0.1) < 3 * se);
}

TEST_CASE("test split at p=0 equals the train-split statistics") {
  const MnistSet digits = synthetic_digits(256);
  ColorConfig cfg;
  cfg.p_test = 0.0;
  const ColorBatch train = build_color_dataset(digits, cfg, Split::train);
  const ColorBatch test = build_color_dataset(digits, cfg, Split::test);
  REQUIRE(train.patch_colors == test.patch_colors);
  REQUIRE(train.images == test.images);
}

TEST_CASE("multi variant: patches are conditionally independent (chi-square)") {
  const MnistSet digits = synthetic_digits(20000);
  ColorConfig cfg;
  cfg.p_test = 0.9;
  cfg.seed = 21;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::test);
  // Condition on one label; cross-tabulate two patches over 10x10 cells.
  const int label = 3, ja = 4, jb = 17;
  std::array<std::array<int, 10>, 10> table{};
  std::array<int, 10> ra{}, rb{};
  int n = 0;
  for (std::int64_t i = 0; i < batch.n; ++i) {
    if (batch.labels[static_cast<std::size_t>(i)] != label) continue;
    const int a = batch.patch_colors[static_cast<std::size_t>(i * kPatches + ja)];
    const int b = batch.patch_colors[static_cast<std::size_t>(i * kPatches + jb)];
    table[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += 1;
    ra[static_cast<std::size_t>(a)] += 1;
    rb[static_cast<std::size_t>(b)] += 1;
    ++n;
  }
  double chi2 = 0.0;
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) {
      const double expect = static_cast<double>(ra[static_cast<std::size_t>(a)]) *
                            rb[static_cast<std::size_t>(b)] / n;
      if (expect < 1e-9) continue;
      const double diff = table[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] - expect;
      chi2 += diff * diff / expect;
    }
  REQUIRE(chi2 < 128.0);  // chi-square(81) 99% quantile ~ 113.5, with slack
}

TEST_CASE("single variant: one shared color per sample") {
  const MnistSet digits = synthetic_digits(500);
  ColorConfig cfg;
  cfg.variant = ColorVariant::single;
  cfg.p_test = 0.8;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::test);
  for (std::int64_t i = 0; i < batch.n; ++i)
    for (int j = 1; j < kPatches; ++j)
      REQUIRE(batch.patch_colors[static_cast<std::size_t>(i * kPatches + j)] ==
              batch.patch_colors[static_cast<std::size_t>(i * kPatches)]);
}

TEST_CASE("dataset build is deterministic in the seed") {
  const MnistSet digits = synthetic_digits(64);
  ColorConfig cfg;
  cfg.p_test = 0.5;
  cfg.seed = 33;
  const ColorBatch a = build_color_dataset(digits, cfg, Split::test);
  const ColorBatch b = build_color_dataset(digits, cfg, Split::test);
  REQUIRE(a.images == b.images);
  REQUIRE(a.patch_colors == b.patch_colors);
}

TEST_CASE("PPM export round trip") {
  const MnistSet digits = synthetic_digits(2);
  ColorConfig cfg;
  const ColorBatch batch = build_color_dataset(digits, cfg, Split::train);
  const std::string path =
      (std::filesystem::temp_directory_path() / "sfd_test.ppm").string();
  export_ppm_u8(batch.image(0), path);
  std::ifstream is(path, std::ios::binary);
  std::string magic, dims;
  std::getline(is, magic);
  REQUIRE(magic == "P6");
  int w, h, maxval;
  is >> w >> h >> maxval;
  is.get();
  REQUIRE(w == 42);
  REQUIRE(h == 42);
  REQUIRE(maxval == 255);
  std::vector<std::uint8_t> bytes(kImageBytes);
  is.read(reinterpret_cast<char*>(bytes.data()), kImageBytes);
  REQUIRE(is.gcount() == kImageBytes);
  for (int t = 0; t < kImageBytes; ++t) REQUIRE(bytes[static_cast<std::size_t>(t)] == batch.image(0)[t]);
  std::remove(path.c_str());

  // All-zero image: 13-byte header ("P6\n42 42\n255\n") plus 5292 zero bytes.
  const std::vector<double> zero(kImageBytes, 0.0);
  export_ppm(zero.data(), path);
  REQUIRE(std::filesystem::file_size(path) == 13 + kImageBytes);
  std::remove(path.c_str());
}
