#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfd/mnist/fetch.hpp"
#include "sfd/rng.hpp"

namespace sfd::mnist {

// Canvas geometry: a 6x6 grid of 7x7 cells tiles the 42x42 image. The four
// central cells (grid rows 2-3 x cols 2-3) are reserved (black, digit over
// them); the remaining 32 cells are the spurious color patches, numbered
// row-major. The 28x28 digit is alpha-composited centered, strokes toward
// white.
inline constexpr int kCanvas = 42;
inline constexpr int kGrid = 6;
inline constexpr int kCell = 7;
inline constexpr int kPatches = 32;
inline constexpr int kDigitOffset = 7;
inline constexpr int kImageBytes = kCanvas * kCanvas * 3;

inline constexpr bool is_reserved_cell(int gr, int gc) {
  return gr >= 2 && gr <= 3 && gc >= 2 && gc <= 3;
}

/// Grid cell of a patch index (0..31).
inline std::pair<int, int> patch_cell(int patch_id) {
  if (patch_id < 0 || patch_id >= kPatches)
    throw std::invalid_argument("patch_cell: patch_id outside 0..31");
  int seen = 0;
  for (int gr = 0; gr < kGrid; ++gr)
    for (int gc = 0; gc < kGrid; ++gc) {
      if (is_reserved_cell(gr, gc)) continue;
      if (seen == patch_id) return {gr, gc};
      ++seen;
    }
  throw std::logic_error("patch_cell: unreachable");
}

enum class ColorVariant { multi, single };
enum class Split { train, test };

/// Ten well-separated palette colors; white and yellow lead, black is kept
/// out of the palette because reserved cells and occlusion use it.
inline constexpr std::array<std::array<std::uint8_t, 3>, 10> default_palette() {
  return {{{255, 255, 255},   // white
           {255, 255, 0},     // yellow
           {255, 0, 0},       // red
           {0, 255, 0},       // green
           {0, 96, 255},      // blue
           {0, 255, 255},     // cyan
           {255, 0, 255},     // magenta
           {255, 128, 0},     // orange
           {128, 0, 255},     // purple
           {0, 128, 64}}};    // dark green
}

struct ColorConfig {
  ColorVariant variant = ColorVariant::multi;
  int n_patches = kPatches;
  std::array<std::array<std::uint8_t, 3>, 10> palette = default_palette();
  double p_test = 0.0;  // per-sample per-patch corruption probability (test split)
  std::uint64_t seed = 0;

  /// Per-patch label-to-color bijection.
  int patch_map(int patch, int label) const { return (label + patch) % 10; }

  void validate() const {
    if (n_patches != kPatches)
      throw std::invalid_argument("ColorConfig: geometry fixes n_patches at 32");
    if (!(p_test >= 0.0 && p_test <= 1.0))
      throw std::invalid_argument("ColorConfig: p_test outside [0,1]");
    for (std::size_t a = 0; a < palette.size(); ++a)
      for (std::size_t b = a + 1; b < palette.size(); ++b)
        if (palette[a] == palette[b])
          throw std::invalid_argument("ColorConfig: palette entries must be distinct");
  }
};

/// Color-patch dataset. Images are stored as 8-bit intensities; value/255 is
/// the [0,1] float image the models consume. patch_colors keeps the
/// ground-truth color index per patch, stroke_mask flags digit-stroke pixels
/// (blend weight > 0.5), which occlusion leaves untouched.
struct ColorBatch {
  std::int64_t n = 0;
  std::vector<std::uint8_t> images;        // n * 42*42*3
  std::vector<std::uint8_t> labels;        // n, 0..9
  std::vector<std::uint8_t> patch_colors;  // n * 32
  std::vector<std::uint8_t> stroke_mask;   // n * 42*42

  const std::uint8_t* image(std::int64_t i) const { return images.data() + i * kImageBytes; }
  std::uint8_t* image(std::int64_t i) { return images.data() + i * kImageBytes; }
  const std::uint8_t* strokes(std::int64_t i) const {
    return stroke_mask.data() + i * kCanvas * kCanvas;
  }
};

/// Builds MultiColorMNIST / SingleColorMNIST from raw MNIST digits.
/// Train split: patch j shows patch_map(j, label) always. Test split: each
/// patch (multi) or the single shared color decision (single) is re-drawn
/// uniformly over the 10 colors with probability p_test, per sample. Sample i
/// draws from RngStream(seed).child(i), so the build is order-independent.
inline ColorBatch build_color_dataset(const MnistSet& mnist, const ColorConfig& config,
                                      Split split) {
  config.validate();
  if (mnist.rows != 28 || mnist.cols != 28)
    throw std::invalid_argument("build_color_dataset: expected 28x28 digits");
  ColorBatch batch;
  batch.n = mnist.n;
  batch.images.assign(static_cast<std::size_t>(batch.n) * kImageBytes, 0);
  batch.labels = mnist.labels;
  batch.patch_colors.assign(static_cast<std::size_t>(batch.n) * kPatches, 0);
  batch.stroke_mask.assign(static_cast<std::size_t>(batch.n) * kCanvas * kCanvas, 0);

  const RngStream root(config.seed);
  for (std::int64_t i = 0; i < batch.n; ++i) {
    RngStream stream = root.child(static_cast<std::uint64_t>(i));
    const int label = batch.labels[static_cast<std::size_t>(i)];
    std::uint8_t* colors = batch.patch_colors.data() + i * kPatches;

    if (config.variant == ColorVariant::multi) {
      for (int j = 0; j < kPatches; ++j) {
        int c = config.patch_map(j, label);
        if (split == Split::test && stream.next_double() < config.p_test)
          c = static_cast<int>(stream.next_below(10));
        colors[j] = static_cast<std::uint8_t>(c);
      }
    } else {
      int c = config.patch_map(0, label);
      if (split == Split::test && stream.next_double() < config.p_test)
        c = static_cast<int>(stream.next_below(10));
      for (int j = 0; j < kPatches; ++j) colors[j] = static_cast<std::uint8_t>(c);
    }

    std::uint8_t* img = batch.image(i);
    int patch = 0;
    for (int gr = 0; gr < kGrid; ++gr)
      for (int gc = 0; gc < kGrid; ++gc) {
        if (is_reserved_cell(gr, gc)) continue;
        const auto& rgb = config.palette[colors[patch]];
        for (int r = gr * kCell; r < (gr + 1) * kCell; ++r)
          for (int c = gc * kCell; c < (gc + 1) * kCell; ++c) {
            std::uint8_t* px = img + (r * kCanvas + c) * 3;
            px[0] = rgb[0];
            px[1] = rgb[1];
            px[2] = rgb[2];
          }
        ++patch;
      }

    const std::uint8_t* digit = mnist.images.data() + static_cast<std::size_t>(i) * 28 * 28;
    std::uint8_t* strokes = batch.stroke_mask.data() + i * kCanvas * kCanvas;
    for (int r = 0; r < 28; ++r)
      for (int c = 0; c < 28; ++c) {
        const std::uint8_t dv = digit[r * 28 + c];
        if (dv == 0) continue;
        const double v = dv / 255.0;
        const int rr = r + kDigitOffset, cc = c + kDigitOffset;
        std::uint8_t* px = img + (rr * kCanvas + cc) * 3;
        for (int ch = 0; ch < 3; ++ch)
          px[ch] = static_cast<std::uint8_t>((1.0 - v) * px[ch] + v * 255.0 + 0.5);
        if (v > 0.5) strokes[rr * kCanvas + cc] = 1;
      }
  }
  return batch;
}

/// Binary P6 PPM, 8-bit, row-major. Input intensities in [0,1].
inline void export_ppm(const double* image, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("export_ppm: cannot open " + path);
  os << "P6\n" << kCanvas << " " << kCanvas << "\n255\n";
  for (int t = 0; t < kImageBytes; ++t) {
    double v = image[t];
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    os.put(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
  }
  if (!os) throw std::runtime_error("export_ppm: write failed for " + path);
}

inline void export_ppm_u8(const std::uint8_t* image, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("export_ppm: cannot open " + path);
  os << "P6\n" << kCanvas << " " << kCanvas << "\n255\n";
  os.write(reinterpret_cast<const char*>(image), kImageBytes);
  if (!os) throw std::runtime_error("export_ppm: write failed for " + path);
}

}  // namespace sfd::mnist
