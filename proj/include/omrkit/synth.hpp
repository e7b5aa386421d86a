#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omrkit/annotation.hpp"
#include "omrkit/augment.hpp"
#include "omrkit/dwd_post.hpp"
#include "omrkit/image.hpp"
#include "omrkit/rng.hpp"
#include "omrkit/scan_align.hpp"

namespace omrkit {

enum class GlyphShape { filled_ellipse, ellipse_outline, bar, hash, cross, circle_outline, clef };

struct Glyph {
  std::string class_name;
  int width;
  int height;
  GlyphShape shape;
};

/// Primitive glyph classes the generator can draw (odd sizes, so box centers
/// fall on pixel centers).
const std::vector<Glyph>& glyph_catalogue();
const Glyph* find_glyph(const std::string& class_name);

struct GlyphWeight {
  std::string class_name;
  double weight = 1.0;
};

struct PageSpec {
  int width = 800;
  int height = 700;
  int num_staves = 4;
  int symbols_per_staff = 16;
  /// Rows kept free of staves and symbols (room for margin augmentation).
  int top_margin = 160;
  bool balanced = false;
  /// Sampling weights in registry order; empty means every catalogue glyph, weight 1.
  std::vector<GlyphWeight> glyph_mix;

  std::vector<GlyphWeight> effective_mix() const;
};

struct NoiseSpec {
  double energy_noise_sigma = 0.0;
  double class_confusion = 0.0;
  int box_smoothing_radius = 0;
  std::uint64_t seed = 0;
};

struct DegradeSpec {
  double contrast = 1.0;
  double blur_sigma = 0.0;
  RigidTransform warp;
  double noise_sigma = 0.0;
};

/// Staff lines plus non-overlapping glyphs with exact annotations. Balanced
/// specs give class counts within 1 of each other. Throws Error(does_not_fit).
PageImage generate_page(const PageSpec& spec, Rng& rng, const std::string& page_id);

/// Pages `page_000`... each drawn from Rng(seed ^ index); image paths are
/// `<id>.pgm`. The registry lists the spec's glyph classes.
struct SynthDataset {
  Dataset dataset;
  std::vector<GrayImage> images;
};
SynthDataset generate_dataset(const PageSpec& spec, std::size_t num_pages, std::uint64_t seed);

/// Oracle detector outputs for a page. With box_smoothing_radius > 0 the box
/// planes hold the page-mean GT size outside symbols before mean filtering.
/// Throws Error(unknown_class) for classes missing from the registry.
MapStack render_maps(const Page& page, const NoiseSpec& noise,
                     const std::vector<std::string>& registry);

/// Contrast (about mid-gray) -> blur -> rigid warp -> additive noise -> clamp.
GrayImage degrade_image(const GrayImage& img, const DegradeSpec& spec, Rng& rng);

/// w_i proportional to 1 / (i + 1)^exponent, normalized.
std::vector<double> zipf_weights(std::size_t num_classes, double exponent);

/// Exponent whose Zipf law puts `target` of the mass on the top k classes.
double calibrate_zipf_exponent(std::size_t num_classes, std::size_t k, double target);

/// Annotation-only dataset (single tall page, no image) with `total` labels
/// drawn from `weights` over `registry`.
Dataset sample_label_dataset(const std::vector<std::string>& registry,
                             const std::vector<double>& weights, std::size_t total, Rng& rng);

}  // namespace omrkit
