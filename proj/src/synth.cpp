#include "omrkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "omrkit/error.hpp"

namespace omrkit {

namespace {

constexpr int kSideMargin = 20;
constexpr int kBottomMargin = 20;
constexpr int kStaffSpacing = 8;
/// Minimum horizontal clearance between neighbouring symbols (keeps energy
/// bumps of adjacent symbols apart at the default threshold).
constexpr int kSymbolGap = 8;
constexpr int kBandPadding = 4;

bool inside_shape(const Glyph& g, double x, double y) {
  // (x, y) relative to the box's top-left corner, at a pixel center.
  const double w = g.width;
  const double h = g.height;
  const double nx = (x - 0.5 * w) / (0.5 * w);
  const double ny = (y - 0.5 * h) / (0.5 * h);
  const double radial = nx * nx + ny * ny;
  switch (g.shape) {
    case GlyphShape::filled_ellipse:
      return radial <= 1.0;
    case GlyphShape::ellipse_outline:
    case GlyphShape::circle_outline: {
      const double ix = (x - 0.5 * w) / (0.5 * w - 2.0);
      const double iy = (y - 0.5 * h) / (0.5 * h - 2.0);
      return radial <= 1.0 && ix * ix + iy * iy > 1.0;
    }
    case GlyphShape::bar:
      return true;
    case GlyphShape::hash: {
      const bool vertical = std::abs(x - w / 3.0) < 1.0 || std::abs(x - 2.0 * w / 3.0) < 1.0;
      const bool horizontal = std::abs(y - h / 3.0) < 1.5 || std::abs(y - 2.0 * h / 3.0) < 1.5;
      return vertical || horizontal;
    }
    case GlyphShape::cross:
      return std::abs(nx - ny) < 0.3 || std::abs(nx + ny) < 0.3;
    case GlyphShape::clef: {
      const bool spine = std::abs(x - 0.5 * w) < 1.0;
      const double ry = (y - 0.68 * h) / (0.5 * w);
      const double rx = nx;
      const double ring = rx * rx + ry * ry;
      return spine || (ring <= 1.0 && ring >= 0.55);
    }
  }
  return false;
}

void draw_glyph(GrayImage& img, const Glyph& g, int x0, int y0) {
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (inside_shape(g, c + 0.5, r + 0.5) && img.contains(y0 + r, x0 + c)) {
        img.at(y0 + r, x0 + c) = 0;
      }
    }
  }
}

int uniform_int(Rng& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo + 1)));
}

std::size_t weighted_pick(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<double> cumulative_of(const std::vector<double>& weights) {
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  return cumulative;
}

/// Mean over the (2r+1)^2 window clipped to the grid, via a summed-area table.
void mean_filter(std::vector<float>& plane, int height, int width, int radius) {
  std::vector<double> sat(static_cast<std::size_t>(height + 1) * (width + 1), 0.0);
  const auto at = [&](int r, int c) -> double& {
    return sat[static_cast<std::size_t>(r) * (width + 1) + c];
  };
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      at(r + 1, c + 1) = plane[static_cast<std::size_t>(r) * width + c] + at(r, c + 1) +
                         at(r + 1, c) - at(r, c);
    }
  }
  for (int r = 0; r < height; ++r) {
    const int r0 = std::max(0, r - radius);
    const int r1 = std::min(height, r + radius + 1);
    for (int c = 0; c < width; ++c) {
      const int c0 = std::max(0, c - radius);
      const int c1 = std::min(width, c + radius + 1);
      const double sum = at(r1, c1) - at(r0, c1) - at(r1, c0) + at(r0, c0);
      plane[static_cast<std::size_t>(r) * width + c] =
          static_cast<float>(sum / ((r1 - r0) * (c1 - c0)));
    }
  }
}

}  // namespace

const std::vector<Glyph>& glyph_catalogue() {
  static const std::vector<Glyph> glyphs = {
      {"noteheadBlack", 11, 9, GlyphShape::filled_ellipse},
      {"noteheadHalf", 11, 9, GlyphShape::ellipse_outline},
      {"stem", 3, 25, GlyphShape::bar},
      {"augmentationDot", 5, 5, GlyphShape::filled_ellipse},
      {"accidentalSharp", 9, 21, GlyphShape::hash},
      {"restWhole", 13, 5, GlyphShape::bar},
      {"accidentalDoubleSharp", 9, 9, GlyphShape::cross},
      {"timeSigCommon", 15, 15, GlyphShape::circle_outline},
      {"clefG", 17, 37, GlyphShape::clef},
  };
  return glyphs;
}

const Glyph* find_glyph(const std::string& class_name) {
  for (const auto& g : glyph_catalogue()) {
    if (g.class_name == class_name) return &g;
  }
  return nullptr;
}

std::vector<GlyphWeight> PageSpec::effective_mix() const {
  if (!glyph_mix.empty()) return glyph_mix;
  std::vector<GlyphWeight> mix;
  for (const auto& g : glyph_catalogue()) mix.push_back({g.class_name, 1.0});
  return mix;
}

PageImage generate_page(const PageSpec& spec, Rng& rng, const std::string& page_id) {
  const auto mix = spec.effective_mix();
  std::vector<const Glyph*> glyphs;
  std::vector<double> weights;
  for (const auto& entry : mix) {
    const Glyph* g = find_glyph(entry.class_name);
    if (g == nullptr) throw Error(Errc::unknown_class, "no glyph for class '" + entry.class_name + "'");
    if (!(entry.weight >= 0.0)) throw Error(Errc::validation_error, "glyph weights must be >= 0");
    glyphs.push_back(g);
    weights.push_back(entry.weight);
  }
  if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) {
    throw Error(Errc::validation_error, "at least one glyph weight must be positive");
  }
  if (spec.width <= 2 * kSideMargin || spec.height <= spec.top_margin + kBottomMargin ||
      spec.num_staves < 0 || spec.symbols_per_staff < 0 || spec.top_margin < 0) {
    throw Error(Errc::does_not_fit, "page dimensions leave no room for staves");
  }

  int max_w = 0;
  int max_h = 0;
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    max_w = std::max(max_w, glyphs[i]->width);
    max_h = std::max(max_h, glyphs[i]->height);
  }

  const int staves = spec.num_staves;
  const int per_staff = spec.symbols_per_staff;
  const int band = staves > 0 ? (spec.height - spec.top_margin - kBottomMargin) / staves : 0;
  const int total = staves * per_staff;
  if (total > 0) {
    if (band < std::max(max_h, 4 * kStaffSpacing + 1) + 2 * kBandPadding) {
      throw Error(Errc::does_not_fit, "staff band too short for the tallest glyph");
    }
    if ((spec.width - 2 * kSideMargin) / per_staff < max_w + kSymbolGap) {
      throw Error(Errc::does_not_fit, "too many symbols per staff for the page width");
    }
  }

  std::vector<std::size_t> classes;
  classes.reserve(total);
  if (spec.balanced) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < glyphs.size(); ++i) {
      if (weights[i] > 0.0) active.push_back(i);
    }
    for (int i = 0; i < total; ++i) classes.push_back(active[i % active.size()]);
    for (std::size_t i = classes.size(); i > 1; --i) {
      std::swap(classes[i - 1], classes[rng.index(i)]);
    }
  } else {
    const auto cumulative = cumulative_of(weights);
    for (int i = 0; i < total; ++i) classes.push_back(weighted_pick(cumulative, rng));
  }

  PageImage out;
  out.page.id = page_id;
  out.page.width = spec.width;
  out.page.height = spec.height;
  out.image = GrayImage(spec.height, spec.width, 255);

  for (int s = 0; s < staves; ++s) {
    const int band_top = spec.top_margin + s * band;
    const int mid = band_top + band / 2;
    for (int line = -2; line <= 2; ++line) {
      const int y = mid + line * kStaffSpacing;
      for (int x = kSideMargin; x < spec.width - kSideMargin; ++x) out.image.at(y, x) = 0;
    }
  }

  if (total > 0) {
    const int slot = (spec.width - 2 * kSideMargin) / per_staff;
    for (int s = 0; s < staves; ++s) {
      const int band_top = spec.top_margin + s * band;
      for (int i = 0; i < per_staff; ++i) {
        const Glyph& g = *glyphs[classes[static_cast<std::size_t>(s) * per_staff + i]];
        const int slot_x = kSideMargin + i * slot;
        const int x0 = uniform_int(rng, slot_x + kSymbolGap / 2, slot_x + slot - g.width - kSymbolGap / 2);
        const int y0 = uniform_int(rng, band_top + kBandPadding, band_top + band - g.height - kBandPadding);
        draw_glyph(out.image, g, x0, y0);
        Annotation a;
        a.class_name = g.class_name;
        a.bbox = {static_cast<double>(x0), static_cast<double>(y0),
                  static_cast<double>(x0 + g.width), static_cast<double>(y0 + g.height)};
        out.page.annotations.push_back(std::move(a));
      }
    }
  }
  return out;
}

SynthDataset generate_dataset(const PageSpec& spec, std::size_t num_pages, std::uint64_t seed) {
  SynthDataset out;
  for (const auto& entry : spec.effective_mix()) out.dataset.register_class(entry.class_name);
  for (std::size_t i = 0; i < num_pages; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "page_%03zu", i);
    Rng rng(derive_seed(seed, i));
    auto generated = generate_page(spec, rng, id);
    generated.page.image_path = std::string(id) + ".pgm";
    out.dataset.pages.push_back(std::move(generated.page));
    out.images.push_back(std::move(generated.image));
  }
  return out;
}

MapStack render_maps(const Page& page, const NoiseSpec& noise,
                     const std::vector<std::string>& registry) {
  if (noise.energy_noise_sigma < 0.0 || noise.class_confusion < 0.0 ||
      noise.class_confusion >= 1.0 || noise.box_smoothing_radius < 0) {
    throw Error(Errc::validation_error, "noise parameters out of range");
  }
  const int h = page.height;
  const int w = page.width;
  MapStack maps(h, w, static_cast<int>(registry.size()));
  Rng rng(noise.seed);

  std::vector<std::size_t> class_of;
  for (const auto& a : page.annotations) {
    const auto it = std::find(registry.begin(), registry.end(), a.class_name);
    if (it == registry.end()) {
      throw Error(Errc::unknown_class, "class '" + a.class_name + "' missing from registry");
    }
    std::size_t k = static_cast<std::size_t>(it - registry.begin());
    if (registry.size() > 1 && noise.class_confusion > 0.0 && rng.bernoulli(noise.class_confusion)) {
      const std::size_t other = rng.index(registry.size() - 1);
      k = other < k ? other : other + 1;
    }
    class_of.push_back(k);
  }

  double mean_w = 0.0;
  double mean_h = 0.0;
  if (noise.box_smoothing_radius > 0 && !page.annotations.empty()) {
    for (const auto& a : page.annotations) {
      mean_w += a.bbox.width();
      mean_h += a.bbox.height();
    }
    mean_w /= static_cast<double>(page.annotations.size());
    mean_h /= static_cast<double>(page.annotations.size());
  }
  std::fill(maps.box_planes().begin(), maps.box_planes().begin() + maps.plane_size(),
            static_cast<float>(mean_w));
  std::fill(maps.box_planes().begin() + maps.plane_size(), maps.box_planes().end(),
            static_cast<float>(mean_h));

  std::vector<double> energy(maps.plane_size(), 0.0);
  for (std::size_t n = 0; n < page.annotations.size(); ++n) {
    const BBox& b = page.annotations[n].bbox;
    const double cx = b.center_x();
    const double cy = b.center_y();
    const double sx = b.width() / 4.0;
    const double sy = b.height() / 4.0;
    if (sx > 0.0 && sy > 0.0) {
      const int c0 = std::max(0, static_cast<int>(std::floor(cx - 4.0 * sx)));
      const int c1 = std::min(w - 1, static_cast<int>(std::ceil(cx + 4.0 * sx)));
      const int r0 = std::max(0, static_cast<int>(std::floor(cy - 4.0 * sy)));
      const int r1 = std::min(h - 1, static_cast<int>(std::ceil(cy + 4.0 * sy)));
      for (int r = r0; r <= r1; ++r) {
        const double dy = (r + 0.5 - cy) / sy;
        for (int c = c0; c <= c1; ++c) {
          const double dx = (c + 0.5 - cx) / sx;
          energy[static_cast<std::size_t>(r) * w + c] += std::exp(-0.5 * (dx * dx + dy * dy));
        }
      }
    }
    for (int r = std::max(0, static_cast<int>(std::floor(b.y_min)));
         r < std::min(h, static_cast<int>(std::ceil(b.y_max))); ++r) {
      if (r + 0.5 < b.y_min || r + 0.5 >= b.y_max) continue;
      for (int c = std::max(0, static_cast<int>(std::floor(b.x_min)));
           c < std::min(w, static_cast<int>(std::ceil(b.x_max))); ++c) {
        if (c + 0.5 < b.x_min || c + 0.5 >= b.x_max) continue;
        maps.class_score(static_cast<int>(class_of[n]), r, c) = 1.0f;
        maps.box_w(r, c) = static_cast<float>(b.width());
        maps.box_h(r, c) = static_cast<float>(b.height());
      }
    }
  }

  auto& plane = maps.energy_plane();
  for (std::size_t i = 0; i < plane.size(); ++i) {
    double e = std::min(energy[i], 1.0);
    if (noise.energy_noise_sigma > 0.0) e += noise.energy_noise_sigma * rng.normal();
    plane[i] = static_cast<float>(std::clamp(e, 0.0, 1.0));
  }

  if (noise.box_smoothing_radius > 0) {
    std::vector<float> width_plane(maps.box_planes().begin(),
                                   maps.box_planes().begin() + maps.plane_size());
    std::vector<float> height_plane(maps.box_planes().begin() + maps.plane_size(),
                                    maps.box_planes().end());
    mean_filter(width_plane, h, w, noise.box_smoothing_radius);
    mean_filter(height_plane, h, w, noise.box_smoothing_radius);
    std::copy(width_plane.begin(), width_plane.end(), maps.box_planes().begin());
    std::copy(height_plane.begin(), height_plane.end(),
              maps.box_planes().begin() + maps.plane_size());
  }
  return maps;
}

GrayImage degrade_image(const GrayImage& img, const DegradeSpec& spec, Rng& rng) {
  if (!(spec.contrast >= 0.5 && spec.contrast <= 1.5) || spec.blur_sigma < 0.0 ||
      spec.blur_sigma > 3.0 || spec.noise_sigma < 0.0 || spec.noise_sigma > 25.0 ||
      std::abs(spec.warp.theta_deg) > 10.0 || std::abs(spec.warp.tx) > 50.0 ||
      std::abs(spec.warp.ty) > 50.0) {
    throw Error(Errc::validation_error, "degradation parameters out of range");
  }
  GrayImage out = img;
  if (spec.contrast != 1.0) {
    for (auto& p : out.pixels()) {
      const double v = 127.5 + spec.contrast * (p - 127.5);
      p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  out = gaussian_blur(out, spec.blur_sigma);
  out = warp_image(out, spec.warp);
  if (spec.noise_sigma > 0.0) {
    for (auto& p : out.pixels()) {
      const double v = p + spec.noise_sigma * rng.normal();
      p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

std::vector<double> zipf_weights(std::size_t num_classes, double exponent) {
  std::vector<double> weights(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& v : weights) v /= total;
  return weights;
}

double calibrate_zipf_exponent(std::size_t num_classes, std::size_t k, double target) {
  if (k == 0 || k >= num_classes || !(target > static_cast<double>(k) / num_classes) ||
      !(target < 1.0)) {
    throw Error(Errc::validation_error, "unreachable Zipf coverage target");
  }
  const auto head = [&](double s) {
    const auto w = zipf_weights(num_classes, s);
    return std::accumulate(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
  };
  double lo = 0.0;
  double hi = 1.0;
  while (head(hi) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (head(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Dataset sample_label_dataset(const std::vector<std::string>& registry,
                             const std::vector<double>& weights, std::size_t total, Rng& rng) {
  if (registry.size() != weights.size() || registry.empty()) {
    throw Error(Errc::validation_error, "registry and weights must match");
  }
  Dataset d;
  d.class_registry = registry;
  Page page{"labels", 10, 10, std::nullopt, {}};
  page.annotations.reserve(total);
  const auto cumulative = cumulative_of(weights);
  for (std::size_t i = 0; i < total; ++i) {
    Annotation a;
    a.class_name = registry[weighted_pick(cumulative, rng)];
    a.bbox = {0.0, 0.0, 1.0, 1.0};
    page.annotations.push_back(std::move(a));
  }
  d.pages.push_back(std::move(page));
  return d;
}

}  // namespace omrkit
