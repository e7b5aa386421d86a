#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "omrkit/annotation.hpp"
#include "omrkit/image.hpp"
#include "omrkit/rng.hpp"

namespace omrkit {

struct AugmentConfig {
  int num_crops = 12;
  int crop_w = 130;
  int crop_h = 80;
  /// Crop rows reserved at the top of the page; the band is margin_rows * crop_h tall.
  int margin_rows = 2;
  int gap = 4;
  std::uint64_t seed = 0;

  int band_height() const noexcept { return margin_rows * crop_h; }
};

/// Fixed-size window around one rare symbol instance.
struct Crop {
  std::string class_name;
  GrayImage pixels;
  std::string source_page;
  std::size_t source_index = 0;
  BBox inner_bbox;
};

struct CropBank {
  std::map<std::string, std::vector<Crop>> by_class;
  std::vector<std::string> rare_set;
  /// Rare classes with no instance in the dataset.
  std::vector<std::string> zero_instance;

  bool empty() const noexcept { return by_class.empty(); }
};

struct PageImage {
  Page page;
  GrayImage image;
};

using ImageProvider = std::function<GrayImage(const Page&)>;

/// Cuts every instance of each rare class out of its page image, centered in
/// a crop_h x crop_w window with white padding beyond the page border.
/// Throws Error(missing_image) when the provider fails, Error(empty_bank)
/// when no rare class has an instance.
CropBank build_crop_bank(const Dataset& dataset, const std::vector<std::string>& rare,
                         const AugmentConfig& cfg, const ImageProvider& images);

/// k draws: class uniform over bank keys, then instance uniform within it.
std::vector<Crop> sample_crops(const CropBank& bank, std::size_t k, Rng& rng);

/// Top-left corner (x, y) of the i-th crop slot in the margin band.
struct Slot {
  int x = 0;
  int y = 0;
};
std::vector<Slot> margin_layout(int page_width, std::size_t count, const AugmentConfig& cfg);

/// Pastes crops row-major into the top band and appends one annotation per
/// crop. Throws Error(does_not_fit) when the layout exceeds the band or the
/// band is not free of existing annotations.
PageImage augment_page(const Page& page, const GrayImage& image, const std::vector<Crop>& crops,
                       const AugmentConfig& cfg);

/// Expected number of augmented pages until a fixed rare class shows up,
/// with k uniform class draws per page over R classes.
double expected_wait(std::size_t num_rare, std::size_t k);

/// Largest rare-set size whose expected wait stays within `max_wait`.
std::size_t max_rare_for_wait(std::size_t k, double max_wait);

}  // namespace omrkit
