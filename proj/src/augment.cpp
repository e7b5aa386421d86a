#include "omrkit/augment.hpp"

#include <algorithm>
#include <cmath>

#include "omrkit/error.hpp"

namespace omrkit {

namespace {

Crop cut_crop(const GrayImage& image, const Page& page, std::size_t index,
              const AugmentConfig& cfg) {
  const Annotation& a = page.annotations[index];
  const int origin_x = static_cast<int>(std::floor(a.bbox.center_x() - 0.5 * cfg.crop_w));
  const int origin_y = static_cast<int>(std::floor(a.bbox.center_y() - 0.5 * cfg.crop_h));

  Crop crop;
  crop.class_name = a.class_name;
  crop.source_page = page.id;
  crop.source_index = index;
  crop.pixels = GrayImage(cfg.crop_h, cfg.crop_w, 255);
  for (int r = 0; r < cfg.crop_h; ++r) {
    for (int c = 0; c < cfg.crop_w; ++c) {
      const int sr = origin_y + r;
      const int sc = origin_x + c;
      if (image.contains(sr, sc)) crop.pixels.at(r, c) = image.at(sr, sc);
    }
  }
  crop.inner_bbox = a.bbox.translated(-origin_x, -origin_y).clipped(cfg.crop_w, cfg.crop_h);
  return crop;
}

}  // namespace

CropBank build_crop_bank(const Dataset& dataset, const std::vector<std::string>& rare,
                         const AugmentConfig& cfg, const ImageProvider& images) {
  if (cfg.crop_w <= 0 || cfg.crop_h <= 0) {
    throw Error(Errc::validation_error, "crop size must be positive");
  }
  CropBank bank;
  bank.rare_set = rare;
  for (const auto& page : dataset.pages) {
    const bool needed = std::any_of(page.annotations.begin(), page.annotations.end(),
                                    [&](const Annotation& a) {
                                      return std::find(rare.begin(), rare.end(), a.class_name) !=
                                             rare.end();
                                    });
    if (!needed) continue;
    GrayImage image;
    try {
      image = images(page);
    } catch (const Error& e) {
      throw Error(Errc::missing_image, "page '" + page.id + "': " + e.what());
    }
    if (image.height() != page.height || image.width() != page.width) {
      throw Error(Errc::missing_image, "page '" + page.id + "': image size does not match page");
    }
    for (std::size_t i = 0; i < page.annotations.size(); ++i) {
      const auto& name = page.annotations[i].class_name;
      if (std::find(rare.begin(), rare.end(), name) == rare.end()) continue;
      bank.by_class[name].push_back(cut_crop(image, page, i, cfg));
    }
  }
  for (const auto& name : rare) {
    if (!bank.by_class.contains(name)) bank.zero_instance.push_back(name);
  }
  if (bank.empty()) throw Error(Errc::empty_bank, "no rare class has any instance");
  return bank;
}

std::vector<Crop> sample_crops(const CropBank& bank, std::size_t k, Rng& rng) {
  if (bank.empty()) throw Error(Errc::empty_bank, "cannot sample from an empty crop bank");
  std::vector<const std::vector<Crop>*> classes;
  for (const auto& [name, crops] : bank.by_class) classes.push_back(&crops);
  std::vector<Crop> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& crops = *classes[rng.index(classes.size())];
    out.push_back(crops[rng.index(crops.size())]);
  }
  return out;
}

std::vector<Slot> margin_layout(int page_width, std::size_t count, const AugmentConfig& cfg) {
  if (count == 0) return {};
  const int per_row = (page_width + cfg.gap) / (cfg.crop_w + cfg.gap);
  if (per_row <= 0) {
    throw Error(Errc::does_not_fit, "page width " + std::to_string(page_width) +
                                        " cannot hold a single crop");
  }
  const std::size_t rows = (count + per_row - 1) / per_row;
  if (rows > static_cast<std::size_t>(cfg.margin_rows)) {
    throw Error(Errc::does_not_fit, std::to_string(count) + " crops need " +
                                        std::to_string(rows) + " rows, margin holds " +
                                        std::to_string(cfg.margin_rows));
  }
  std::vector<Slot> slots;
  slots.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int row = static_cast<int>(i / per_row);
    const int col = static_cast<int>(i % per_row);
    slots.push_back({col * (cfg.crop_w + cfg.gap), row * cfg.crop_h});
  }
  return slots;
}

PageImage augment_page(const Page& page, const GrayImage& image, const std::vector<Crop>& crops,
                       const AugmentConfig& cfg) {
  if (image.empty()) throw Error(Errc::missing_image, "page '" + page.id + "' has no image");
  if (image.height() != page.height || image.width() != page.width) {
    throw Error(Errc::missing_image, "page '" + page.id + "': image size does not match page");
  }
  PageImage out{page, image};
  if (crops.empty()) return out;

  if (cfg.band_height() > page.height) {
    throw Error(Errc::does_not_fit, "page '" + page.id + "' is shorter than the margin band");
  }
  for (const auto& a : page.annotations) {
    if (a.bbox.y_min < cfg.band_height()) {
      throw Error(Errc::does_not_fit, "page '" + page.id + "': margin band is not clear ('" +
                                          a.class_name + "' intrudes)");
    }
  }
  const auto slots = margin_layout(page.width, crops.size(), cfg);
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const Crop& crop = crops[i];
    if (crop.pixels.height() != cfg.crop_h || crop.pixels.width() != cfg.crop_w) {
      throw Error(Errc::validation_error, "crop size does not match the configuration");
    }
    const Slot slot = slots[i];
    for (int r = 0; r < cfg.crop_h; ++r) {
      for (int c = 0; c < cfg.crop_w; ++c) {
        out.image.at(slot.y + r, slot.x + c) = crop.pixels.at(r, c);
      }
    }
    Annotation added;
    added.class_name = crop.class_name;
    added.bbox = crop.inner_bbox.translated(slot.x, slot.y);
    out.page.annotations.push_back(std::move(added));
  }
  return out;
}

double expected_wait(std::size_t num_rare, std::size_t k) {
  if (num_rare == 0 || k == 0) {
    throw Error(Errc::validation_error, "expected_wait needs R >= 1 and k >= 1");
  }
  const double miss = std::pow(1.0 - 1.0 / static_cast<double>(num_rare), static_cast<double>(k));
  return 1.0 / (1.0 - miss);
}

std::size_t max_rare_for_wait(std::size_t k, double max_wait) {
  std::size_t r = 0;
  while (expected_wait(r + 1, k) <= max_wait) ++r;
  return r;
}

}  // namespace omrkit
