#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "omrkit/annotation.hpp"
#include "omrkit/detection.hpp"

namespace omrkit {

/// Per-pixel detector outputs: energy (H x W), class scores (K x H x W) and
/// predicted box width/height (2 x H x W), all row-major.
class MapStack {
 public:
  MapStack() = default;
  MapStack(int height, int width, int num_classes);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  float& energy(int row, int col) { return energy_[offset(row, col)]; }
  float energy(int row, int col) const { return energy_[offset(row, col)]; }
  float& class_score(int k, int row, int col) { return scores_[k * plane_size() + offset(row, col)]; }
  float class_score(int k, int row, int col) const {
    return scores_[k * plane_size() + offset(row, col)];
  }
  float& box_w(int row, int col) { return box_[offset(row, col)]; }
  float box_w(int row, int col) const { return box_[offset(row, col)]; }
  float& box_h(int row, int col) { return box_[plane_size() + offset(row, col)]; }
  float box_h(int row, int col) const { return box_[plane_size() + offset(row, col)]; }

  std::vector<float>& energy_plane() noexcept { return energy_; }
  const std::vector<float>& energy_plane() const noexcept { return energy_; }
  std::vector<float>& class_planes() noexcept { return scores_; }
  const std::vector<float>& class_planes() const noexcept { return scores_; }
  std::vector<float>& box_planes() noexcept { return box_; }
  const std::vector<float>& box_planes() const noexcept { return box_; }

  /// Clamps energy into [0, 1] and negative scores/sizes to 0.
  void sanitize();

  friend bool operator==(const MapStack&, const MapStack&) = default;

 private:
  std::size_t offset(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<float> energy_;
  std::vector<float> scores_;
  std::vector<float> box_;
};

/// "DWM1", u32 H, W, K (little-endian), then f32 LE: energy, class scores, box_wh.
std::string encode_dwm(const MapStack& maps);
MapStack decode_dwm(std::string_view bytes);
MapStack read_dwm(const std::filesystem::path& path);
void write_dwm(const MapStack& maps, const std::filesystem::path& path);

struct BoxSize {
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const BoxSize&, const BoxSize&) = default;
};

struct CachedBoxTable {
  std::map<std::string, BoxSize> boxes;
  /// Registry classes without any ground-truth instance.
  std::vector<std::string> empty_classes;

  std::optional<BoxSize> lookup(const std::string& class_name) const;
};

/// Per class, element-wise median of GT widths and heights.
CachedBoxTable build_cached_boxes(const Dataset& dataset);
std::string cached_boxes_to_json(const CachedBoxTable& table);
CachedBoxTable cached_boxes_from_json(std::string_view text);

enum class BoxMode { regressed, cached, hybrid };

std::optional<BoxMode> parse_box_mode(std::string_view text) noexcept;
const char* box_mode_name(BoxMode mode) noexcept;

struct PostConfig {
  double energy_threshold = 0.2;
  int connectivity = 8;
  std::size_t min_area = 4;
  BoxMode box_mode = BoxMode::regressed;
  double hybrid_tolerance = 0.5;

  /// Throws Error(validation_error) when a field is out of range.
  void validate() const;
};

struct Component {
  /// Row-major linear pixel indices, ascending.
  std::vector<std::size_t> pixels;
  /// Energy-weighted centroid in continuous coordinates (pixel centers at +0.5).
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double peak_energy = 0.0;
  double energy_sum = 0.0;
};

/// Connected components of {energy >= threshold}, dropping those smaller
/// than min_area, ordered by their first pixel in row-major order.
std::vector<Component> extract_markers(const MapStack& maps, const PostConfig& cfg);
std::vector<Component> extract_markers(const std::vector<float>& energy, int height, int width,
                                       const PostConfig& cfg);

/// Throws Error(missing_cache_entry) in cached/hybrid mode when a detected
/// class has no table entry, Error(validation_error) on a registry/map mismatch.
std::vector<Detection> detect(const MapStack& maps, const std::vector<std::string>& registry,
                              const PostConfig& cfg, const CachedBoxTable* table = nullptr);

struct BiasBin {
  double min_sqrt_area = 0.0;
  double max_sqrt_area = 0.0;
  std::size_t count = 0;
  double mean_relative_error = 0.0;
};

struct BiasReport {
  std::vector<BiasBin> bins;
  std::size_t matched = 0;
  std::size_t unmatched_detections = 0;
  std::size_t unmatched_gt = 0;
};

inline constexpr double kBiasMatchIou = 0.3;

/// Matches detections to GT (class-aware, IoU >= 0.3), splits matched GT into
/// equal-population bins by sqrt(area) and reports mean (A_det - A_gt) / A_gt
/// per bin. Throws Error(no_matches) when nothing matches.
BiasReport size_bias_report(const std::vector<PageDetections>& dets, const Dataset& gt,
                            std::size_t bins);
BiasReport size_bias_report(const std::vector<Detection>& dets,
                            const std::vector<Annotation>& gts, std::size_t bins);

std::string format_bias_report(const BiasReport& report);

}  // namespace omrkit
