#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "omrkit/annotation.hpp"

namespace omrkit {

struct Detection {
  std::string class_name;
  BBox bbox;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct PageDetections {
  std::string page_id;
  std::vector<Detection> detections;

  friend bool operator==(const PageDetections&, const PageDetections&) = default;
};

/// `{"pages":[{"id":..., "detections":[{"class":..., "bbox":[4], "score":...}]}]}`
std::string detections_to_json(const std::vector<PageDetections>& pages);
std::vector<PageDetections> detections_from_json(std::string_view text);

std::vector<PageDetections> load_detections(const std::filesystem::path& path);
void save_detections(const std::vector<PageDetections>& pages, const std::filesystem::path& path);

}  // namespace omrkit
