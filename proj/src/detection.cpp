#include "omrkit/detection.hpp"

#include <json.hpp>

#include "omrkit/error.hpp"
#include "omrkit/io_util.hpp"

namespace omrkit {

using nlohmann::json;

std::string detections_to_json(const std::vector<PageDetections>& pages) {
  json out = json::array();
  for (const auto& page : pages) {
    json dets = json::array();
    for (const auto& d : page.detections) {
      dets.push_back({{"class", d.class_name},
                      {"bbox", {quantize_coord(d.bbox.x_min), quantize_coord(d.bbox.y_min),
                                quantize_coord(d.bbox.x_max), quantize_coord(d.bbox.y_max)}},
                      {"score", d.score}});
    }
    out.push_back({{"id", page.page_id}, {"detections", std::move(dets)}});
  }
  return json{{"pages", std::move(out)}}.dump(2) + "\n";
}

std::vector<PageDetections> detections_from_json(std::string_view text) {
  const auto fail = [](const std::string& why) -> void {
    throw Error(Errc::schema_error, "detections document: " + why);
  };
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(e.what());
  }
  if (!doc.is_object() || !doc.contains("pages") || !doc["pages"].is_array()) {
    fail("expected an object with a 'pages' array");
  }
  std::vector<PageDetections> pages;
  for (const auto& p : doc["pages"]) {
    if (!p.is_object() || !p.contains("id") || !p["id"].is_string() ||
        !p.contains("detections") || !p["detections"].is_array()) {
      fail("each page needs 'id' and 'detections'");
    }
    PageDetections page{p["id"].get<std::string>(), {}};
    for (const auto& d : p["detections"]) {
      if (!d.is_object() || !d.contains("class") || !d["class"].is_string() ||
          !d.contains("bbox") || !d["bbox"].is_array() || d["bbox"].size() != 4 ||
          !d.contains("score") || !d["score"].is_number()) {
        fail("each detection needs 'class', 'bbox' (4 numbers) and 'score'");
      }
      const auto& b = d["bbox"];
      for (const auto& v : b) {
        if (!v.is_number()) fail("bbox entries must be numbers");
      }
      page.detections.push_back({d["class"].get<std::string>(),
                                 {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                  b[3].get<double>()},
                                 d["score"].get<double>()});
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

std::vector<PageDetections> load_detections(const std::filesystem::path& path) {
  return detections_from_json(read_file(path));
}

void save_detections(const std::vector<PageDetections>& pages, const std::filesystem::path& path) {
  write_file_atomic(path, detections_to_json(pages));
}

}  // namespace omrkit
