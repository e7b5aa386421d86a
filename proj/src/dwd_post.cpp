#include "omrkit/dwd_post.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "omrkit/error.hpp"
#include "omrkit/eval.hpp"
#include "omrkit/io_util.hpp"

namespace omrkit {

MapStack::MapStack(int height, int width, int num_classes)
    : height_(height), width_(width), num_classes_(num_classes) {
  if (height <= 0 || width <= 0 || num_classes < 0) {
    throw Error(Errc::validation_error, "map stack dimensions must be positive");
  }
  energy_.assign(plane_size(), 0.0f);
  scores_.assign(plane_size() * static_cast<std::size_t>(num_classes), 0.0f);
  box_.assign(plane_size() * 2, 0.0f);
}

void MapStack::sanitize() {
  for (auto& e : energy_) e = std::isnan(e) ? 0.0f : std::clamp(e, 0.0f, 1.0f);
  for (auto& s : scores_) s = (std::isnan(s) || s < 0.0f) ? 0.0f : s;
  for (auto& b : box_) b = (std::isnan(b) || b < 0.0f) ? 0.0f : b;
}

namespace {

constexpr char kDwmMagic[4] = {'D', 'W', 'M', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  return v;
}

void put_floats(std::string& out, const std::vector<float>& values) {
  for (const float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void get_floats(std::string_view bytes, std::size_t& pos, std::vector<float>& values) {
  for (auto& f : values) {
    f = std::bit_cast<float>(get_u32(bytes, pos));
    pos += 4;
  }
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Keeps the smaller index as root so roots are first pixels in scan order.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::string encode_dwm(const MapStack& maps) {
  std::string out(kDwmMagic, 4);
  out.reserve(16 + 4 * (maps.energy_plane().size() + maps.class_planes().size() +
                        maps.box_planes().size()));
  put_u32(out, static_cast<std::uint32_t>(maps.height()));
  put_u32(out, static_cast<std::uint32_t>(maps.width()));
  put_u32(out, static_cast<std::uint32_t>(maps.num_classes()));
  put_floats(out, maps.energy_plane());
  put_floats(out, maps.class_planes());
  put_floats(out, maps.box_planes());
  return out;
}

MapStack decode_dwm(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kDwmMagic, 4) != 0) {
    throw Error(Errc::schema_error, "not a DWM1 map file");
  }
  const std::uint64_t h = get_u32(bytes, 4);
  const std::uint64_t w = get_u32(bytes, 8);
  const std::uint64_t k = get_u32(bytes, 12);
  if (h == 0 || w == 0 || h > (1u << 15) || w > (1u << 15) || k > (1u << 16)) {
    throw Error(Errc::schema_error, "DWM1 header has unsupported dimensions");
  }
  const std::uint64_t floats = h * w * (3 + k);
  if (bytes.size() != 16 + 4 * floats) {
    throw Error(Errc::schema_error, "DWM1 payload size does not match its header");
  }
  MapStack maps(static_cast<int>(h), static_cast<int>(w), static_cast<int>(k));
  std::size_t pos = 16;
  get_floats(bytes, pos, maps.energy_plane());
  get_floats(bytes, pos, maps.class_planes());
  get_floats(bytes, pos, maps.box_planes());
  return maps;
}

MapStack read_dwm(const std::filesystem::path& path) {
  try {
    return decode_dwm(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::io_error) throw;
    throw Error(e.code(), "'" + path.string() + "': " + e.what());
  }
}

void write_dwm(const MapStack& maps, const std::filesystem::path& path) {
  write_file_atomic(path, encode_dwm(maps));
}

std::optional<BoxSize> CachedBoxTable::lookup(const std::string& class_name) const {
  const auto it = boxes.find(class_name);
  if (it == boxes.end()) return std::nullopt;
  return it->second;
}

CachedBoxTable build_cached_boxes(const Dataset& dataset) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> dims;
  for (const auto& page : dataset.pages) {
    for (const auto& a : page.annotations) {
      auto& [widths, heights] = dims[a.class_name];
      widths.push_back(a.bbox.width());
      heights.push_back(a.bbox.height());
    }
  }
  CachedBoxTable table;
  for (auto& [name, wh] : dims) {
    const BoxSize size{median(std::move(wh.first)), median(std::move(wh.second))};
    if (size.width > 0.0 && size.height > 0.0) {
      table.boxes.emplace(name, size);
    } else {
      table.empty_classes.push_back(name);
    }
  }
  for (const auto& name : dataset.class_registry) {
    if (!dims.contains(name)) table.empty_classes.push_back(name);
  }
  std::sort(table.empty_classes.begin(), table.empty_classes.end());
  return table;
}

std::string cached_boxes_to_json(const CachedBoxTable& table) {
  nlohmann::json boxes = nlohmann::json::object();
  for (const auto& [name, size] : table.boxes) {
    boxes[name] = {{"width", size.width}, {"height", size.height}};
  }
  const nlohmann::json doc = {{"boxes", std::move(boxes)}, {"empty_classes", table.empty_classes}};
  return doc.dump(2) + "\n";
}

CachedBoxTable cached_boxes_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::schema_error, std::string("cached box table: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("boxes") || !doc["boxes"].is_object()) {
    throw Error(Errc::schema_error, "cached box table: expected an object with 'boxes'");
  }
  CachedBoxTable table;
  for (const auto& [name, entry] : doc["boxes"].items()) {
    if (!entry.is_object() || !entry.contains("width") || !entry.contains("height") ||
        !entry["width"].is_number() || !entry["height"].is_number()) {
      throw Error(Errc::schema_error, "cached box table: bad entry for '" + name + "'");
    }
    const BoxSize size{entry["width"].get<double>(), entry["height"].get<double>()};
    if (!(size.width > 0.0 && size.height > 0.0)) {
      throw Error(Errc::validation_error, "cached box for '" + name + "' must be positive");
    }
    table.boxes.emplace(name, size);
  }
  if (doc.contains("empty_classes") && doc["empty_classes"].is_array()) {
    for (const auto& name : doc["empty_classes"]) {
      if (name.is_string()) table.empty_classes.push_back(name.get<std::string>());
    }
  }
  return table;
}

std::optional<BoxMode> parse_box_mode(std::string_view text) noexcept {
  if (text == "regressed") return BoxMode::regressed;
  if (text == "cached") return BoxMode::cached;
  if (text == "hybrid") return BoxMode::hybrid;
  return std::nullopt;
}

const char* box_mode_name(BoxMode mode) noexcept {
  switch (mode) {
    case BoxMode::regressed: return "regressed";
    case BoxMode::cached: return "cached";
    case BoxMode::hybrid: return "hybrid";
  }
  return "regressed";
}

void PostConfig::validate() const {
  if (!(energy_threshold > 0.0 && energy_threshold < 1.0)) {
    throw Error(Errc::validation_error, "energy threshold must lie in (0, 1)");
  }
  if (connectivity != 4 && connectivity != 8) {
    throw Error(Errc::validation_error, "connectivity must be 4 or 8");
  }
  if (!(hybrid_tolerance > 0.0)) {
    throw Error(Errc::validation_error, "hybrid tolerance must be positive");
  }
}

std::vector<Component> extract_markers(const std::vector<float>& energy, int height, int width,
                                       const PostConfig& cfg) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (energy.size() != n) throw Error(Errc::validation_error, "energy grid size mismatch");
  const auto above = [&](std::size_t i) { return energy[i] >= cfg.energy_threshold; };

  DisjointSet sets(n);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * width + c;
      if (!above(i)) continue;
      // Backward neighbours only; forward ones link back to us later.
      if (c > 0 && above(i - 1)) sets.unite(i, i - 1);
      if (r > 0) {
        const std::size_t up = i - width;
        if (above(up)) sets.unite(i, up);
        if (cfg.connectivity == 8) {
          if (c > 0 && above(up - 1)) sets.unite(i, up - 1);
          if (c + 1 < width && above(up + 1)) sets.unite(i, up + 1);
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot_of_root;
  std::vector<Component> components;
  for (std::size_t i = 0; i < n; ++i) {
    if (!above(i)) continue;
    const std::size_t root = sets.find(i);
    auto [it, inserted] = slot_of_root.emplace(root, components.size());
    if (inserted) components.emplace_back();
    Component& comp = components[it->second];
    const double e = energy[i];
    const double x = static_cast<double>(i % width) + 0.5;
    const double y = static_cast<double>(i / width) + 0.5;
    comp.pixels.push_back(i);
    comp.energy_sum += e;
    comp.centroid_x += e * x;
    comp.centroid_y += e * y;
    comp.peak_energy = std::max(comp.peak_energy, e);
  }

  std::vector<Component> kept;
  kept.reserve(components.size());
  for (auto& comp : components) {
    if (comp.pixels.size() < cfg.min_area) continue;
    comp.centroid_x /= comp.energy_sum;
    comp.centroid_y /= comp.energy_sum;
    kept.push_back(std::move(comp));
  }
  return kept;
}

std::vector<Component> extract_markers(const MapStack& maps, const PostConfig& cfg) {
  return extract_markers(maps.energy_plane(), maps.height(), maps.width(), cfg);
}

std::vector<Detection> detect(const MapStack& maps, const std::vector<std::string>& registry,
                              const PostConfig& cfg, const CachedBoxTable* table) {
  cfg.validate();
  if (registry.size() != static_cast<std::size_t>(maps.num_classes())) {
    throw Error(Errc::validation_error,
                "map stack has " + std::to_string(maps.num_classes()) +
                    " class planes but the registry lists " + std::to_string(registry.size()));
  }
  if (registry.empty()) throw Error(Errc::validation_error, "empty class registry");
  if (cfg.box_mode != BoxMode::regressed && table == nullptr) {
    throw Error(Errc::missing_cache_entry, "cached box table required in cached/hybrid mode");
  }

  const std::size_t plane = maps.plane_size();
  const auto& scores = maps.class_planes();
  const auto& boxes = maps.box_planes();
  const auto& energy = maps.energy_plane();

  std::vector<Detection> out;
  for (const auto& comp : extract_markers(maps, cfg)) {
    std::size_t best_class = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < registry.size(); ++k) {
      double sum = 0.0;
      for (const std::size_t p : comp.pixels) sum += scores[k * plane + p];
      if (sum > best_score) {
        best_score = sum;
        best_class = k;
      }
    }
    const std::string& class_name = registry[best_class];

    BoxSize regressed;
    for (const std::size_t p : comp.pixels) {
      regressed.width += energy[p] * boxes[p];
      regressed.height += energy[p] * boxes[plane + p];
    }
    regressed.width /= comp.energy_sum;
    regressed.height /= comp.energy_sum;

    BoxSize size = regressed;
    if (cfg.box_mode != BoxMode::regressed) {
      const auto cached = table->lookup(class_name);
      if (!cached) {
        throw Error(Errc::missing_cache_entry, "no cached box for class '" + class_name + "'");
      }
      const bool far = std::abs(regressed.width - cached->width) / cached->width >
                           cfg.hybrid_tolerance ||
                       std::abs(regressed.height - cached->height) / cached->height >
                           cfg.hybrid_tolerance;
      if (cfg.box_mode == BoxMode::cached || far) size = *cached;
    }
    out.push_back({class_name,
                   BBox::from_center(comp.centroid_x, comp.centroid_y, size.width, size.height)
                       .clipped(maps.width(), maps.height()),
                   comp.peak_energy});
  }
  return out;
}

namespace {

struct MatchedPair {
  double sqrt_area_gt;
  double relative_error;
};

void collect_pairs(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                   std::vector<MatchedPair>& pairs, BiasReport& report) {
  const auto flags = match_detections(dets, gts, kBiasMatchIou);
  std::vector<bool> gt_used(gts.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!flags[i].true_positive) {
      ++report.unmatched_detections;
      continue;
    }
    const auto& gt = gts[*flags[i].gt_index];
    gt_used[*flags[i].gt_index] = true;
    const double area_gt = gt.bbox.area();
    if (area_gt <= 0.0) continue;
    pairs.push_back({std::sqrt(area_gt), (dets[i].bbox.area() - area_gt) / area_gt});
  }
  report.unmatched_gt += static_cast<std::size_t>(std::count(gt_used.begin(), gt_used.end(), false));
}

BiasReport bin_pairs(std::vector<MatchedPair> pairs, BiasReport report, std::size_t bins) {
  if (pairs.empty()) throw Error(Errc::no_matches, "no detection matched a ground-truth box");
  if (bins == 0) throw Error(Errc::validation_error, "bin count must be positive");
  std::stable_sort(pairs.begin(), pairs.end(), [](const MatchedPair& a, const MatchedPair& b) {
    return a.sqrt_area_gt < b.sqrt_area_gt;
  });
  report.matched = pairs.size();
  bins = std::min(bins, pairs.size());
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * pairs.size() / bins;
    const std::size_t hi = (b + 1) * pairs.size() / bins;
    BiasBin bin;
    bin.min_sqrt_area = pairs[lo].sqrt_area_gt;
    bin.max_sqrt_area = pairs[hi - 1].sqrt_area_gt;
    bin.count = hi - lo;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += pairs[i].relative_error;
    bin.mean_relative_error = sum / static_cast<double>(bin.count);
    report.bins.push_back(bin);
  }
  return report;
}

}  // namespace

BiasReport size_bias_report(const std::vector<Detection>& dets,
                            const std::vector<Annotation>& gts, std::size_t bins) {
  std::vector<MatchedPair> pairs;
  BiasReport report;
  collect_pairs(dets, gts, pairs, report);
  return bin_pairs(std::move(pairs), std::move(report), bins);
}

BiasReport size_bias_report(const std::vector<PageDetections>& dets, const Dataset& gt,
                            std::size_t bins) {
  std::vector<MatchedPair> pairs;
  BiasReport report;
  std::unordered_map<std::string, const PageDetections*> by_id;
  for (const auto& page : dets) by_id.emplace(page.page_id, &page);
  static const std::vector<Detection> none;
  for (const auto& page : gt.pages) {
    const auto it = by_id.find(page.id);
    collect_pairs(it == by_id.end() ? none : it->second->detections, page.annotations, pairs,
                  report);
    if (it != by_id.end()) by_id.erase(it);
  }
  for (const auto& [id, page] : by_id) report.unmatched_detections += page->detections.size();
  return bin_pairs(std::move(pairs), std::move(report), bins);
}

std::string format_bias_report(const BiasReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "matched=%zu unmatched_detections=%zu unmatched_gt=%zu\n",
                report.matched, report.unmatched_detections, report.unmatched_gt);
  out << line;
  out << "bin  sqrt_area_min  sqrt_area_max  count  mean_rel_area_error\n";
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const auto& b = report.bins[i];
    std::snprintf(line, sizeof line, "%3zu  %13.3f  %13.3f  %5zu  %+.6f\n", i, b.min_sqrt_area,
                  b.max_sqrt_area, b.count, b.mean_relative_error);
    out << line;
  }
  return out.str();
}

}  // namespace omrkit
