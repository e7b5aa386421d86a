#include "omrkit/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace omrkit {

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

namespace {

std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

std::vector<MatchFlag> match_detections(const std::vector<Detection>& dets,
                                        const std::vector<Annotation>& gts,
                                        double iou_threshold) {
  std::vector<MatchFlag> flags(dets.size());
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t i : score_order(dets)) {
    double best = -1.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_name != dets[i].class_name) continue;
      const double overlap = iou(dets[i].bbox, gts[g].bbox);
      if (overlap >= iou_threshold && overlap > best) {
        best = overlap;
        best_gt = g;
      }
    }
    if (best_gt) {
      taken[*best_gt] = true;
      flags[i] = {true, best_gt};
    }
  }
  return flags;
}

double EvalResult::micro_precision() const noexcept {
  const auto dets = micro_tp + micro_fp;
  return dets == 0 ? 0.0 : static_cast<double>(micro_tp) / static_cast<double>(dets);
}

double EvalResult::micro_recall() const noexcept {
  return micro_gt == 0 ? 0.0 : static_cast<double>(micro_tp) / static_cast<double>(micro_gt);
}

double average_precision(const std::vector<bool>& sorted_tp_flags, std::size_t num_gt) {
  if (num_gt == 0 || sorted_tp_flags.empty()) return 0.0;
  const std::size_t n = sorted_tp_flags.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sorted_tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

EvalResult evaluate(const std::vector<PageDetections>& dets, const Dataset& gt,
                    double iou_threshold) {
  EvalResult result;
  result.iou_threshold = iou_threshold;
  for (const auto& name : gt.class_registry) result.per_class.emplace(name, ClassEval{});

  std::unordered_map<std::string, const Page*> pages;
  for (const auto& page : gt.pages) {
    pages.emplace(page.id, &page);
    for (const auto& a : page.annotations) ++result.per_class[a.class_name].num_gt;
  }

  struct Scored {
    double score;
    bool tp;
  };
  std::map<std::string, std::vector<Scored>> by_class;
  static const std::vector<Annotation> no_gt;
  for (const auto& page : dets) {
    const auto it = pages.find(page.page_id);
    const auto& gts = it == pages.end() ? no_gt : it->second->annotations;
    const auto flags = match_detections(page.detections, gts, iou_threshold);
    for (std::size_t i = 0; i < page.detections.size(); ++i) {
      by_class[page.detections[i].class_name].push_back(
          {page.detections[i].score, flags[i].true_positive});
    }
  }

  for (auto& [name, scored] : by_class) {
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    auto& entry = result.per_class[name];
    std::vector<bool> flags;
    flags.reserve(scored.size());
    for (const auto& s : scored) {
      flags.push_back(s.tp);
      s.tp ? ++entry.tp : ++entry.fp;
    }
    entry.num_det = scored.size();
    entry.ap = average_precision(flags, entry.num_gt);
  }

  double ap_sum = 0.0;
  std::size_t counted = 0;
  for (const auto& [name, entry] : result.per_class) {
    result.micro_tp += entry.tp;
    result.micro_fp += entry.fp;
    result.micro_gt += entry.num_gt;
    if (entry.num_gt > 0) {
      ap_sum += entry.ap;
      ++counted;
    }
  }
  result.map_macro = counted == 0 ? 0.0 : ap_sum / static_cast<double>(counted);
  return result;
}

std::string format_eval_table(const EvalResult& result) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "iou threshold: %.3f\n", result.iou_threshold);
  out << line;
  out << "class                          gt   det    tp    fp      AP\n";
  for (const auto& [name, e] : result.per_class) {
    std::snprintf(line, sizeof line, "%-28s %5zu %5zu %5zu %5zu  %.4f\n", name.c_str(), e.num_gt,
                  e.num_det, e.tp, e.fp, e.ap);
    out << line;
  }
  std::snprintf(line, sizeof line, "mAP (macro): %.4f\n", result.map_macro);
  out << line;
  std::snprintf(line, sizeof line, "micro: tp=%zu fp=%zu gt=%zu precision=%.4f recall=%.4f\n",
                result.micro_tp, result.micro_fp, result.micro_gt, result.micro_precision(),
                result.micro_recall());
  out << line;
  return out.str();
}

std::string eval_to_json(const EvalResult& result) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [name, e] : result.per_class) {
    classes[name] = {{"ap", e.ap}, {"num_gt", e.num_gt}, {"num_det", e.num_det},
                     {"tp", e.tp}, {"fp", e.fp}};
  }
  const nlohmann::json doc = {
      {"iou_threshold", result.iou_threshold},
      {"map_macro", result.map_macro},
      {"micro", {{"tp", result.micro_tp}, {"fp", result.micro_fp}, {"gt", result.micro_gt}}},
      {"per_class", std::move(classes)}};
  return doc.dump(2) + "\n";
}

}  // namespace omrkit
