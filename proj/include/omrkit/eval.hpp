#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omrkit/annotation.hpp"
#include "omrkit/detection.hpp"

namespace omrkit {

double iou(const BBox& a, const BBox& b) noexcept;

struct MatchFlag {
  bool true_positive = false;
  /// Index into the ground-truth list when matched.
  std::optional<std::size_t> gt_index;
};

/// Greedy matching in descending score order (ties by input order). A
/// detection takes the unmatched same-class GT with the highest IoU at or
/// above the threshold; otherwise it is a false positive.
std::vector<MatchFlag> match_detections(const std::vector<Detection>& dets,
                                        const std::vector<Annotation>& gts,
                                        double iou_threshold);

struct ClassEval {
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

struct EvalResult {
  std::map<std::string, ClassEval> per_class;
  double map_macro = 0.0;
  double iou_threshold = 0.5;
  std::size_t micro_tp = 0;
  std::size_t micro_fp = 0;
  std::size_t micro_gt = 0;

  double micro_precision() const noexcept;
  double micro_recall() const noexcept;
};

/// All-point interpolated AP over score-sorted TP/FP flags.
double average_precision(const std::vector<bool>& sorted_tp_flags, std::size_t num_gt);

/// Detections are matched against the GT page with the same id; detections
/// on unknown pages count as false positives.
EvalResult evaluate(const std::vector<PageDetections>& dets, const Dataset& gt,
                    double iou_threshold = 0.5);

std::string format_eval_table(const EvalResult& result);
std::string eval_to_json(const EvalResult& result);

}  // namespace omrkit
