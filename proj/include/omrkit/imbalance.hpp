#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omrkit/annotation.hpp"

namespace omrkit {

/// Class frequency table over a dataset.
struct ClassStats {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  /// Present classes by descending count (ties by name), then registry
  /// classes with count 0 (by name).
  std::vector<std::string> ranking;

  std::uint64_t count_of(const std::string& class_name) const;
};

/// Default head coverage for rare-class selection.
inline constexpr double kDefaultHeadCoverage = 0.85;

ClassStats class_histogram(const Dataset& dataset);

/// Fraction of all annotations held by the k most frequent classes.
/// Throws Error(empty_stats) when total == 0.
double coverage_topk(const ClassStats& stats, std::size_t k);

/// True iff the top class holds strictly more than all other classes combined.
bool majority_dominates(const ClassStats& stats);

/// Classes outside the minimal ranking prefix whose cumulative coverage
/// reaches `head_coverage` (0 < head_coverage < 1). Zero-count registry
/// classes are always rare. `max_size` keeps only the first N rare classes in
/// ranking order.
std::vector<std::string> select_rare(const ClassStats& stats, double head_coverage,
                                     std::optional<std::size_t> max_size = std::nullopt);

/// Deterministic multi-line text report (counts, cumulative coverage, rare set).
std::string format_stats_report(const ClassStats& stats, std::size_t top_k, double head_coverage);

}  // namespace omrkit
