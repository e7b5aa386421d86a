#include "omrkit/imbalance.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "omrkit/error.hpp"

namespace omrkit {

namespace {

void require_nonempty(const ClassStats& stats) {
  if (stats.total == 0) throw Error(Errc::empty_stats, "no annotations to analyze");
}

}  // namespace

std::uint64_t ClassStats::count_of(const std::string& class_name) const {
  const auto it = counts.find(class_name);
  return it == counts.end() ? 0 : it->second;
}

ClassStats class_histogram(const Dataset& dataset) {
  ClassStats stats;
  for (const auto& name : dataset.class_registry) stats.counts.emplace(name, 0);
  for (const auto& page : dataset.pages) {
    for (const auto& a : page.annotations) {
      ++stats.counts[a.class_name];
      ++stats.total;
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> present;
  std::vector<std::string> absent;
  for (const auto& [name, count] : stats.counts) {
    if (count > 0) {
      present.emplace_back(name, count);
    } else {
      absent.push_back(name);
    }
  }
  std::stable_sort(present.begin(), present.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [name, count] : present) stats.ranking.push_back(std::move(name));
  for (auto& name : absent) stats.ranking.push_back(std::move(name));
  return stats;
}

double coverage_topk(const ClassStats& stats, std::size_t k) {
  require_nonempty(stats);
  std::uint64_t head = 0;
  for (std::size_t i = 0; i < std::min(k, stats.ranking.size()); ++i) {
    head += stats.count_of(stats.ranking[i]);
  }
  if (head == stats.total) return 1.0;
  return static_cast<double>(head) / static_cast<double>(stats.total);
}

bool majority_dominates(const ClassStats& stats) {
  require_nonempty(stats);
  const std::uint64_t top = stats.count_of(stats.ranking.front());
  return top > stats.total - top;
}

std::vector<std::string> select_rare(const ClassStats& stats, double head_coverage,
                                     std::optional<std::size_t> max_size) {
  require_nonempty(stats);
  if (!(head_coverage > 0.0 && head_coverage < 1.0)) {
    throw Error(Errc::validation_error, "head coverage must lie strictly between 0 and 1");
  }
  std::size_t head = 0;
  std::uint64_t cumulative = 0;
  while (head < stats.ranking.size()) {
    cumulative += stats.count_of(stats.ranking[head]);
    ++head;
    if (static_cast<double>(cumulative) / static_cast<double>(stats.total) >= head_coverage) break;
  }
  std::vector<std::string> rare(stats.ranking.begin() + static_cast<std::ptrdiff_t>(head),
                                stats.ranking.end());
  if (max_size && rare.size() > *max_size) rare.resize(*max_size);
  return rare;
}

std::string format_stats_report(const ClassStats& stats, std::size_t top_k, double head_coverage) {
  std::ostringstream out;
  char line[256];
  out << "classes: " << stats.counts.size() << "\n";
  out << "annotations: " << stats.total << "\n";
  if (stats.total == 0) {
    out << "no annotations\n";
    return out.str();
  }
  out << "rank  count  share  cumulative  class\n";
  std::uint64_t cumulative = 0;
  for (std::size_t i = 0; i < stats.ranking.size(); ++i) {
    const auto count = stats.count_of(stats.ranking[i]);
    cumulative += count;
    std::snprintf(line, sizeof line, "%4zu %6llu %6.4f %11.4f  %s\n", i + 1,
                  static_cast<unsigned long long>(count),
                  static_cast<double>(count) / static_cast<double>(stats.total),
                  static_cast<double>(cumulative) / static_cast<double>(stats.total),
                  stats.ranking[i].c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "coverage_top%zu: %.4f\n", top_k, coverage_topk(stats, top_k));
  out << line;
  out << "majority_dominates: " << (majority_dominates(stats) ? "true" : "false") << "\n";
  const auto rare = select_rare(stats, head_coverage);
  std::snprintf(line, sizeof line, "rare (head coverage %.4f): %zu\n", head_coverage, rare.size());
  out << line;
  for (const auto& name : rare) out << "  " << name << "\n";
  return out.str();
}

}  // namespace omrkit
