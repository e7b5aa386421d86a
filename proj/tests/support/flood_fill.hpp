#pragma once

#include <cstddef>
#include <algorithm>
#include <queue>
#include <vector>

namespace omrkit::testing {

/// Breadth-first flood fill over {value >= threshold}; components listed by
/// first pixel in row-major order, each with ascending pixel indices.
inline std::vector<std::vector<std::size_t>> flood_fill_components(const std::vector<float>& grid,
                                                                   int height, int width,
                                                                   float threshold,
                                                                   int connectivity,
                                                                   std::size_t min_area) {
  std::vector<bool> seen(grid.size(), false);
  std::vector<std::vector<std::size_t>> out;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t start = static_cast<std::size_t>(r) * width + c;
      if (seen[start] || grid[start] < threshold) continue;
      std::vector<std::size_t> comp;
      std::queue<std::pair<int, int>> frontier;
      frontier.push({r, c});
      seen[start] = true;
      while (!frontier.empty()) {
        const auto [y, x] = frontier.front();
        frontier.pop();
        comp.push_back(static_cast<std::size_t>(y) * width + x);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            if (connectivity == 4 && dy != 0 && dx != 0) continue;
            const int ny = y + dy;
            const int nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= height || nx >= width) continue;
            const std::size_t idx = static_cast<std::size_t>(ny) * width + nx;
            if (seen[idx] || grid[idx] < threshold) continue;
            seen[idx] = true;
            frontier.push({ny, nx});
          }
        }
      }
      if (comp.size() < min_area) continue;
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  }
  return out;
}

}  // namespace omrkit::testing
