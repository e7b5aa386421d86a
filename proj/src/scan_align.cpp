#include "omrkit/scan_align.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "omrkit/error.hpp"

namespace omrkit {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
/// Candidates whose overlap covers less of the scan than this are ignored.
constexpr double kMinOverlapFraction = 0.25;

struct Stage {
  int factor;
  double theta_step;
  double shift_step;
  bool snap;
};

// First stage is a global grid; later stages search +-2 steps around the best.
constexpr Stage kStages[] = {
    {4, 1.0, 5.0, false},   {2, 0.5, 2.5, false}, {1, 0.25, 1.25, false},
    {1, 0.125, 1.0, true},  {1, 0.05, 1.0, true},
};

struct Moments {
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;

  std::optional<double> ncc() const {
    if (n < 2) return std::nullopt;
    const double va = n * saa - sa * sa;
    const double vb = n * sbb - sb * sb;
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;
    return std::clamp((n * sab - sa * sb) / std::sqrt(va * vb), -1.0, 1.0);
  }

  void add(double a, double b) {
    n += 1;
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
};

/// Reference sampled through the inverse transform at every scan pixel, in
/// level coordinates (center and shift already divided by the level factor).
Moments overlap_moments(const GrayImage& reference, const GrayImage& scanned, double theta_deg,
                        double tx, double ty, double cx, double cy) {
  const double c = std::cos(theta_deg * kDegToRad);
  const double s = std::sin(theta_deg * kDegToRad);
  const int w = reference.width();
  const int h = reference.height();
  const double u_max = w - 1;
  const double v_max = h - 1;
  const auto& src = reference.pixels();
  const auto& dst = scanned.pixels();
  const std::vector<double> ref_d(src.begin(), src.end());
  const double* ref = ref_d.data();

  const auto inside = [&](double u, double v) { return u >= 0.0 && v >= 0.0 && u <= u_max && v <= v_max; };
  // Columns where a linear coordinate a + k * col stays within [0, hi].
  const auto clip = [](double a, double k, double hi, double& lo_col, double& hi_col) {
    if (k == 0.0) {
      if (a < 0.0 || a > hi) hi_col = lo_col - 1;
      return;
    }
    double c0 = (0.0 - a) / k;
    double c1 = (hi - a) / k;
    if (c0 > c1) std::swap(c0, c1);
    lo_col = std::max(lo_col, c0);
    hi_col = std::min(hi_col, c1);
  };

  Moments m;
  const int sw = scanned.width();
  for (int r = 0; r < scanned.height(); ++r) {
    const double qy = r + 0.5 - cy - ty;
    const double qx0 = 0.5 - cx - tx;
    const double u0 = c * qx0 - s * qy + cx - 0.5;
    const double v0 = s * qx0 + c * qy + cy - 0.5;
    double lo = 0.0;
    double hi = sw - 1;
    clip(u0, c, u_max, lo, hi);
    clip(v0, s, v_max, lo, hi);
    if (lo > hi) continue;
    // Widen by one pixel, then trim with the exact test so rounding in the
    // interval solve never changes which pixels count.
    int first = std::max(0, static_cast<int>(std::floor(lo)) - 1);
    int last = std::min(sw - 1, static_cast<int>(std::ceil(hi)) + 1);
    const auto coords = [&](int col, double& u, double& v) {
      const double qx = col + 0.5 - cx - tx;
      // Inverse rotation R(-theta).
      u = c * qx - s * qy + cx - 0.5;
      v = s * qx + c * qy + cy - 0.5;
    };
    double u, v;
    while (first <= last && (coords(first, u, v), !inside(u, v))) ++first;
    while (last >= first && (coords(last, u, v), !inside(u, v))) --last;
    const std::uint8_t* drow = dst.data() + static_cast<std::size_t>(r) * sw;
    if (w < 2 || h < 2) {
      for (int col = first; col <= last; ++col) {
        coords(col, u, v);
        const double a = src[static_cast<std::size_t>(std::lround(v)) * w + std::lround(u)];
        const double b = drow[col];
        m.add(a, b);
      }
      continue;
    }
    const double ux = c;
    const double vx = s;
    const double qx_first = first + 0.5 - cx - tx;
    const double ub = -s * qy + cx - 0.5;
    const double vb = c * qy + cy - 0.5;
    for (int col = first; col <= last; ++col) {
      const double qx = qx_first + (col - first);
      const double uu = ux * qx + ub;
      const double vv = vx * qx + vb;
      const int i0 = std::min(static_cast<int>(uu), w - 2);
      const int j0 = std::min(static_cast<int>(vv), h - 2);
      const double fu = uu - i0;
      const double fv = vv - j0;
      const double* p0 = ref + static_cast<std::size_t>(j0) * w + i0;
      const double* p1 = p0 + w;
      const double top = p0[0] + fu * (p0[1] - p0[0]);
      const double bottom = p1[0] + fu * (p1[1] - p1[0]);
      m.add(top + fv * (bottom - top), drow[col]);
    }
  }
  return m;
}

bool has_variance(const GrayImage& img) {
  const auto& p = img.pixels();
  return !p.empty() && std::any_of(p.begin(), p.end(), [&](std::uint8_t v) { return v != p[0]; });
}

std::vector<double> axis(double center, double step, double limit, bool global) {
  std::vector<double> values;
  if (global) {
    const int n = static_cast<int>(std::floor(limit / step + 1e-9));
    for (int i = -n; i <= n; ++i) values.push_back(i * step);
    return values;
  }
  for (int i = -2; i <= 2; ++i) {
    const double v = center + i * step;
    if (std::abs(v) <= limit + 1e-9) values.push_back(v);
  }
  if (values.empty()) values.push_back(std::clamp(center, -limit, limit));
  return values;
}

double snap(double v, double step) { return std::round(v / step) * step; }

}  // namespace

PointMapper::PointMapper(const RigidTransform& t, double width, double height)
    : cos_t(std::cos(t.theta_deg * kDegToRad)),
      sin_t(std::sin(t.theta_deg * kDegToRad)),
      cx(0.5 * width),
      cy(0.5 * height),
      tx(t.tx),
      ty(t.ty) {}

void PointMapper::apply(double x, double y, double& out_x, double& out_y) const noexcept {
  const double dx = x - cx;
  const double dy = y - cy;
  out_x = cos_t * dx + sin_t * dy + cx + tx;
  out_y = -sin_t * dx + cos_t * dy + cy + ty;
}

RigidTransform inverse(const RigidTransform& t) {
  const double c = std::cos(t.theta_deg * kDegToRad);
  const double s = std::sin(t.theta_deg * kDegToRad);
  // -R(-theta) t, with R(theta) = [[c, s], [-s, c]].
  return {-t.theta_deg, -(c * t.tx - s * t.ty), -(s * t.tx + c * t.ty)};
}

RigidTransform compose(const RigidTransform& second, const RigidTransform& first) {
  const double c = std::cos(second.theta_deg * kDegToRad);
  const double s = std::sin(second.theta_deg * kDegToRad);
  return {first.theta_deg + second.theta_deg, c * first.tx + s * first.ty + second.tx,
          -s * first.tx + c * first.ty + second.ty};
}

GrayImage warp_image(const GrayImage& img, const RigidTransform& t) {
  const int w = img.width();
  const int h = img.height();
  GrayImage out(h, w, 255);
  const double c = std::cos(t.theta_deg * kDegToRad);
  const double s = std::sin(t.theta_deg * kDegToRad);
  const double cx = 0.5 * w;
  const double cy = 0.5 * h;
  const auto sample = [&](int col, int row) -> double {
    return img.contains(row, col) ? img.at(row, col) : 255.0;
  };
  for (int r = 0; r < h; ++r) {
    const double qy = r + 0.5 - cy - t.ty;
    for (int col = 0; col < w; ++col) {
      const double qx = col + 0.5 - cx - t.tx;
      const double u = c * qx - s * qy + cx - 0.5;
      const double v = s * qx + c * qy + cy - 0.5;
      const double fi = std::floor(u);
      const double fj = std::floor(v);
      if (fi < -1.0 || fj < -1.0 || fi > w || fj > h) continue;
      const int i0 = static_cast<int>(fi);
      const int j0 = static_cast<int>(fj);
      const double fu = u - fi;
      const double fv = v - fj;
      const double value =
          (1 - fv) * ((1 - fu) * sample(i0, j0) + fu * sample(i0 + 1, j0)) +
          fv * ((1 - fu) * sample(i0, j0 + 1) + fu * sample(i0 + 1, j0 + 1));
      out.at(r, col) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }
  }
  return out;
}

Page transfer_annotations(const Page& page, const RigidTransform& t) {
  Page out = page;
  const PointMapper map(t, page.width, page.height);
  for (auto& a : out.annotations) {
    const BBox& b = a.bbox;
    const double xs[4] = {b.x_min, b.x_max, b.x_max, b.x_min};
    const double ys[4] = {b.y_min, b.y_min, b.y_max, b.y_max};
    BBox env{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (int i = 0; i < 4; ++i) {
      double x = 0.0;
      double y = 0.0;
      map.apply(xs[i], ys[i], x, y);
      env.x_min = std::min(env.x_min, x);
      env.y_min = std::min(env.y_min, y);
      env.x_max = std::max(env.x_max, x);
      env.y_max = std::max(env.y_max, y);
    }
    a.bbox = env.clipped(page.width, page.height);
  }
  return out;
}

std::optional<double> ncc_score(const GrayImage& reference, const GrayImage& scanned,
                                const RigidTransform& t) {
  return overlap_moments(reference, scanned, t.theta_deg, t.tx, t.ty, 0.5 * reference.width(),
                         0.5 * reference.height())
      .ncc();
}

AlignResult estimate_transform(const GrayImage& reference, const GrayImage& scanned,
                               const SearchRange& range, const VisitFn& visit) {
  if (!has_variance(reference) || !has_variance(scanned)) {
    throw Error(Errc::degenerate_image, "image has zero intensity variance");
  }
  if (reference.width() != scanned.width() || reference.height() != scanned.height()) {
    throw Error(Errc::validation_error, "reference and scan must share the nominal size");
  }
  const double full_cx = 0.5 * reference.width();
  const double full_cy = 0.5 * reference.height();

  struct Level {
    GrayImage reference;
    GrayImage scanned;
  };
  std::vector<std::pair<int, Level>> levels;
  for (const int f : {4, 2, 1}) {
    levels.push_back({f, {downsample(reference, f), downsample(scanned, f)}});
  }
  const auto level_for = [&](int factor) -> const Level& {
    for (const auto& [f, level] : levels) {
      if (f == factor) return level;
    }
    return levels.back().second;
  };

  RigidTransform center;
  std::optional<AlignResult> best_full;
  bool first_stage = true;
  for (const Stage& stage : kStages) {
    const Level& level = level_for(stage.factor);
    const double min_overlap =
        kMinOverlapFraction * level.scanned.width() * level.scanned.height();
    const double f = stage.factor;
    if (stage.snap) {
      center.theta_deg = snap(center.theta_deg, stage.theta_step);
      center.tx = snap(center.tx, stage.shift_step);
      center.ty = snap(center.ty, stage.shift_step);
    }
    const auto thetas = axis(center.theta_deg, stage.theta_step, range.max_theta_deg, first_stage);
    const auto txs = axis(center.tx, stage.shift_step, range.max_shift, first_stage);
    const auto tys = axis(center.ty, stage.shift_step, range.max_shift, first_stage);

    std::optional<AlignResult> best_stage;
    for (const double theta : thetas) {
      for (const double ty : tys) {
        for (const double tx : txs) {
          const Moments m = overlap_moments(level.reference, level.scanned, theta, tx / f, ty / f,
                                            full_cx / f, full_cy / f);
          if (m.n < min_overlap) continue;
          const auto score = m.ncc();
          if (!score) continue;
          const RigidTransform t{theta, tx, ty};
          if (stage.factor == 1) {
            if (visit) visit(t, *score);
            if (!best_full || *score > best_full->ncc) best_full = AlignResult{t, *score};
          }
          if (!best_stage || *score > best_stage->ncc) best_stage = AlignResult{t, *score};
        }
      }
    }
    if (!best_stage) {
      if (first_stage) throw Error(Errc::no_overlap, "no candidate transform overlaps the scan");
    } else {
      center = (stage.factor == 1 && best_full) ? best_full->transform : best_stage->transform;
    }
    first_stage = false;
  }
  if (!best_full) throw Error(Errc::no_overlap, "no full-resolution candidate overlaps the scan");
  return *best_full;
}

}  // namespace omrkit
