#pragma once

#include <functional>
#include <optional>

#include "omrkit/annotation.hpp"
#include "omrkit/image.hpp"

namespace omrkit {

/// Rotation by `theta_deg` (counter-clockwise as seen on the page) about the
/// image center, followed by a translation (tx, ty). Maps reference page
/// coordinates to scan coordinates.
struct RigidTransform {
  double theta_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  static RigidTransform identity() noexcept { return {}; }
};

/// Point mapping for a page of the given size (center = (width/2, height/2)).
struct PointMapper {
  PointMapper(const RigidTransform& t, double width, double height);

  void apply(double x, double y, double& out_x, double& out_y) const noexcept;

  double cos_t, sin_t, cx, cy, tx, ty;
};

RigidTransform inverse(const RigidTransform& t);
/// `second ∘ first`: apply `first`, then `second`.
RigidTransform compose(const RigidTransform& second, const RigidTransform& first);

/// Bilinear resampling; samples outside the source read as white (255).
GrayImage warp_image(const GrayImage& img, const RigidTransform& t);

/// Maps every bbox's corners through `t` and keeps the clipped axis-aligned envelope.
Page transfer_annotations(const Page& page, const RigidTransform& t);

struct SearchRange {
  double max_theta_deg = 10.0;
  double max_shift = 50.0;
};

struct AlignResult {
  RigidTransform transform;
  double ncc = 0.0;
};

/// NCC between `scanned` and `reference` warped by `t`, over the pixels whose
/// source sample lies inside the reference. Returns nullopt when the overlap
/// is empty or has zero variance.
std::optional<double> ncc_score(const GrayImage& reference, const GrayImage& scanned,
                                const RigidTransform& t);

/// Invoked for every full-resolution candidate the search evaluates.
using VisitFn = std::function<void(const RigidTransform&, double ncc)>;

/// Coarse-to-fine grid search maximizing NCC: x4 / x2 / x1 pyramid, steps
/// from 1 deg / 5 px down to 0.05 deg / 1 px. Throws Error(degenerate_image)
/// for flat inputs and Error(no_overlap) when no candidate overlaps.
AlignResult estimate_transform(const GrayImage& reference, const GrayImage& scanned,
                               const SearchRange& range = {}, const VisitFn& visit = {});

}  // namespace omrkit
