#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "omrkit/error.hpp"
#include "omrkit/eval.hpp"
#include "omrkit/image.hpp"
#include "omrkit/rng.hpp"
#include "omrkit/scan_align.hpp"
#include "omrkit/synth.hpp"

using namespace omrkit;

namespace {

PageImage small_page(std::uint64_t seed) {
  PageSpec spec;
  spec.width = 400;
  spec.height = 320;
  spec.num_staves = 2;
  spec.symbols_per_staff = 10;
  spec.top_margin = 40;
  Rng rng(seed);
  return generate_page(spec, rng, "p");
}

double mean_abs_diff_interior(const GrayImage& a, const GrayImage& b, int border) {
  double sum = 0;
  long n = 0;
  for (int r = border; r < a.height() - border; ++r) {
    for (int c = border; c < a.width() - border; ++c) {
      sum += std::abs(static_cast<int>(a.at(r, c)) - static_cast<int>(b.at(r, c)));
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("warp_image identity and integer translation") {
  const auto page = small_page(1);
  CHECK(warp_image(page.image, RigidTransform::identity()) == page.image);

  const GrayImage shifted = warp_image(page.image, {0.0, 5.0, -3.0});
  for (int r = 0; r < page.image.height(); ++r) {
    for (int c = 0; c < page.image.width(); ++c) {
      const int sr = r + 3;
      const int sc = c - 5;
      const std::uint8_t expected = page.image.contains(sr, sc) ? page.image.at(sr, sc) : 255;
      REQUIRE(shifted.at(r, c) == expected);
    }
  }
}

TEST_CASE("warp followed by the inverse warp restores the interior") {
  const auto page = small_page(2);
  const RigidTransform t{2.0, 5.0, -3.0};
  // Bilinear loss is bounded for band-limited content; a scan-like blur keeps
  // the hard 1 px glyph edges from dominating.
  const GrayImage soft = gaussian_blur(page.image, 1.0);
  CHECK(mean_abs_diff_interior(warp_image(warp_image(soft, t), inverse(t)), soft, 30) < 2.0);

  // On the raw binary page the loss is larger but must bottom out at zero
  // residual offset; any misregistration would shift the minimum.
  const GrayImage back = warp_image(warp_image(page.image, t), inverse(t));
  const double at_zero = mean_abs_diff_interior(back, page.image, 30);
  for (const auto& [dx, dy] : {std::pair{0.5, 0.0}, {-0.5, 0.0}, {0.0, 0.5}, {0.0, -0.5}}) {
    CHECK(at_zero < mean_abs_diff_interior(warp_image(back, {0, dx, dy}), page.image, 30));
  }
}

TEST_CASE("inverse and compose") {
  const RigidTransform t{7.5, 12.0, -4.0};
  const auto id = compose(inverse(t), t);
  CHECK(std::abs(id.theta_deg) < 1e-9);
  CHECK(std::abs(id.tx) < 1e-6);
  CHECK(std::abs(id.ty) < 1e-6);
  const auto id2 = compose(t, inverse(t));
  CHECK(std::abs(id2.theta_deg) < 1e-9);
  CHECK(std::hypot(id2.tx, id2.ty) < 1e-6);

  // compose must agree with applying the two maps in sequence.
  const RigidTransform a{3.0, 4.0, 1.0};
  const RigidTransform b{-11.0, -2.0, 9.0};
  const PointMapper ma(a, 200, 100), mb(b, 200, 100), mba(compose(b, a), 200, 100);
  for (const auto& [x, y] : {std::pair{0.0, 0.0}, {37.0, 81.0}, {199.0, 5.5}}) {
    double x1, y1, x2, y2, xc, yc;
    ma.apply(x, y, x1, y1);
    mb.apply(x1, y1, x2, y2);
    mba.apply(x, y, xc, yc);
    CHECK(xc == doctest::Approx(x2));
    CHECK(yc == doctest::Approx(y2));
  }

  // Positive angles turn counter-clockwise on a y-down page: a point to the
  // right of center moves up.
  const PointMapper quarter({90.0, 0, 0}, 100, 100);
  double qx, qy;
  quarter.apply(60, 50, qx, qy);
  CHECK(qx == doctest::Approx(50.0));
  CHECK(qy == doctest::Approx(40.0));
}

TEST_CASE("transfer_annotations") {
  Page page{"p", 100, 100, std::nullopt, {{"a", {10, 20, 30, 40}, {}, {}, {}}}};
  CHECK(transfer_annotations(page, RigidTransform::identity()).annotations[0].bbox ==
        page.annotations[0].bbox);

  const auto moved = transfer_annotations(page, {0, 5, -3}).annotations[0].bbox;
  CHECK(moved == BBox{15, 17, 35, 37});

  page.annotations[0].bbox = {10, 20, 30, 60};
  const auto turned = transfer_annotations(page, {90, 0, 0}).annotations[0].bbox;
  CHECK(turned.width() == doctest::Approx(40.0));
  CHECK(turned.height() == doctest::Approx(20.0));

  const auto twice = transfer_annotations(transfer_annotations(page, {0, 3, 4}), {0, -1, 2});
  CHECK(twice.annotations[0].bbox == transfer_annotations(page, {0, 2, 6}).annotations[0].bbox);
}

TEST_CASE("estimate_transform on identical images") {
  const auto page = small_page(3);
  const auto res = estimate_transform(page.image, page.image, {3.0, 10.0});
  CHECK(res.transform.theta_deg == 0.0);
  CHECK(res.transform.tx == 0.0);
  CHECK(res.transform.ty == 0.0);
  CHECK(res.ncc == doctest::Approx(1.0));
}

TEST_CASE("estimate_transform recovers a known rotation and shift") {
  const auto page = small_page(4);
  const RigidTransform truth{2.0, 5.0, -3.0};
  for (const double noise : {0.0, 10.0}) {
    CAPTURE(noise);
    DegradeSpec spec;
    spec.warp = truth;
    spec.noise_sigma = noise;
    Rng rng(11);
    const GrayImage scan = degrade_image(page.image, spec, rng);
    const auto res = estimate_transform(page.image, scan, {5.0, 20.0});
    CHECK(std::abs(res.transform.theta_deg - truth.theta_deg) <= 0.1);
    CHECK(std::abs(res.transform.tx - truth.tx) <= 1.0);
    CHECK(std::abs(res.transform.ty - truth.ty) <= 1.0);
    if (noise > 0) CHECK(res.ncc < 1.0);
  }
}

TEST_CASE("estimate_transform returns the best visited candidate") {
  const auto page = small_page(5);
  DegradeSpec spec;
  spec.warp = {-1.5, 4.0, 7.0};
  spec.blur_sigma = 1.0;
  Rng rng(2);
  const GrayImage scan = degrade_image(page.image, spec, rng);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t visits = 0;
  const auto res = estimate_transform(page.image, scan, {3.0, 10.0},
                                      [&](const RigidTransform&, double ncc) {
                                        best = std::max(best, ncc);
                                        ++visits;
                                      });
  CHECK(visits > 0);
  CHECK(res.ncc == best);
  const auto direct = ncc_score(page.image, scan, res.transform);
  REQUIRE(direct.has_value());
  CHECK(*direct == doctest::Approx(res.ncc));
}

TEST_CASE("estimate_transform rejects flat images") {
  const GrayImage flat(100, 100, 255);
  const auto page = small_page(6);
  try {
    estimate_transform(flat, page.image);
    FAIL("expected DegenerateImage");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_image);
  }
  CHECK_THROWS_AS(estimate_transform(page.image, GrayImage(320, 400, 0)), Error);
}
