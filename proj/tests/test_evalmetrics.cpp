#include <doctest.h>

#include <cmath>

#include "flowforge/evalmetrics.hpp"
#include "testutil.hpp"

using namespace flowforge;

namespace {

FlowField constant_flow(int w, int h, double u, double v) {
  FlowField f(w, h);
  f.u.fill(u);
  f.v.fill(v);
  f.valid.fill(1);
  return f;
}

// Brute-force oracle with the same accumulation order as a plain loop.
FlowMetricsReport brute_force_epe(const FlowField& pred, const FlowField& gt,
                                  const MaskGrid& mask, OutlierRule rule) {
  FlowMetricsReport r;
  double sum = 0;
  std::int64_t out = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y)) continue;
      const double err = std::hypot(pred.u(x, y) - gt.u(x, y), pred.v(x, y) - gt.v(x, y));
      const double mag = std::hypot(gt.u(x, y), gt.v(x, y));
      sum += err;
      if (rule == OutlierRule::kKittiAnd)
        out += err > 3.0 && err > 0.05 * mag;
      else
        out += err > 3.0 || err > 0.05 * mag;
      ++r.pixel_count;
    }
  }
  r.fl_epe = sum / r.pixel_count;
  r.fl_all = 100.0 * out / r.pixel_count;
  return r;
}

}  // namespace

TEST_CASE("flow_epe_all: exact prediction scores zero") {
  const FlowField gt = constant_flow(8, 8, 3.0, -1.0);
  const FlowMetricsReport r = flow_epe_all(gt, gt, gt.valid);
  CHECK(r.fl_epe == 0.0);
  CHECK(r.fl_all == 0.0);
  CHECK(r.pixel_count == 64);
}

TEST_CASE("flow_epe_all: the AND rule distinguishes large-magnitude flows") {
  // |gt| = 100, error 4 px: 4 > 3 but 4 < 5 -> inlier under KITTI's AND rule.
  const FlowField gt = constant_flow(8, 4, 100.0, 0.0);
  const FlowField pred = constant_flow(8, 4, 104.0, 0.0);
  const FlowMetricsReport r = flow_epe_all(pred, gt, gt.valid, OutlierRule::kKittiAnd);
  CHECK(r.fl_epe == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(r.fl_all == 0.0);
  // the OR reading calls it an outlier
  const FlowMetricsReport r_or = flow_epe_all(pred, gt, gt.valid, OutlierRule::kOr);
  CHECK(r_or.fl_all == 100.0);

  // |gt| = 10, error 4 px: 4 > 3 and 4 > 0.5 -> outlier either way.
  const FlowField gt_small = constant_flow(8, 4, 10.0, 0.0);
  const FlowField pred_small = constant_flow(8, 4, 14.0, 0.0);
  const FlowMetricsReport r2 = flow_epe_all(pred_small, gt_small, gt_small.valid);
  CHECK(r2.fl_all == 100.0);
  CHECK(r2.fl_epe == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("flow_epe_all equals the brute-force oracle on random fields") {
  RngStream rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    FlowField gt(16, 16), pred(16, 16);
    MaskGrid mask(16, 16, 0);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        gt.u(x, y) = rng.next_double(-20, 20);
        gt.v(x, y) = rng.next_double(-20, 20);
        gt.valid(x, y) = 1;
        pred.u(x, y) = gt.u(x, y) + rng.next_double(-5, 5);
        pred.v(x, y) = gt.v(x, y) + rng.next_double(-5, 5);
        mask(x, y) = rng.next_double() < 0.8;
      }
    }
    mask(0, 0) = 1;
    for (const auto rule : {OutlierRule::kKittiAnd, OutlierRule::kOr}) {
      const FlowMetricsReport a = flow_epe_all(pred, gt, mask, rule);
      const FlowMetricsReport b = brute_force_epe(pred, gt, mask, rule);
      CHECK(a.fl_epe == b.fl_epe);
      CHECK(a.fl_all == b.fl_all);
      CHECK(a.pixel_count == b.pixel_count);
    }
  }
}

TEST_CASE("flow_epe_all: error paths") {
  const FlowField gt = constant_flow(4, 4, 1, 1);
  CHECK_THROWS(flow_epe_all(gt, gt, MaskGrid(4, 4, 0)));  // empty mask
  FlowField gt_holed = gt;
  gt_holed.valid(1, 1) = 0;
  CHECK_THROWS(flow_epe_all(gt, gt_holed, MaskGrid(4, 4, 1)));  // mask not subset of valid
  CHECK_THROWS(flow_epe_all(constant_flow(5, 4, 0, 0), gt, MaskGrid(4, 4, 1)));
}

TEST_CASE("mid_error: zero for equal ratios, ln-based value, symmetry") {
  const MaskGrid mask(4, 4, 1);
  const ScalarGrid ones(4, 4, 1.0);
  CHECK(mid_error(ones, ones, mask).mid_error == 0.0);

  const ScalarGrid twos(4, 4, 2.0);
  const DepthRatioReport r = mid_error(twos, ones, mask);
  CHECK(r.mid_error == doctest::Approx(6931.4718).epsilon(1e-6));
  // symmetric under swapping pred/gt
  CHECK(mid_error(ones, twos, mask).mid_error == doctest::Approx(r.mid_error).epsilon(1e-12));

  // invariant to a common scale on both maps
  ScalarGrid a(4, 4, 0.0), b(4, 4, 0.0), ka(4, 4, 0.0), kb(4, 4, 0.0);
  RngStream rng(3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      a(x, y) = rng.next_double(0.5, 3.0);
      b(x, y) = rng.next_double(0.5, 3.0);
      ka(x, y) = 7.0 * a(x, y);
      kb(x, y) = 7.0 * b(x, y);
    }
  CHECK(mid_error(ka, kb, mask).mid_error ==
        doctest::Approx(mid_error(a, b, mask).mid_error).epsilon(1e-9));

  ScalarGrid bad = ones;
  bad(2, 2) = -1.0;
  CHECK_THROWS(mid_error(bad, ones, mask));
}

TEST_CASE("zero_shot_losses: identical frames and zero flow score (0, 0)") {
  ImageRGB img(24, 18, Color::Zero());
  RngStream rng(5);
  for (auto& c : img) c = Color(rng.next_double(), rng.next_double(), rng.next_double());
  FlowField flow(24, 18);
  flow.valid.fill(1);
  OcclusionMask occ;
  occ.occluded = MaskGrid(24, 18, 0);
  occ.ao_values = ScalarGrid(24, 18, 0.0);
  const ZeroShotLosses z = zero_shot_losses(img, img, flow, occ);
  CHECK(z.s_loss == 0.0);
  CHECK(z.p_loss == 0.0);
  CHECK(z.ssim_pixels > 0);
}

TEST_CASE("zero_shot_losses: constant 10/255 offset gives p_loss = 10") {
  const ImageRGB a(24, 18, Color(0.4, 0.4, 0.4));
  const ImageRGB b(24, 18, Color(0.4 + 10.0 / 255.0, 0.4 + 10.0 / 255.0, 0.4 + 10.0 / 255.0));
  FlowField flow(24, 18);
  flow.valid.fill(1);
  OcclusionMask occ;
  occ.occluded = MaskGrid(24, 18, 0);
  occ.ao_values = ScalarGrid(24, 18, 0.0);
  const ZeroShotLosses z = zero_shot_losses(a, b, flow, occ);
  CHECK(z.p_loss == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(z.s_loss >= 0.0);
}

TEST_CASE("zero_shot_losses: occluded pixels are excluded from the means") {
  ImageRGB a(24, 18, Color(0.5, 0.5, 0.5));
  ImageRGB b = a;
  // corrupt a block in frame 2 and mark exactly that block occluded
  OcclusionMask occ;
  occ.occluded = MaskGrid(24, 18, 0);
  occ.ao_values = ScalarGrid(24, 18, 0.0);
  for (int y = 4; y < 14; ++y)
    for (int x = 4; x < 14; ++x) {
      b(x, y) = Color(1.0, 0.0, 1.0);
      occ.occluded(x, y) = 1;
    }
  FlowField flow(24, 18);
  flow.valid.fill(1);
  const ZeroShotLosses z = zero_shot_losses(a, b, flow, occ);
  CHECK(z.p_loss == 0.0);  // the corruption sits entirely under the occlusion mask
}
