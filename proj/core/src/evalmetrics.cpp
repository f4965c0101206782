#include "flowforge/evalmetrics.hpp"

#include <cmath>
#include <stdexcept>

#include "flowforge/masks.hpp"

namespace flowforge {

FlowMetricsReport flow_epe_all(const FlowField& pred, const FlowField& gt,
                               const MaskGrid& eval_mask, OutlierRule rule) {
  if (!pred.u.same_size(gt.u) || !pred.u.same_size(eval_mask))
    throw std::invalid_argument("flow_epe_all: dimensions differ");

  FlowMetricsReport report;
  double err_sum = 0.0;
  std::int64_t outliers = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!eval_mask(x, y)) continue;
      if (!gt.valid(x, y))
        throw std::invalid_argument("flow_epe_all: eval_mask includes an invalid gt pixel");
      const double du = pred.u(x, y) - gt.u(x, y);
      const double dv = pred.v(x, y) - gt.v(x, y);
      const double err = std::hypot(du, dv);
      const double mag = std::hypot(gt.u(x, y), gt.v(x, y));
      err_sum += err;
      const bool outlier = rule == OutlierRule::kKittiAnd
                               ? (err > 3.0 && err > 0.05 * mag)
                               : (err > 3.0 || err > 0.05 * mag);
      outliers += outlier;
      ++report.pixel_count;
    }
  }
  if (report.pixel_count == 0) throw std::invalid_argument("flow_epe_all: empty eval mask");
  report.fl_epe = err_sum / report.pixel_count;
  report.fl_all = 100.0 * static_cast<double>(outliers) / report.pixel_count;
  return report;
}

DepthRatioReport mid_error(const ScalarGrid& tau_pred, const ScalarGrid& tau_gt,
                           const MaskGrid& eval_mask) {
  if (!tau_pred.same_size(tau_gt) || !tau_pred.same_size(eval_mask))
    throw std::invalid_argument("mid_error: dimensions differ");
  DepthRatioReport report;
  double sum = 0.0;
  for (int y = 0; y < tau_gt.height(); ++y) {
    for (int x = 0; x < tau_gt.width(); ++x) {
      if (!eval_mask(x, y)) continue;
      const double tp = tau_pred(x, y);
      const double tg = tau_gt(x, y);
      if (!(tp > 0) || !(tg > 0))
        throw std::invalid_argument("mid_error: non-positive depth ratio inside eval mask");
      sum += std::abs(std::log(tp) - std::log(tg));
      ++report.pixel_count;
    }
  }
  if (report.pixel_count == 0) throw std::invalid_argument("mid_error: empty eval mask");
  report.mid_error = sum / report.pixel_count * 1e4;
  return report;
}

ZeroShotLosses zero_shot_losses(const ImageRGB& image_i, const ImageRGB& image_j,
                                const FlowField& flow, const OcclusionMask& occ) {
  if (!image_i.same_size(image_j) || !image_i.same_size(flow.u) ||
      !image_i.same_size(occ.occluded))
    throw std::invalid_argument("zero_shot_losses: dimensions differ");

  const WarpResult warp = backward_warp(image_j, flow);
  const SsimResult ssim = ssim_mask(image_i, warp.warped, warp.sampled_valid);

  ZeroShotLosses losses;
  double s_sum = 0.0, p_sum = 0.0;
  for (int y = 0; y < image_i.height(); ++y) {
    for (int x = 0; x < image_i.width(); ++x) {
      if (occ.occluded(x, y)) continue;
      if (ssim.valid(x, y)) {
        s_sum += ssim.m_ssim(x, y);
        ++losses.ssim_pixels;
      }
      if (warp.sampled_valid(x, y)) {
        p_sum += (image_i(x, y) - warp.warped(x, y)).cwiseAbs().mean() * 255.0;
        ++losses.photo_pixels;
      }
    }
  }
  if (losses.ssim_pixels > 0) losses.s_loss = s_sum / losses.ssim_pixels;
  if (losses.photo_pixels > 0) losses.p_loss = p_sum / losses.photo_pixels;
  return losses;
}

}  // namespace flowforge
