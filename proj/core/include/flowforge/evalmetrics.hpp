#pragma once

#include <cstdint>

#include "flowforge/flowgen.hpp"
#include "flowforge/grid.hpp"

namespace flowforge {

struct FlowMetricsReport {
  double fl_epe = 0.0;   // mean end-point error, px
  double fl_all = 0.0;   // outlier fraction, percent
  std::int64_t pixel_count = 0;
};

/// Outlier rule for Fl_all. The KITTI devkit counts a pixel when its error
/// exceeds 3 px AND 5% of the ground-truth magnitude; the disjunctive
/// reading is available behind the flag.
enum class OutlierRule { kKittiAnd, kOr };

/// End-point error statistics over eval_mask. Throws on dimension mismatch,
/// an empty mask, or a mask pixel outside gt.valid.
FlowMetricsReport flow_epe_all(const FlowField& pred, const FlowField& gt,
                               const MaskGrid& eval_mask,
                               OutlierRule rule = OutlierRule::kKittiAnd);

struct DepthRatioReport {
  double mid_error = 0.0;  // mean |ln tau - ln tau_gt| * 1e4
  std::int64_t pixel_count = 0;
};

/// Depth-change-rate error, natural-log convention. Throws on a non-positive
/// tau inside the mask or an empty mask.
DepthRatioReport mid_error(const ScalarGrid& tau_pred, const ScalarGrid& tau_gt,
                           const MaskGrid& eval_mask);

struct ZeroShotLosses {
  double s_loss = 0.0;  // occlusion-masked mean (1 - SSIM)
  double p_loss = 0.0;  // occlusion-masked mean |I_i - I_i'| on a 0..255 scale
  std::int64_t ssim_pixels = 0;
  std::int64_t photo_pixels = 0;
};

/// Indirect flow-quality losses: warps I_j onto I_i with the flow and scores
/// the non-occluded, validly sampled pixels.
ZeroShotLosses zero_shot_losses(const ImageRGB& image_i, const ImageRGB& image_j,
                                const FlowField& flow, const OcclusionMask& occ);

}  // namespace flowforge
