#pragma once

#include <cstdint>

#include "flowforge/flowgen.hpp"
#include "flowforge/grid.hpp"
#include "flowforge/render.hpp"

namespace flowforge {

/// Thresholds for label credibility. A mask value below its threshold passes;
/// "greater than th" is excluded, so comparisons are strict. A threshold of
/// exactly 1.0 disables its criterion (supervision then reduces to flow
/// validity when all are disabled).
struct FilterConfig {
  double th_conf = 0.3;
  double th_ssim = 0.1;
  double th_dc = 0.01;
  double th_occ = 0.3;
  double th_low = 0.1;   // weight-CDF quantile for RFC
  double th_high = 0.9;
  int n_foreground = 2;
  /// When true, occluded pixels are excluded outright instead of merely
  /// bypassing the SSIM criterion.
  bool occlusion_hard_filter = false;

  void validate() const;
};

struct CredibilityMaps {
  ScalarGrid m_ssim, m_conf, m_dc;  // NaN where invalid
  MaskGrid ssim_valid, conf_valid, dc_valid;
};

struct SsimResult {
  ScalarGrid m_ssim;
  MaskGrid valid;
};

/// Per-pixel 1 - SSIM between two [0,1] images, channel-averaged and clamped
/// to [0,1]. Standard configuration: 11x11 Gaussian window, sigma 1.5,
/// C1 = 0.01^2, C2 = 0.03^2. A pixel is invalid when its window overlaps any
/// invalid sample of `b_sampled_valid` or leaves the image.
SsimResult ssim_mask(const ImageRGB& a, const ImageRGB& b, const MaskGrid& b_sampled_valid);

struct RfcResult {
  ScalarGrid m_conf;
  MaskGrid valid;
};

/// Radiance-field confidence (t_h - t_l) / (t_h + t_l) from the quantile maps
/// stored in the view. Throws when the view was rendered with different
/// quantiles than requested.
RfcResult rfc_mask(const RenderedView& view, double th_low, double th_high);

/// Scalar form of the RFC measure for a single ray.
inline double rfc_from_quantiles(double t_low, double t_high) {
  return (t_high - t_low) / (t_high + t_low);
}

struct DcResult {
  ScalarGrid m_dc;
  MaskGrid valid;
};

/// Depth consistency |Z_j' - Z_i'| / (Z_j' + Z_i').
DcResult depth_consistency_mask(const ReprojectionMaps& maps);

struct FilteredLabel {
  FlowField flow;
  MaskGrid supervision;  // true = participates in training loss
};

struct FilterCounts {
  std::int64_t total = 0;
  std::int64_t valid_flow = 0;
  std::int64_t pass_conf = 0;  // among valid-flow pixels
  std::int64_t pass_ssim = 0;  // occlusion bypass counts as a pass
  std::int64_t pass_dc = 0;
  std::int64_t supervised = 0;
};

struct FilterResult {
  FilteredLabel label;
  FilterCounts counts;
};

/// supervision = flow.valid && m_conf < th_conf && m_ssim < th_ssim
///               && m_dc < th_dc, with the SSIM criterion treated as passed
/// at occluded pixels. An invalid mask measurement fails its criterion
/// (nothing to certify), except the bypassed SSIM case.
FilterResult filter_label(const FlowField& flow, const CredibilityMaps& cred,
                          const OcclusionMask& occ, const FilterConfig& cfg);

}  // namespace flowforge
