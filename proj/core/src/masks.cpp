#include "flowforge/masks.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kSsimRadius = 5;  // 11x11 window
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kSsimRadius + 1> gaussian_kernel() {
  std::array<double, 2 * kSsimRadius + 1> k{};
  double sum = 0.0;
  for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
    k[i + kSsimRadius] = std::exp(-0.5 * (i * i) / (kSsimSigma * kSsimSigma));
    sum += k[i + kSsimRadius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with zero padding. Border outputs are discarded by
// the validity erosion, so the padding choice is immaterial.
ScalarGrid gaussian_blur(const ScalarGrid& in) {
  static const auto kernel = gaussian_kernel();
  const int w = in.width(), h = in.height();
  ScalarGrid tmp(w, h, 0.0), out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) acc += kernel[k + kSsimRadius] * in(xx, y);
      }
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) acc += kernel[k + kSsimRadius] * tmp(x, yy);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

// true where the full window lies inside the image and contains only valid samples.
MaskGrid erode_window(const MaskGrid& valid) {
  const int w = valid.width(), h = valid.height();
  MaskGrid row_ok(w, h, 0), out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t ok = (x - kSsimRadius >= 0 && x + kSsimRadius < w) ? 1 : 0;
      for (int k = -kSsimRadius; ok && k <= kSsimRadius; ++k) ok = valid(x + k, y);
      row_ok(x, y) = ok;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t ok = (y - kSsimRadius >= 0 && y + kSsimRadius < h) ? 1 : 0;
      for (int k = -kSsimRadius; ok && k <= kSsimRadius; ++k) ok = row_ok(x, y + k);
      out(x, y) = ok;
    }
  }
  return out;
}

ScalarGrid channel(const ImageRGB& img, int c) {
  ScalarGrid g(img.width(), img.height(), 0.0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) g(x, y) = img(x, y)[c];
  return g;
}

}  // namespace

void FilterConfig::validate() const {
  // 1.0 is the vacuous threshold: that criterion is disabled.
  auto usable = [](double v) { return v > 0 && v <= 1; };
  if (!usable(th_conf) || !usable(th_ssim) || !usable(th_dc) || !usable(th_occ))
    throw std::invalid_argument("filter: thresholds must lie in (0,1]");
  if (!(th_low > 0) || !(th_low < th_high) || !(th_high < 1))
    throw std::invalid_argument("filter: need 0 < th_low < th_high < 1");
  if (n_foreground < 0) throw std::invalid_argument("filter: n_foreground must be >= 0");
}

SsimResult ssim_mask(const ImageRGB& a, const ImageRGB& b, const MaskGrid& b_sampled_valid) {
  if (!a.same_size(b) || !a.same_size(b_sampled_valid))
    throw std::invalid_argument("ssim_mask: image dimensions differ");
  const int w = a.width(), h = a.height();

  SsimResult res;
  res.valid = erode_window(b_sampled_valid);
  res.m_ssim = ScalarGrid(w, h, kNaN);

  ScalarGrid ssim_sum(w, h, 0.0);
  for (int c = 0; c < 3; ++c) {
    const ScalarGrid xa = channel(a, c);
    const ScalarGrid xb = channel(b, c);
    ScalarGrid xa2(w, h, 0.0), xb2(w, h, 0.0), xab(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        xa2(x, y) = xa(x, y) * xa(x, y);
        xb2(x, y) = xb(x, y) * xb(x, y);
        xab(x, y) = xa(x, y) * xb(x, y);
      }
    }
    const ScalarGrid mu_a = gaussian_blur(xa), mu_b = gaussian_blur(xb);
    const ScalarGrid e_a2 = gaussian_blur(xa2), e_b2 = gaussian_blur(xb2);
    const ScalarGrid e_ab = gaussian_blur(xab);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double ma = mu_a(x, y), mb = mu_b(x, y);
        const double var_a = e_a2(x, y) - ma * ma;
        const double var_b = e_b2(x, y) - mb * mb;
        const double cov = e_ab(x, y) - ma * mb;
        const double ssim = ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                            ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
        ssim_sum(x, y) += ssim;
      }
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (res.valid(x, y)) res.m_ssim(x, y) = std::clamp(1.0 - ssim_sum(x, y) / 3.0, 0.0, 1.0);
  return res;
}

RfcResult rfc_mask(const RenderedView& view, double th_low, double th_high) {
  if (view.q_lo != th_low || view.q_hi != th_high)
    throw std::invalid_argument("rfc_mask: view was rendered with different CDF quantiles");
  const int w = view.rgb.width(), h = view.rgb.height();
  RfcResult res;
  res.m_conf = ScalarGrid(w, h, kNaN);
  res.valid = MaskGrid(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!view.depth_valid(x, y)) continue;
      const double t_l = view.weight_quantile_lo(x, y);
      const double t_h = view.weight_quantile_hi(x, y);
      if (!(t_l + t_h > 0)) continue;  // degenerate: both quantiles at depth 0
      res.m_conf(x, y) = rfc_from_quantiles(t_l, t_h);
      res.valid(x, y) = 1;
    }
  }
  return res;
}

DcResult depth_consistency_mask(const ReprojectionMaps& maps) {
  const int w = maps.width(), h = maps.height();
  DcResult res;
  res.m_dc = ScalarGrid(w, h, kNaN);
  res.valid = MaskGrid(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!maps.valid(x, y) || !maps.target_depth_valid(x, y)) continue;
      const double zi = maps.depth_in_target(x, y);
      const double zj = maps.target_sampled_depth(x, y);
      res.m_dc(x, y) = std::abs(zj - zi) / (zj + zi);
      res.valid(x, y) = 1;
    }
  }
  return res;
}

FilterResult filter_label(const FlowField& flow, const CredibilityMaps& cred,
                          const OcclusionMask& occ, const FilterConfig& cfg) {
  cfg.validate();
  const int w = flow.width(), h = flow.height();
  if (!cred.m_conf.same_size(w, h) || !cred.m_ssim.same_size(w, h) ||
      !cred.m_dc.same_size(w, h) || !occ.occluded.same_size(w, h))
    throw std::invalid_argument("filter_label: map dimensions differ");

  FilterResult res;
  res.label.flow = flow;
  res.label.supervision = MaskGrid(w, h, 0);
  res.counts.total = static_cast<std::int64_t>(w) * h;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!flow.valid(x, y)) continue;
      ++res.counts.valid_flow;
      const bool occluded = occ.occluded(x, y) != 0;
      const bool conf_ok =
          cfg.th_conf >= 1.0 || (cred.conf_valid(x, y) && cred.m_conf(x, y) < cfg.th_conf);
      const bool ssim_ok = cfg.th_ssim >= 1.0 || occluded ||
                           (cred.ssim_valid(x, y) && cred.m_ssim(x, y) < cfg.th_ssim);
      const bool dc_ok =
          cfg.th_dc >= 1.0 || (cred.dc_valid(x, y) && cred.m_dc(x, y) < cfg.th_dc);
      const bool occ_ok = !cfg.occlusion_hard_filter || !occluded;
      res.counts.pass_conf += conf_ok;
      res.counts.pass_ssim += ssim_ok;
      res.counts.pass_dc += dc_ok;
      if (conf_ok && ssim_ok && dc_ok && occ_ok) {
        res.label.supervision(x, y) = 1;
        ++res.counts.supervised;
      }
    }
  }
  return res;
}

}  // namespace flowforge
