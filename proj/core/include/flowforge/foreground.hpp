#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "flowforge/grid.hpp"
#include "flowforge/masks.hpp"

namespace flowforge {

struct BezierSegment {
  Vec2 p0, c1, c2, p1;  // cubic control points, normalized image coordinates
};

struct ConstantTexture {
  Color rgb = Color::Ones();
};
/// Linear blend along `direction` (unit, pixel coords) from rgb_a at lo to
/// rgb_b at hi.
struct GradientTexture {
  Vec2 direction = Vec2::UnitX();
  double lo = 0.0, hi = 1.0;
  Color rgb_a = Color::Ones();
  Color rgb_b = Color::Zero();
};
using FloaterTexture = std::variant<ConstantTexture, GradientTexture>;

/// Opaque planar slice bounded by a closed chain of cubic Bezier segments.
/// Control points live in normalized [0,1]^2 image coordinates (pixel
/// position = (nx * width, ny * height)); `motion` maps frame-1 pixel
/// coordinates to frame-2 pixel coordinates.
struct Floater {
  std::vector<BezierSegment> segments;  // closed: segment k ends where k+1 starts
  FloaterTexture texture;
  Mat3 motion = Mat3::Identity();
  int depth_order = 0;  // smaller = nearer

  Color texture_at(const Vec2& pixel) const;
  void validate() const;
};

/// Projective map of a pixel position, (x', y', w') = H (x, y, 1).
Vec2 apply_homography(const Mat3& h, const Vec2& pixel);

/// n floaters with control points inside a disk of radius <= 0.25*min(w,h)
/// around a center drawn uniformly in the central half of the image, moving
/// by a similarity (rotation <= 15 deg, scale in [0.9, 1.1], translation
/// <= 0.1*min(w,h)) with slight projective jitter. Deterministic per seed.
std::vector<Floater> sample_floaters(int n, std::uint64_t seed, int width, int height);

/// Even-odd scanline fill of the flattened outline (max flattening deviation
/// 0.25 px). Pixel (u, v) is covered when the point (u, v) lies inside under
/// the half-open convention: edges span [y_min, y_max) and spans fill
/// x in [x_enter, x_exit).
MaskGrid rasterize_floater(const Floater& floater, int width, int height);

struct CompositeResult {
  ImageRGB image1, image2;
  FilteredLabel label;
  OcclusionMask occlusion;
  CredibilityMaps credibility;
  MaskGrid fg_mask_1, fg_mask_2;   // union floater coverage per frame
  MaskGrid occlusion_update;       // pixels newly occluded by a frame-2 floater
  FilterCounts counts;
};

/// Paints floaters into both frames in depth order (frame-2 region is the
/// homography image of the frame-1 region). Inside a frame-1 floater the flow
/// becomes the homography displacement and all credibility measurements are
/// zeroed (the stamp is exact by construction); background pixels whose flow
/// target lands in a nearer frame-2 floater are marked occluded. Supervision
/// is re-derived from the updated maps with the same rule as filter_label,
/// so persisted raw masks always reproduce it.
CompositeResult composite(const ImageRGB& image1, const ImageRGB& image2,
                          const FilteredLabel& label, const OcclusionMask& occ,
                          const CredibilityMaps& cred, const FilterConfig& cfg,
                          std::span<const Floater> floaters);

}  // namespace flowforge
