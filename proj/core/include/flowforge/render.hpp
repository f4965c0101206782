#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flowforge/grid.hpp"
#include "flowforge/scene.hpp"

namespace flowforge {

struct RaySamplingConfig {
  double t_near = 0.0;
  double t_far = 0.0;
  int n_intervals = 256;
  bool stratified = false;

  double interval_width() const { return (t_far - t_near) / n_intervals; }
  void validate() const;
};

/// Fills in t_near / t_far from the camera position and scene bounds when the
/// config leaves them unset (t_far <= t_near).
RaySamplingConfig resolve_sampling(const RaySamplingConfig& base, const SceneModel& scene,
                                   const Vec3& camera_position);

/// Per-ray emission-absorption profile over n intervals. sigmas are point
/// samples at interval midpoints; weights and transmittance follow
///   w_i = (1 - exp(-sigma_i * dt_i)) * E_i,   E_i = exp(-sum_{j<i} sigma_j dt_j)
/// and are recomputable from the stored sigmas. All distances are ray
/// distances (direction is unit length).
struct WeightProfile {
  std::vector<double> boundaries;     // strictly increasing, size n+1
  std::vector<double> sigmas;         // size n
  std::vector<double> weights;        // size n, each >= 0, sum <= 1
  std::vector<double> transmittance;  // size n, starts at 1, non-increasing

  int n_intervals() const { return static_cast<int>(sigmas.size()); }
  double interval_mid(int i) const { return 0.5 * (boundaries[i] + boundaries[i + 1]); }
  double total_weight() const;
};

/// Builds a profile directly from per-interval weights (test/diagnostic use);
/// sigmas are back-solved so the profile satisfies the recomputability
/// invariant.
WeightProfile profile_from_weights(std::vector<double> boundaries,
                                   std::span<const double> weights);

/// A ray needs at least this much total weight before its depth is defined;
/// below it the q=0.5 crossing does not exist in any robust sense.
inline constexpr double kMinDepthWeight = 0.5;

/// Marches one ray: partitions [t_near, t_far] into cfg.n_intervals intervals
/// (boundaries jittered within their strata when cfg.stratified), samples the
/// field at interval midpoints and accumulates weights / transmittance.
/// When `colors` is non-null it receives the midpoint color samples.
WeightProfile march_ray(const SceneModel& scene, const Ray& ray,
                        const RaySamplingConfig& cfg, RngStream& rng,
                        std::vector<Color>* colors = nullptr);

/// C = sum_i w_i c_i + (1 - sum_i w_i) * background.
Color render_pixel_rgb(const WeightProfile& profile, std::span<const Color> colors,
                       const Color& background);

/// Expected depth sum_i w_i t_mid_i; nullopt when total weight < kMinDepthWeight.
std::optional<double> expected_depth(const WeightProfile& profile);

/// Depth where the weight CDF (normalized by total weight, piecewise linear
/// within each interval) crosses q in (0,1); nullopt when total weight
/// < kMinDepthWeight. q = 0.5 is the midpoint depth.
std::optional<double> weight_quantile_depth(const WeightProfile& profile, double q);

/// Per-view render products. All depth maps are z-depths in the camera frame
/// (ray-distance quantiles scaled by the ray's unit-direction z component) so
/// they plug directly into pinhole reprojection. Invalid depths hold NaN and
/// are flagged in depth_valid.
struct RenderedView {
  ImageRGB rgb;
  ScalarGrid midpoint_depth;
  ScalarGrid expected_depth;
  ScalarGrid weight_quantile_lo;
  ScalarGrid weight_quantile_hi;
  ScalarGrid total_weight;
  MaskGrid depth_valid;
  double q_lo = 0.1;
  double q_hi = 0.9;
};

/// Renders one ray per pixel through the pixel's continuous coordinate (u, v).
/// Deterministic for a given seed regardless of parallelism: every pixel owns
/// an independent seed-derived RNG stream.
RenderedView render_view(const SceneModel& scene, const Camera& camera, const Pose& pose,
                         const RaySamplingConfig& cfg, std::uint64_t seed,
                         double q_lo = 0.1, double q_hi = 0.9, int parallelism = 1);

}  // namespace flowforge
