#include "flowforge/render.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowforge/parallel.hpp"

namespace flowforge {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void RaySamplingConfig::validate() const {
  if (!(t_near >= 0) || !(t_near < t_far))
    throw std::invalid_argument("sampling: need 0 <= t_near < t_far");
  if (n_intervals < 2) throw std::invalid_argument("sampling: n_intervals must be >= 2");
}

RaySamplingConfig resolve_sampling(const RaySamplingConfig& base, const SceneModel& scene,
                                   const Vec3& camera_position) {
  if (base.t_far > base.t_near) {
    base.validate();
    return base;
  }
  RaySamplingConfig cfg = base;
  const Vec3& lo = scene.bounds.min;
  const Vec3& hi = scene.bounds.max;
  double d_max = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 c(corner & 1 ? hi.x() : lo.x(), corner & 2 ? hi.y() : lo.y(),
                 corner & 4 ? hi.z() : lo.z());
    d_max = std::max(d_max, (c - camera_position).norm());
  }
  const Vec3 clamped = camera_position.cwiseMax(lo).cwiseMin(hi);
  const double d_box = (clamped - camera_position).norm();  // 0 when inside
  const double eps = 1e-3 * scene.bounds.diagonal();
  cfg.t_near = std::max(eps, 0.95 * d_box);
  cfg.t_far = 1.02 * d_max;
  cfg.validate();
  return cfg;
}

double WeightProfile::total_weight() const {
  double sum = 0.0;
  for (double w : weights) sum += w;
  return sum;
}

WeightProfile profile_from_weights(std::vector<double> boundaries,
                                   std::span<const double> weights) {
  if (boundaries.size() != weights.size() + 1)
    throw std::invalid_argument("profile_from_weights: need n+1 boundaries for n weights");
  WeightProfile p;
  p.boundaries = std::move(boundaries);
  p.weights.assign(weights.begin(), weights.end());
  const int n = p.n_intervals();
  p.sigmas.resize(n);
  p.transmittance.resize(n);
  double remaining = 1.0;
  for (int i = 0; i < n; ++i) {
    const double w = p.weights[i];
    if (w < 0 || w > remaining + 1e-12)
      throw std::invalid_argument("profile_from_weights: weights must be >= 0 and sum <= 1");
    p.transmittance[i] = remaining;
    const double alpha = remaining > 0 ? std::min(w / remaining, 1.0) : 0.0;
    const double dt = p.boundaries[i + 1] - p.boundaries[i];
    p.sigmas[i] = alpha >= 1.0 ? 1e12 : -std::log1p(-alpha) / dt;
    remaining -= w;
  }
  return p;
}

WeightProfile march_ray(const SceneModel& scene, const Ray& ray,
                        const RaySamplingConfig& cfg, RngStream& rng,
                        std::vector<Color>* colors) {
  cfg.validate();
  const int n = cfg.n_intervals;
  const double dt = cfg.interval_width();

  WeightProfile p;
  p.boundaries.resize(n + 1);
  p.boundaries[0] = cfg.t_near;
  p.boundaries[n] = cfg.t_far;
  for (int i = 1; i < n; ++i) {
    double b = cfg.t_near + i * dt;
    if (cfg.stratified) b += (rng.next_double() - 0.5) * dt;
    p.boundaries[i] = b;
  }

  p.sigmas.resize(n);
  p.weights.resize(n);
  p.transmittance.resize(n);
  if (colors) colors->resize(n);

  double optical_depth = 0.0;
  for (int i = 0; i < n; ++i) {
    const double width = p.boundaries[i + 1] - p.boundaries[i];
    const FieldSample s = field_at(scene, ray.at(p.interval_mid(i)));
    const double e = std::exp(-optical_depth);
    p.sigmas[i] = s.sigma;
    p.transmittance[i] = e;
    p.weights[i] = (1.0 - std::exp(-s.sigma * width)) * e;
    optical_depth += s.sigma * width;
    if (colors) (*colors)[i] = s.color;
  }
  return p;
}

Color render_pixel_rgb(const WeightProfile& profile, std::span<const Color> colors,
                       const Color& background) {
  if (static_cast<int>(colors.size()) != profile.n_intervals())
    throw std::invalid_argument("render_pixel_rgb: one color per interval required");
  Color c = Color::Zero();
  double total = 0.0;
  for (int i = 0; i < profile.n_intervals(); ++i) {
    c += profile.weights[i] * colors[i];
    total += profile.weights[i];
  }
  return c + (1.0 - total) * background;
}

std::optional<double> expected_depth(const WeightProfile& profile) {
  if (profile.total_weight() < kMinDepthWeight) return std::nullopt;
  double z = 0.0;
  for (int i = 0; i < profile.n_intervals(); ++i)
    z += profile.weights[i] * profile.interval_mid(i);
  return z;
}

std::optional<double> weight_quantile_depth(const WeightProfile& profile, double q) {
  if (!(q > 0) || !(q < 1)) throw std::invalid_argument("weight_quantile_depth: q in (0,1)");
  const double total = profile.total_weight();
  if (total < kMinDepthWeight) return std::nullopt;
  // First depth where the normalized piecewise-linear CDF reaches q.
  const double target = q * total;
  double cum = 0.0;
  for (int i = 0; i < profile.n_intervals(); ++i) {
    const double w = profile.weights[i];
    if (w > 0 && cum + w >= target) {
      const double frac = (target - cum) / w;
      return profile.boundaries[i] + frac * (profile.boundaries[i + 1] - profile.boundaries[i]);
    }
    cum += w;
  }
  return profile.boundaries.back();
}

RenderedView render_view(const SceneModel& scene, const Camera& camera, const Pose& pose,
                         const RaySamplingConfig& cfg, std::uint64_t seed,
                         double q_lo, double q_hi, int parallelism) {
  camera.validate();
  pose.validate();
  cfg.validate();
  if (!(q_lo > 0) || !(q_lo < q_hi) || !(q_hi < 1))
    throw std::invalid_argument("render_view: need 0 < q_lo < q_hi < 1");

  const int w = camera.width, h = camera.height;
  RenderedView view;
  view.rgb = ImageRGB(w, h, Color::Zero());
  view.midpoint_depth = ScalarGrid(w, h, kNaN);
  view.expected_depth = ScalarGrid(w, h, kNaN);
  view.weight_quantile_lo = ScalarGrid(w, h, kNaN);
  view.weight_quantile_hi = ScalarGrid(w, h, kNaN);
  view.total_weight = ScalarGrid(w, h, 0.0);
  view.depth_valid = MaskGrid(w, h, 0);
  view.q_lo = q_lo;
  view.q_hi = q_hi;

  parallel_for(0, h, parallelism, [&](int y) {
    std::vector<Color> colors;
    for (int x = 0; x < w; ++x) {
      const Vec3 dir_cam = camera.pixel_direction(x, y);
      const Ray ray{pose.translation, pose.rotation * dir_cam};
      RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(y) * w + x));
      const WeightProfile profile = march_ray(scene, ray, cfg, rng, &colors);

      view.rgb(x, y) = render_pixel_rgb(profile, colors, scene.background_color);
      view.total_weight(x, y) = profile.total_weight();

      // Stored depths are z-depths: ray distance scaled by the camera-frame
      // direction z component, which makes them valid pinhole depths.
      const double dz = dir_cam.z();
      if (auto mid = weight_quantile_depth(profile, 0.5)) {
        view.midpoint_depth(x, y) = *mid * dz;
        view.expected_depth(x, y) = *expected_depth(profile) * dz;
        view.weight_quantile_lo(x, y) = *weight_quantile_depth(profile, q_lo) * dz;
        view.weight_quantile_hi(x, y) = *weight_quantile_depth(profile, q_hi) * dz;
        view.depth_valid(x, y) = 1;
      }
    }
  });
  return view;
}

}  // namespace flowforge
