#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "flowforge/geometry.hpp"
#include "flowforge/rng.hpp"

namespace flowforge {

/// Pinhole intrinsics. Pixel (u, v) denotes the continuous image-plane point
/// (u, v) itself: the ray of pixel (u, v) goes through K^-1 (u, v, 1).
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  Mat3 intrinsics() const;
  Mat3 inverse_intrinsics() const;
  /// Unit direction of pixel (u, v) in the camera frame (+z forward).
  Vec3 pixel_direction(double u, double v) const;
  void validate() const;
};

/// Rigid camera-to-world transform. Camera frame: +x right, +y down (pixel
/// coordinates), +z forward.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 to_camera(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
  Vec3 forward() const { return rotation.col(2); }
  void validate(double tol = 1e-9) const;
};

/// Camera-to-world pose at `eye` looking at `target`. World +y is the up
/// hint; if the view direction is parallel to it, world +x is used instead.
Pose look_at(const Vec3& eye, const Vec3& target);

struct SphereShape {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};
struct BoxShape {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};
/// Region offset <= dot(normal, x) <= offset + thickness. Unbounded along the
/// plane, so its effective support is clipped to the scene bounds.
struct SlabShape {
  Vec3 normal = Vec3::UnitZ();  // unit length
  double offset = 0.0;
  double thickness = 1.0;
};
using Shape = std::variant<SphereShape, BoxShape, SlabShape>;

struct ConstantColor {
  Color rgb = Color::Ones();
};
/// 3D checkerboard with cubic cells of side `scale`.
struct CheckerColor {
  double scale = 1.0;
  Color rgb_a = Color::Ones();
  Color rgb_b = Color::Zero();
};
/// Linear blend from rgb_a to rgb_b as dot(direction, x) sweeps [range_lo, range_hi].
struct GradientColor {
  Vec3 direction = Vec3::UnitZ();
  double range_lo = 0.0;
  double range_hi = 1.0;
  Color rgb_a = Color::Ones();
  Color rgb_b = Color::Zero();
};
using ColorFn = std::variant<ConstantColor, CheckerColor, GradientColor>;

struct VolumePrimitive {
  Shape shape;
  double density = 1.0;  // sigma, 1/length units
  ColorFn color = ConstantColor{};

  Color color_at(const Vec3& x) const;
  void validate() const;
};

/// Procedural stand-in for a reconstructed radiance field: density and color
/// as functions of 3D position, zero outside `bounds`.
struct SceneModel {
  std::vector<VolumePrimitive> primitives;
  Aabb bounds;
  Color background_color = Color::Zero();

  bool inside_any_primitive(const Vec3& x) const;
  void validate() const;
};

struct FieldSample {
  double sigma = 0.0;
  Color color = Color::Zero();
};

/// Density union is additive; color is the density-weighted average of the
/// contributing primitives, or the background color in empty space.
FieldSample field_at(const SceneModel& scene, const Vec3& x);

/// Exact entry distance of the ray into the union of primitive supports.
/// Returns 0 when the origin is already inside; nullopt on a miss.
std::optional<double> analytic_first_surface(const SceneModel& scene, const Ray& ray);

struct PosePairSpec {
  int count = 1;
  double orbit_radius_min = 1.0;
  double orbit_radius_max = 1.0;
  double elevation_min = 0.0;  // radians above the horizontal plane
  double elevation_max = 0.0;
  double baseline_max = 0.1;   // max translation between the poses of a pair
  double rotation_jitter_max = 0.0;  // radians
  std::uint64_t seed = 0;

  void validate() const;
};

/// Center-facing orbit sampler. The first pose of each pair looks at
/// scene_center exactly; the second is the first translated by a random
/// vector of norm <= baseline_max, re-aimed at scene_center, then perturbed
/// by a rotation of angle <= rotation_jitter_max. Throws if a sampled
/// position still lies inside a primitive after 100 attempts.
std::vector<std::pair<Pose, Pose>> sample_pose_pairs(const PosePairSpec& spec,
                                                     const SceneModel& scene,
                                                     const Vec3& scene_center);

}  // namespace flowforge
