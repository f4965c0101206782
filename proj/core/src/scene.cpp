#include "flowforge/scene.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Interval {
  double t0, t1;
  bool empty() const { return t0 > t1; }
};

Interval intersect(const Interval& a, const Interval& b) {
  return {std::max(a.t0, b.t0), std::min(a.t1, b.t1)};
}

// Parameter interval where the ray is inside the shape; empty interval on miss.
Interval ray_sphere(const Ray& ray, const SphereShape& s) {
  const Vec3 oc = ray.origin - s.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0) return {1, 0};
  const double sq = std::sqrt(disc);
  return {-b - sq, -b + sq};
}

Interval ray_box(const Ray& ray, const Vec3& bmin, const Vec3& bmax) {
  Interval iv{-std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (std::abs(d) < 1e-300) {
      if (o < bmin[a] || o > bmax[a]) return {1, 0};
      continue;
    }
    double lo = (bmin[a] - o) / d;
    double hi = (bmax[a] - o) / d;
    if (lo > hi) std::swap(lo, hi);
    iv = intersect(iv, {lo, hi});
    if (iv.empty()) return iv;
  }
  return iv;
}

Interval ray_slab(const Ray& ray, const SlabShape& s, const Aabb& bounds) {
  const double dn = ray.direction.dot(s.normal);
  const double on = ray.origin.dot(s.normal);
  Interval iv;
  if (std::abs(dn) < 1e-300) {
    if (on < s.offset || on > s.offset + s.thickness) return {1, 0};
    iv = {-std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  } else {
    double lo = (s.offset - on) / dn;
    double hi = (s.offset + s.thickness - on) / dn;
    if (lo > hi) std::swap(lo, hi);
    iv = {lo, hi};
  }
  // Slab support is clipped to the scene bounds.
  return intersect(iv, ray_box(ray, bounds.min, bounds.max));
}

bool shape_contains(const Shape& shape, const Vec3& x) {
  return std::visit(
      [&](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SphereShape>) {
          return (x - s.center).squaredNorm() <= s.radius * s.radius;
        } else if constexpr (std::is_same_v<S, BoxShape>) {
          return (x.array() >= s.min.array()).all() && (x.array() <= s.max.array()).all();
        } else {
          const double d = x.dot(s.normal);
          return d >= s.offset && d <= s.offset + s.thickness;
        }
      },
      shape);
}

}  // namespace

Mat3 Camera::intrinsics() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Mat3 Camera::inverse_intrinsics() const {
  Mat3 ki;
  ki << 1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1;
  return ki;
}

Vec3 Camera::pixel_direction(double u, double v) const {
  return Vec3((u - cx) / fx, (v - cy) / fy, 1.0).normalized();
}

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera: fx, fy must be > 0");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: resolution must be positive");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height)
    throw std::invalid_argument("camera: principal point outside image");
}

void Pose::validate(double tol) const {
  const Mat3 should_be_identity = rotation.transpose() * rotation;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("pose: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tol)
    throw std::invalid_argument("pose: rotation determinant is not +1");
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 up_hint = Vec3::UnitY();
  if (std::abs(fwd.dot(up_hint)) > 1.0 - 1e-9) up_hint = Vec3::UnitX();
  const Vec3 right = fwd.cross(up_hint).normalized();
  const Vec3 down = fwd.cross(right);  // unit by construction, y points "down"
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = fwd;
  pose.translation = eye;
  return pose;
}

Color VolumePrimitive::color_at(const Vec3& x) const {
  return std::visit(
      [&](const auto& fn) -> Color {
        using F = std::decay_t<decltype(fn)>;
        if constexpr (std::is_same_v<F, ConstantColor>) {
          return fn.rgb;
        } else if constexpr (std::is_same_v<F, CheckerColor>) {
          const long cell = static_cast<long>(std::floor(x.x() / fn.scale)) +
                            static_cast<long>(std::floor(x.y() / fn.scale)) +
                            static_cast<long>(std::floor(x.z() / fn.scale));
          return (cell & 1) == 0 ? fn.rgb_a : fn.rgb_b;
        } else {
          const double span = fn.range_hi - fn.range_lo;
          double s = span != 0 ? (x.dot(fn.direction) - fn.range_lo) / span : 0.0;
          s = std::clamp(s, 0.0, 1.0);
          return (1.0 - s) * fn.rgb_a + s * fn.rgb_b;
        }
      },
      color);
}

void VolumePrimitive::validate() const {
  if (!std::isfinite(density) || density < 0)
    throw std::invalid_argument("primitive: density must be finite and >= 0");
  if (const auto* c = std::get_if<CheckerColor>(&color); c && !(c->scale > 0))
    throw std::invalid_argument("primitive: checkerboard scale must be > 0");
  if (const auto* s = std::get_if<SphereShape>(&shape); s && !(s->radius > 0))
    throw std::invalid_argument("primitive: sphere radius must be > 0");
  if (const auto* s = std::get_if<SlabShape>(&shape)) {
    if (!(s->thickness > 0)) throw std::invalid_argument("primitive: slab thickness must be > 0");
    if (std::abs(s->normal.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("primitive: slab normal must be unit length");
  }
  if (const auto* b = std::get_if<BoxShape>(&shape);
      b && !((b->max.array() > b->min.array()).all()))
    throw std::invalid_argument("primitive: box max must exceed min");
}

bool SceneModel::inside_any_primitive(const Vec3& x) const {
  if (!bounds.contains(x)) return false;
  for (const auto& p : primitives)
    if (shape_contains(p.shape, x)) return true;
  return false;
}

void SceneModel::validate() const {
  if (!((bounds.max.array() > bounds.min.array()).all()))
    throw std::invalid_argument("scene: bounds max must exceed min");
  if ((background_color.array() < 0).any() || (background_color.array() > 1).any())
    throw std::invalid_argument("scene: background color outside [0,1]");
  for (const auto& p : primitives) {
    p.validate();
    // Sphere and box supports must lie inside the bounds; slabs are clipped.
    if (const auto* s = std::get_if<SphereShape>(&p.shape)) {
      if (!bounds.contains(s->center - Vec3::Constant(s->radius)) ||
          !bounds.contains(s->center + Vec3::Constant(s->radius)))
        throw std::invalid_argument("scene: sphere support exceeds bounds");
    } else if (const auto* b = std::get_if<BoxShape>(&p.shape)) {
      if (!bounds.contains(b->min) || !bounds.contains(b->max))
        throw std::invalid_argument("scene: box support exceeds bounds");
    }
  }
}

FieldSample field_at(const SceneModel& scene, const Vec3& x) {
  if (!scene.bounds.contains(x)) return {0.0, scene.background_color};
  double sigma = 0.0;
  Color weighted = Color::Zero();
  for (const auto& p : scene.primitives) {
    if (p.density <= 0 || !shape_contains(p.shape, x)) continue;
    sigma += p.density;
    weighted += p.density * p.color_at(x);
  }
  if (sigma <= 0) return {0.0, scene.background_color};
  return {sigma, weighted / sigma};
}

std::optional<double> analytic_first_surface(const SceneModel& scene, const Ray& ray) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : scene.primitives) {
    Interval iv = std::visit(
        [&](const auto& s) -> Interval {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, SphereShape>) {
            return ray_sphere(ray, s);
          } else if constexpr (std::is_same_v<S, BoxShape>) {
            return ray_box(ray, s.min, s.max);
          } else {
            return ray_slab(ray, s, scene.bounds);
          }
        },
        p.shape);
    if (iv.empty() || iv.t1 <= 0) continue;
    best = std::min(best, std::max(iv.t0, 0.0));
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

void PosePairSpec::validate() const {
  if (count < 1) throw std::invalid_argument("pose pairs: count must be >= 1");
  if (!(orbit_radius_min > 0) || orbit_radius_min > orbit_radius_max)
    throw std::invalid_argument("pose pairs: need 0 < orbit_radius_min <= orbit_radius_max");
  if (elevation_min > elevation_max)
    throw std::invalid_argument("pose pairs: elevation range inverted");
  if (baseline_max < 0) throw std::invalid_argument("pose pairs: baseline_max must be >= 0");
  if (rotation_jitter_max < 0)
    throw std::invalid_argument("pose pairs: rotation_jitter_max must be >= 0");
}

namespace {

Vec3 sample_in_ball(RngStream& rng, double radius) {
  // Rejection in the unit cube keeps the distribution exactly uniform.
  for (;;) {
    Vec3 v(rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1));
    if (v.squaredNorm() <= 1.0) return radius * v;
  }
}

Mat3 small_rotation(RngStream& rng, double max_angle) {
  if (max_angle <= 0) return Mat3::Identity();
  Vec3 axis;
  do {
    axis = Vec3(rng.next_double(-1, 1), rng.next_double(-1, 1), rng.next_double(-1, 1));
  } while (axis.squaredNorm() < 1e-12 || axis.squaredNorm() > 1.0);
  axis.normalize();
  const double angle = rng.next_double(0, max_angle);
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

}  // namespace

std::vector<std::pair<Pose, Pose>> sample_pose_pairs(const PosePairSpec& spec,
                                                     const SceneModel& scene,
                                                     const Vec3& scene_center) {
  spec.validate();
  RngStream rng(derive_seed(spec.seed, 0x706f7365));  // "pose"
  std::vector<std::pair<Pose, Pose>> pairs;
  pairs.reserve(spec.count);

  auto sample_position = [&](auto&& draw) -> Vec3 {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const Vec3 p = draw();
      if (!scene.inside_any_primitive(p)) return p;
    }
    throw std::runtime_error("sample_pose_pairs: camera position stuck inside "
                             "geometry after 100 attempts");
  };

  for (int i = 0; i < spec.count; ++i) {
    const Vec3 eye = sample_position([&] {
      const double radius = rng.next_double(spec.orbit_radius_min, spec.orbit_radius_max);
      const double elevation = rng.next_double(spec.elevation_min, spec.elevation_max);
      const double azimuth = rng.next_double(0, 2 * kPi);
      return scene_center + radius * Vec3(std::cos(elevation) * std::cos(azimuth),
                                          std::sin(elevation),
                                          std::cos(elevation) * std::sin(azimuth));
    });
    const Pose first = look_at(eye, scene_center);

    const Vec3 eye2 = sample_position([&] { return eye + sample_in_ball(rng, spec.baseline_max); });
    Pose second = look_at(eye2, scene_center);
    second.rotation = second.rotation * small_rotation(rng, spec.rotation_jitter_max);

    pairs.emplace_back(first, second);
  }
  return pairs;
}

}  // namespace flowforge
