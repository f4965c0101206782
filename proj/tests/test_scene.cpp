#include <doctest.h>

#include <cmath>
#include <set>

#include "flowforge/config.hpp"
#include "flowforge/scene.hpp"
#include "testutil.hpp"

using namespace flowforge;

namespace {

SceneModel two_slab_scene() {
  SceneModel scene;
  scene.bounds = {Vec3(-5, -5, -5), Vec3(5, 5, 5)};
  VolumePrimitive a;
  a.shape = SlabShape{Vec3::UnitZ(), 1.0, 2.0};  // z in [1, 3]
  a.density = 10.0;
  a.color = ConstantColor{Color(1, 0, 0)};
  VolumePrimitive b;
  b.shape = SlabShape{Vec3::UnitZ(), 2.0, 2.0};  // z in [2, 4]
  b.density = 30.0;
  b.color = ConstantColor{Color(0, 0, 1)};
  scene.primitives = {a, b};
  return scene;
}

}  // namespace

TEST_CASE("field_at: empty space returns zero density and background") {
  SceneModel scene;
  scene.bounds = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  scene.background_color = Color(0.2, 0.4, 0.6);
  const FieldSample s = field_at(scene, Vec3(0.5, 0, 0));
  CHECK(s.sigma == 0.0);
  CHECK(s.color == scene.background_color);
}

TEST_CASE("field_at: single sphere returns its density and color") {
  SceneModel scene;
  scene.bounds = {Vec3(-5, -5, -5), Vec3(5, 5, 5)};
  VolumePrimitive p;
  p.shape = SphereShape{Vec3(0, 0, 0), 1.0};
  p.density = 50.0;
  p.color = ConstantColor{Color(1, 0, 0)};
  scene.primitives = {p};
  const FieldSample s = field_at(scene, Vec3(0.2, 0.1, -0.3));
  CHECK(s.sigma == doctest::Approx(50.0));
  CHECK(s.color == Color(1, 0, 0));
}

TEST_CASE("field_at: overlapping slabs blend by density") {
  // sigma 10 red + sigma 30 blue -> sigma 40, color (0.25, 0, 0.75)
  const SceneModel scene = two_slab_scene();
  const FieldSample s = field_at(scene, Vec3(0, 0, 2.5));
  CHECK(s.sigma == doctest::Approx(40.0));
  CHECK(s.color.x() == doctest::Approx(0.25));
  CHECK(s.color.y() == doctest::Approx(0.0));
  CHECK(s.color.z() == doctest::Approx(0.75));
}

TEST_CASE("field_at is pure: repeated calls agree exactly") {
  const SceneModel scene = fftest::slab_sphere_scene();
  RngStream rng(7);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x(rng.next_double(-3, 3), rng.next_double(-3, 3), rng.next_double(-3, 3));
    const FieldSample a = field_at(scene, x);
    const FieldSample b = field_at(scene, x);
    CHECK(a.sigma == b.sigma);
    CHECK(a.color == b.color);
  }
}

TEST_CASE("analytic_first_surface: sphere along +z at distance 3") {
  SceneModel scene;
  scene.bounds = {Vec3(-5, -5, -5), Vec3(5, 5, 5)};
  VolumePrimitive p;
  p.shape = SphereShape{Vec3(0, 0, 4), 1.0};
  p.density = 1.0;
  scene.primitives = {p};

  const auto hit = analytic_first_surface(scene, Ray{Vec3::Zero(), Vec3::UnitZ()});
  REQUIRE(hit.has_value());
  CHECK(*hit == doctest::Approx(3.0).epsilon(1e-12));

  CHECK_FALSE(analytic_first_surface(scene, Ray{Vec3::Zero(), -Vec3::UnitZ()}).has_value());

  const auto inside = analytic_first_surface(scene, Ray{Vec3(0, 0, 4), Vec3::UnitX()});
  REQUIRE(inside.has_value());
  CHECK(*inside == 0.0);
}

TEST_CASE("analytic_first_surface brackets the density transition on random rays") {
  const SceneModel scene = fftest::slab_sphere_scene();
  const double eps = 1e-6 * scene.bounds.diagonal();
  RngStream rng(42);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const Ray ray = fftest::random_orbit_ray(rng, scene.bounds.center());
    const auto t = analytic_first_surface(scene, ray);
    if (!t) continue;
    ++hits;
    CHECK(field_at(scene, ray.at(*t - eps)).sigma == 0.0);
    CHECK(field_at(scene, ray.at(*t + eps)).sigma > 0.0);
  }
  CHECK(hits > 500);
}

TEST_CASE("look_at: forward axis points at the target, rotation orthonormal") {
  const Pose pose = look_at(Vec3(2, 1, -3), Vec3::Zero());
  pose.validate();
  const Vec3 to_target = (Vec3::Zero() - pose.translation).normalized();
  CHECK((pose.forward() - to_target).norm() < 1e-12);
  // degenerate: looking straight along the up hint
  const Pose down = look_at(Vec3(0, 5, 0), Vec3::Zero());
  down.validate();
  CHECK((down.forward() - Vec3(0, -1, 0)).norm() < 1e-12);
}

TEST_CASE("sample_pose_pairs: count, aim, orthonormality") {
  const SceneModel scene = fftest::slab_sphere_scene();
  PosePairSpec spec = fftest::orbit_spec(200, 99);
  const auto pairs = sample_pose_pairs(spec, scene, scene.bounds.center());
  REQUIRE(pairs.size() == 200);
  for (const auto& [first, second] : pairs) {
    first.validate(1e-9);
    second.validate(1e-9);
    // distance from the optical axis line to the scene center
    const Vec3 to_center = scene.bounds.center() - first.translation;
    const double off_axis = to_center.cross(first.forward()).norm();
    CHECK(off_axis < 1e-6);
    CHECK((second.translation - first.translation).norm() <= spec.baseline_max + 1e-12);
  }
}

TEST_CASE("sample_pose_pairs: degenerate baseline gives identical poses") {
  const SceneModel scene = fftest::slab_sphere_scene();
  PosePairSpec spec = fftest::orbit_spec(5, 123);
  spec.baseline_max = 0.0;
  spec.rotation_jitter_max = 0.0;
  for (const auto& [first, second] : sample_pose_pairs(spec, scene, scene.bounds.center())) {
    CHECK(first.rotation == second.rotation);
    CHECK(first.translation == second.translation);
  }
}

TEST_CASE("sample_pose_pairs: identical seeds reproduce bit-identical poses") {
  const SceneModel scene = fftest::slab_sphere_scene();
  const PosePairSpec spec = fftest::orbit_spec(20, 2024);
  const auto a = sample_pose_pairs(spec, scene, scene.bounds.center());
  const auto b = sample_pose_pairs(spec, scene, scene.bounds.center());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first.rotation == b[i].first.rotation);
    CHECK(a[i].first.translation == b[i].first.translation);
    CHECK(a[i].second.rotation == b[i].second.rotation);
    CHECK(a[i].second.translation == b[i].second.translation);
  }
}

TEST_CASE("sample_pose_pairs: rejects orbits stuck inside geometry") {
  SceneModel scene;
  scene.bounds = {Vec3(-20, -20, -20), Vec3(20, 20, 20)};
  VolumePrimitive p;
  p.shape = SphereShape{Vec3::Zero(), 10.0};  // swallows the whole orbit shell
  p.density = 1.0;
  scene.primitives = {p};
  PosePairSpec spec = fftest::orbit_spec(1, 5);
  spec.orbit_radius_min = 3.0;
  spec.orbit_radius_max = 4.0;
  CHECK_THROWS_AS(sample_pose_pairs(spec, scene, Vec3::Zero()), std::runtime_error);
}

TEST_CASE("scene validation rejects broken inputs") {
  SceneModel scene = fftest::slab_sphere_scene();
  CHECK_NOTHROW(scene.validate());

  SceneModel bad = scene;
  bad.primitives[1].density = -1.0;
  CHECK_THROWS(bad.validate());

  bad = scene;
  std::get<SphereShape>(bad.primitives[1].shape).center = Vec3(0, 3.9, 0);  // pokes out
  CHECK_THROWS(bad.validate());

  Camera cam = fftest::small_camera();
  cam.fx = 0;
  CHECK_THROWS(cam.validate());

  PosePairSpec spec = fftest::orbit_spec(1, 1);
  spec.orbit_radius_min = 0;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("scene config: round trip and unknown-key rejection") {
  const SceneBundle bundle = fftest::slab_sphere_bundle();
  const std::string text = scene_config_to_string(bundle);
  const SceneBundle reread = parse_scene_config(text, "roundtrip");
  CHECK(reread.scene.primitives.size() == bundle.scene.primitives.size());
  CHECK(reread.camera.fx == bundle.camera.fx);
  CHECK(reread.pose_pairs.seed == bundle.pose_pairs.seed);
  CHECK(reread.scene.bounds.min == bundle.scene.bounds.min);

  CHECK_THROWS_AS(parse_scene_config(R"({"bounds": {"min": [0,0,0], "max": [1,1,1]},
    "background_color": [0,0,0], "primitives": [], "typo_key": 1,
    "camera": {"fx":10,"fy":10,"cx":5,"cy":5,"width":10,"height":10},
    "pose_pairs": {"count":1,"orbit_radius_range":[1,2],"elevation_range":[0,0.5],
                   "baseline_max":0.1,"seed":1}})",
                                     "strict"),
                  ConfigError);
}
