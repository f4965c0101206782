#include "flowforge/flowgen.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowforge/bilinear.hpp"
#include "flowforge/parallel.hpp"

namespace flowforge {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ReprojectionMaps reproject(const ScalarGrid& depth_i, const MaskGrid& depth_i_valid,
                           const Camera& camera, const Pose& pose_i, const Pose& pose_j) {
  camera.validate();
  pose_i.validate();
  pose_j.validate();
  if (!depth_i.same_size(camera.width, camera.height) || !depth_i_valid.same_size(depth_i))
    throw std::invalid_argument("reproject: depth map does not match camera resolution");

  const int w = depth_i.width(), h = depth_i.height();
  ReprojectionMaps maps;
  maps.target_x = ScalarGrid(w, h, kNaN);
  maps.target_y = ScalarGrid(w, h, kNaN);
  maps.depth_in_target = ScalarGrid(w, h, kNaN);
  maps.target_sampled_depth = ScalarGrid(w, h, kNaN);
  maps.valid = MaskGrid(w, h, 0);
  maps.target_depth_valid = MaskGrid(w, h, 0);

  const Mat3 k_inv = camera.inverse_intrinsics();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth_i_valid(x, y)) continue;
      const Vec3 p_cam_i = depth_i(x, y) * (k_inv * Vec3(x, y, 1.0));
      const Vec3 p_world = pose_i.to_world(p_cam_i);
      const Vec3 p_cam_j = pose_j.to_camera(p_world);
      if (!(p_cam_j.z() > 0)) continue;  // behind camera j
      maps.depth_in_target(x, y) = p_cam_j.z();
      maps.target_x(x, y) = camera.fx * p_cam_j.x() / p_cam_j.z() + camera.cx;
      maps.target_y(x, y) = camera.fy * p_cam_j.y() / p_cam_j.z() + camera.cy;
      maps.valid(x, y) = 1;
    }
  }
  return maps;
}

void attach_target_depth(ReprojectionMaps& maps, const ScalarGrid& depth_j,
                         const MaskGrid& depth_j_valid) {
  if (!depth_j.same_size(maps.target_x) || !depth_j_valid.same_size(depth_j))
    throw std::invalid_argument("attach_target_depth: size mismatch");
  for (int y = 0; y < maps.height(); ++y) {
    for (int x = 0; x < maps.width(); ++x) {
      if (!maps.valid(x, y)) continue;
      if (auto z = bilinear_sample(depth_j, &depth_j_valid, maps.target_x(x, y),
                                   maps.target_y(x, y))) {
        maps.target_sampled_depth(x, y) = *z;
        maps.target_depth_valid(x, y) = 1;
      }
    }
  }
}

FlowField flow_from_reprojection(const ReprojectionMaps& maps) {
  FlowField flow(maps.width(), maps.height());
  for (int y = 0; y < maps.height(); ++y) {
    for (int x = 0; x < maps.width(); ++x) {
      if (!maps.valid(x, y)) continue;
      flow.u(x, y) = maps.target_x(x, y) - x;
      flow.v(x, y) = maps.target_y(x, y) - y;
      flow.valid(x, y) = 1;
    }
  }
  return flow;
}

OcclusionMask occlusion_from_ao(const SceneModel& scene, const Camera& camera,
                                const Pose& pose_j, const ReprojectionMaps& maps,
                                const RaySamplingConfig& cfg, double th_occ,
                                int parallelism) {
  cfg.validate();
  if (!maps.target_x.same_size(camera.width, camera.height))
    throw std::invalid_argument("occlusion_from_ao: maps do not match camera resolution");

  const int w = maps.width(), h = maps.height();
  OcclusionMask out;
  out.occluded = MaskGrid(w, h, 0);
  out.ao_values = ScalarGrid(w, h, 0.0);

  RaySamplingConfig march_cfg = cfg;
  march_cfg.stratified = false;
  const double margin = 1.5 * march_cfg.interval_width();

  parallel_for(0, h, parallelism, [&](int y) {
    RngStream rng(0);  // unused: unjittered march
    for (int x = 0; x < w; ++x) {
      if (!maps.valid(x, y)) continue;
      const Vec3 dir_cam = camera.pixel_direction(maps.target_x(x, y), maps.target_y(x, y));
      const Ray ray{pose_j.translation, pose_j.rotation * dir_cam};
      const WeightProfile profile = march_ray(scene, ray, march_cfg, rng);

      // Z_i' is a z-depth; convert to ray distance before comparing against
      // interval boundaries, then stop one margin short of the surface so it
      // does not count as its own occluder.
      const double t_limit = maps.depth_in_target(x, y) / dir_cam.z() - margin;
      double ao = 0.0;
      for (int i = 0; i < profile.n_intervals(); ++i) {
        if (profile.boundaries[i + 1] > t_limit) break;
        ao += profile.weights[i];
      }
      out.ao_values(x, y) = ao;
      out.occluded(x, y) = ao >= th_occ ? 1 : 0;
    }
  });
  return out;
}

WarpResult backward_warp(const ImageRGB& image_j, const FlowField& flow) {
  if (!image_j.same_size(flow.u))
    throw std::invalid_argument("backward_warp: flow dimensions do not match image");
  const int w = image_j.width(), h = image_j.height();
  WarpResult out;
  out.warped = ImageRGB(w, h, Color::Zero());
  out.sampled_valid = MaskGrid(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!flow.valid(x, y)) continue;
      if (auto c = bilinear_sample(image_j, nullptr, x + flow.u(x, y), y + flow.v(x, y))) {
        out.warped(x, y) = *c;
        out.sampled_valid(x, y) = 1;
      }
    }
  }
  return out;
}

}  // namespace flowforge
