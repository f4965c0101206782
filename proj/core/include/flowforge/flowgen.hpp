#pragma once

#include "flowforge/grid.hpp"
#include "flowforge/render.hpp"
#include "flowforge/scene.hpp"

namespace flowforge {

/// Dense pixel displacements frame i -> frame j.
struct FlowField {
  ScalarGrid u, v;
  MaskGrid valid;

  FlowField() = default;
  FlowField(int width, int height)
      : u(width, height, 0.0), v(width, height, 0.0), valid(width, height, 0) {}
  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

/// Where each frame-i pixel lands in frame j, with its depth seen from j
/// (Z_i') and frame j's own rendered depth sampled there (Z_j').
struct ReprojectionMaps {
  ScalarGrid target_x, target_y;      // p_i' in frame-j pixel coordinates
  ScalarGrid depth_in_target;         // Z_i', z-depth in camera j
  ScalarGrid target_sampled_depth;    // Z_j', bilinear sample of frame-j depth at p_i'
  MaskGrid valid;                     // source depth valid and Z_i' > 0
  MaskGrid target_depth_valid;        // Z_j' sample obtained

  int width() const { return target_x.width(); }
  int height() const { return target_x.height(); }
};

/// Lifts every valid frame-i pixel to 3D with its z-depth, transforms it into
/// camera j and projects it. Pixels landing behind camera j become invalid.
/// Throws when the depth map does not match the camera resolution.
ReprojectionMaps reproject(const ScalarGrid& depth_i, const MaskGrid& depth_i_valid,
                           const Camera& camera, const Pose& pose_i, const Pose& pose_j);

/// Fills target_sampled_depth (Z_j') by bilinear sampling of frame j's
/// midpoint depth map at p_i'.
void attach_target_depth(ReprojectionMaps& maps, const ScalarGrid& depth_j,
                         const MaskGrid& depth_j_valid);

/// f_{i->j} = p_i' - p_i.
FlowField flow_from_reprojection(const ReprojectionMaps& maps);

struct OcclusionMask {
  MaskGrid occluded;
  ScalarGrid ao_values;  // accumulated weight in front of Z_i', in [0,1]
};

/// Ambient-occlusion test between the frame-j viewpoint and the reprojected
/// depth: re-marches the frame-j ray through p_i' and sums the weight of
/// intervals ending at least one margin (1.5 interval widths) before Z_i'.
/// occluded = ao >= th_occ (inclusive). The march is unjittered so the mask
/// is deterministic without an RNG.
OcclusionMask occlusion_from_ao(const SceneModel& scene, const Camera& camera,
                                const Pose& pose_j, const ReprojectionMaps& maps,
                                const RaySamplingConfig& cfg, double th_occ,
                                int parallelism = 1);

struct WarpResult {
  ImageRGB warped;
  MaskGrid sampled_valid;
};

/// warped(p) = bilinear sample of image_j at p + flow(p); sampled_valid drops
/// pixels whose flow is invalid or whose sample point leaves the image.
WarpResult backward_warp(const ImageRGB& image_j, const FlowField& flow);

}  // namespace flowforge
