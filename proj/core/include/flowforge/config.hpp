#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "flowforge/masks.hpp"
#include "flowforge/render.hpp"
#include "flowforge/scene.hpp"

namespace flowforge {

/// Raised for malformed or invalid configuration input (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a scene config file declares: the volumetric scene, the camera
/// intrinsics and the pose-pair sampler spec.
struct SceneBundle {
  SceneModel scene;
  Camera camera;
  PosePairSpec pose_pairs;
};

/// Parses the JSON scene config (schema in docs/formats.md). Unknown keys are
/// rejected at every level.
SceneBundle load_scene_config(const std::filesystem::path& path);
SceneBundle parse_scene_config(const std::string& json_text, const std::string& context);
std::string scene_config_to_string(const SceneBundle& bundle);

struct PipelineConfig {
  std::filesystem::path scene_config_path;
  std::filesystem::path output_root;  // optional; the CLI --out flag overrides
  RaySamplingConfig sampling;         // t_near/t_far <= 0 means scene-derived
  FilterConfig filter;                // includes n_foreground
  std::uint64_t seed = 0;             // mandatory in the file: no implicit entropy
  int parallelism = 1;
  SceneBundle bundle;                 // loaded from scene_config_path
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

}  // namespace flowforge
