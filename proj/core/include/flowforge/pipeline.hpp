#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowforge/config.hpp"
#include "flowforge/dataio.hpp"
#include "flowforge/evalmetrics.hpp"

namespace flowforge {

struct SampleSeeds {
  std::uint64_t view1 = 0, view2 = 0, floaters = 0;
};
SampleSeeds seeds_for_sample(std::uint64_t global_seed, int sample_index);
std::string sample_id_for_index(int index);

/// Runs the full per-pair label pipeline: render both views, reproject,
/// derive flow + raw credibility maps, filter, composite floaters. Raw maps
/// are quantized to float32 before thresholding so that refiltering the
/// persisted files reproduces the supervision mask bit-exactly.
DatasetSample generate_sample(const SceneModel& scene, const Camera& camera,
                              const Pose& pose_1, const Pose& pose_2,
                              const RaySamplingConfig& sampling, const FilterConfig& filter,
                              const SampleSeeds& seeds, const std::string& id, int index,
                              int parallelism = 1);

struct SampleSummary {
  std::string id;
  FilterCounts counts;
  double retained_fraction = 0.0;  // supervised / total
};

struct GenerateReport {
  std::filesystem::path root;
  int requested = 0;
  int written = 0;
  std::vector<SampleSummary> samples;                       // sorted by id
  std::vector<std::pair<std::string, std::string>> failures;  // id -> error
  FilterCounts aggregate;
};

/// Generates the whole dataset under out_root (manifest, dataset.json,
/// summary.json, one sample directory tree). Per-sample failures are recorded
/// and skipped; callers decide the exit code.
GenerateReport generate_dataset(const PipelineConfig& cfg,
                                const std::filesystem::path& out_root);

struct RefilterReport {
  int samples = 0;
  std::int64_t retained_before = 0;
  std::int64_t retained_after = 0;
  std::vector<SampleSummary> per_sample;  // counts under the new thresholds
};

/// Recomputes supervision and thresholded mask PNGs from the persisted raw
/// float maps, without re-rendering. Throws when raw maps are missing.
RefilterReport refilter_dataset(const std::filesystem::path& root, const FilterConfig& cfg);

/// The filter config recorded in a dataset's dataset.json.
FilterConfig dataset_filter_config(const std::filesystem::path& root);

struct EvalOptions {
  OutlierRule rule = OutlierRule::kKittiAnd;
};

struct EvalReport {
  int samples = 0;
  FlowMetricsReport flow;                  // per-sample metrics averaged
  std::optional<DepthRatioReport> depth_ratio;
  std::optional<ZeroShotLosses> zero_shot;
};

/// Compares predicted flow PNGs against ground truth. `gt` may be a dataset
/// root (manifest present: supervision masks gate the evaluation, zero-shot
/// losses are computed from the stored images, and tau maps in pred/tau are
/// scored when present) or a plain directory of *_flow.png files.
EvalReport evaluate_directories(const std::filesystem::path& pred,
                                const std::filesystem::path& gt, const EvalOptions& options);

/// Human-readable per-ray diagnostic for one pixel of one sample: weight
/// profile, CDF quantiles, mask values and a pass/fail line per criterion.
std::string inspect_pixel(const std::filesystem::path& root, const std::string& id, int u,
                          int v);

}  // namespace flowforge
