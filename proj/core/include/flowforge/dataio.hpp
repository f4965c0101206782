#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flowforge/flowgen.hpp"
#include "flowforge/foreground.hpp"
#include "flowforge/grid.hpp"
#include "flowforge/masks.hpp"
#include "flowforge/png_io.hpp"
#include "flowforge/scene.hpp"

namespace flowforge {

inline constexpr const char* kSchemaVersion = "flowforge.dataset.v1";

/// KITTI-style 16-bit flow interchange: channels (u, v, valid), stored value
/// round(64 * f) + 2^15, so the representable range is |f| < 511.98 px at
/// 1/64 px resolution. Invalid pixels store (0, 0, 0).
inline constexpr double kFlowQuantization = 64.0;
inline constexpr int kFlowOffset = 32768;
inline constexpr double kFlowMaxMagnitude = 511.98;

/// Throws (naming the pixel) when a valid flow value is out of range.
Png16 encode_flow_png(const FlowField& flow);
/// Throws on wrong bit depth / channel count.
FlowField decode_flow_png(const Png16& img);

void write_flow_png(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow_png(const std::filesystem::path& path);

/// 32-bit float binary grid with a dimensions header; round-trips bit-exactly
/// (NaN patterns included). In-memory doubles are narrowed to float on write.
void write_float_grid(const std::filesystem::path& path, const ScalarGrid& grid);
ScalarGrid read_float_grid(const std::filesystem::path& path);

void write_image_png(const std::filesystem::path& path, const ImageRGB& image);
ImageRGB read_image_png(const std::filesystem::path& path);

/// Binary mask as 8-bit gray PNG, 255 = set.
void write_mask_png(const std::filesystem::path& path, const MaskGrid& mask);
MaskGrid read_mask_png(const std::filesystem::path& path);

std::uint32_t file_crc32(const std::filesystem::path& path);

/// Validity mask of a raw float map (invalid pixels are stored as NaN).
MaskGrid validity_from_nan(const ScalarGrid& g);

/// Per-sample record persisted as meta/<id>.json.
struct SampleMeta {
  std::string id;
  int index = 0;
  std::uint64_t seed_view1 = 0, seed_view2 = 0, seed_floaters = 0;
  Camera camera;
  Pose pose_1, pose_2;
  RaySamplingConfig sampling_1, sampling_2;  // resolved per view
  FilterConfig filter;
  std::vector<Floater> floaters;
  FilterCounts counts;
  std::map<std::string, std::uint32_t> checksums;  // relative path -> crc32
};

/// One generated pair with every artifact the pipeline persists. Raw
/// credibility maps keep NaN at invalid pixels.
struct DatasetSample {
  std::string id;
  ImageRGB image1, image2;
  FlowField flow;
  MaskGrid supervision;
  ScalarGrid m_conf, m_ssim, m_dc, ao;
  MaskGrid occluded;
  ScalarGrid depth1, depth2;
  SampleMeta meta;
};

/// Relative file paths of a sample inside a dataset root.
struct SamplePaths {
  std::string image1, image2, flow;
  std::string depth1, depth2;
  std::string m_conf_raw, m_ssim_raw, m_dc_raw, ao_raw;
  std::string m_conf_bin, m_ssim_bin, m_dc_bin, occ_bin, supervision_bin;
  std::string meta;

  std::vector<std::string> all_data_files() const;  // everything except meta
};
SamplePaths sample_paths(const std::string& id);

/// Writes every artifact plus meta (with fresh checksums of the data files).
void write_sample(const DatasetSample& sample, const std::filesystem::path& root);
/// Exact inverse; throws on missing files, checksum mismatches, or a schema
/// version mismatch.
DatasetSample read_sample(const std::filesystem::path& root, const std::string& id);

SampleMeta read_sample_meta(const std::filesystem::path& root, const std::string& id);
void write_sample_meta(const SampleMeta& meta, const std::filesystem::path& root);

struct Manifest {
  std::string schema_version = kSchemaVersion;
  std::vector<std::string> sample_ids;  // sorted
};
void write_manifest(const Manifest& manifest, const std::filesystem::path& root);
Manifest read_manifest(const std::filesystem::path& root);

}  // namespace flowforge
