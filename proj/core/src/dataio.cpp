#include "flowforge/dataio.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "serialize_detail.hpp"

static_assert(std::endian::native == std::endian::little,
              "float grid format assumes a little-endian host");

namespace flowforge {

namespace {

using detail::json;

constexpr char kFloatGridMagic[8] = {'F', 'F', 'G', 'R', 'I', 'D', '0', '1'};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(what + ": " + path.string());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "missing file");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(path, std::string("malformed JSON (") + e.what() + ")");
  }
  return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) fail(path, "write failed");
}

}  // namespace

Png16 encode_flow_png(const FlowField& flow) {
  const int w = flow.width(), h = flow.height();
  Png16 img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.pixels.assign(std::size_t(w) * h * 3, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t base = (std::size_t(y) * w + x) * 3;
      if (!flow.valid(x, y)) continue;  // stays (0, 0, 0)
      const double fu = flow.u(x, y);
      const double fv = flow.v(x, y);
      if (std::abs(fu) >= kFlowMaxMagnitude || std::abs(fv) >= kFlowMaxMagnitude) {
        std::ostringstream msg;
        msg << "encode_flow_png: flow out of range at pixel (" << x << ", " << y << "): ("
            << fu << ", " << fv << ")";
        throw std::runtime_error(msg.str());
      }
      img.pixels[base + 0] = static_cast<std::uint16_t>(std::lround(fu * kFlowQuantization) + kFlowOffset);
      img.pixels[base + 1] = static_cast<std::uint16_t>(std::lround(fv * kFlowQuantization) + kFlowOffset);
      img.pixels[base + 2] = 1;
    }
  }
  return img;
}

FlowField decode_flow_png(const Png16& img) {
  if (img.channels != 3)
    throw std::runtime_error("decode_flow_png: expected 3 channels, got " +
                             std::to_string(img.channels));
  FlowField flow(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t base = (std::size_t(y) * img.width + x) * 3;
      if (img.pixels[base + 2] == 0) continue;
      flow.u(x, y) = (img.pixels[base + 0] - kFlowOffset) / kFlowQuantization;
      flow.v(x, y) = (img.pixels[base + 1] - kFlowOffset) / kFlowQuantization;
      flow.valid(x, y) = 1;
    }
  }
  return flow;
}

void write_flow_png(const std::filesystem::path& path, const FlowField& flow) {
  write_png16(path, encode_flow_png(flow));
}

FlowField read_flow_png(const std::filesystem::path& path) {
  return decode_flow_png(read_png16(path));
}

void write_float_grid(const std::filesystem::path& path, const ScalarGrid& grid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out.write(kFloatGridMagic, sizeof(kFloatGridMagic));
  const std::uint32_t w = grid.width(), h = grid.height();
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(grid.width());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) row[x] = static_cast<float>(grid(x, y));
    out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!out) fail(path, "write failed");
}

ScalarGrid read_float_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "missing file");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFloatGridMagic, 8) != 0) fail(path, "bad float grid magic");
  std::uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    fail(path, "bad float grid header");
  ScalarGrid grid(static_cast<int>(w), static_cast<int>(h), 0.0);
  std::vector<float> row(w);
  for (std::uint32_t y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!in) fail(path, "truncated float grid");
    for (std::uint32_t x = 0; x < w; ++x) grid(static_cast<int>(x), static_cast<int>(y)) = row[x];
  }
  return grid;
}

void write_image_png(const std::filesystem::path& path, const ImageRGB& image) {
  Png8 img;
  img.width = image.width();
  img.height = image.height();
  img.channels = 3;
  img.pixels.resize(std::size_t(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t base = (std::size_t(y) * img.width + x) * 3;
      for (int c = 0; c < 3; ++c) img.pixels[base + c] = to_byte(image(x, y)[c]);
    }
  }
  write_png8(path, img);
}

ImageRGB read_image_png(const std::filesystem::path& path) {
  const Png8 img = read_png8(path);
  if (img.channels != 3) fail(path, "expected RGB PNG");
  ImageRGB out(img.width, img.height, Color::Zero());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t base = (std::size_t(y) * img.width + x) * 3;
      out(x, y) = Color(img.pixels[base] / 255.0, img.pixels[base + 1] / 255.0,
                        img.pixels[base + 2] / 255.0);
    }
  }
  return out;
}

void write_mask_png(const std::filesystem::path& path, const MaskGrid& mask) {
  Png8 img;
  img.width = mask.width();
  img.height = mask.height();
  img.channels = 1;
  img.pixels.resize(mask.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      img.pixels[std::size_t(y) * img.width + x] = mask(x, y) ? 255 : 0;
  write_png8(path, img);
}

MaskGrid read_mask_png(const std::filesystem::path& path) {
  const Png8 img = read_png8(path);
  if (img.channels != 1) fail(path, "expected gray PNG");
  MaskGrid mask(img.width, img.height, 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      mask(x, y) = img.pixels[std::size_t(y) * img.width + x] ? 1 : 0;
  return mask;
}

std::uint32_t file_crc32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "missing file");
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  char buffer[1 << 16];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0)
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buffer),
                static_cast<uInt>(in.gcount()));
  return crc;
}

std::vector<std::string> SamplePaths::all_data_files() const {
  return {image1,    image2,    flow,      depth1,     depth2,         m_conf_raw,
          m_ssim_raw, m_dc_raw, ao_raw,    m_conf_bin, m_ssim_bin,     m_dc_bin,
          occ_bin,   supervision_bin};
}

SamplePaths sample_paths(const std::string& id) {
  SamplePaths p;
  p.image1 = "images/" + id + "_img1.png";
  p.image2 = "images/" + id + "_img2.png";
  p.flow = "flow/" + id + "_flow.png";
  p.depth1 = "depth/" + id + "_depth1.fbin";
  p.depth2 = "depth/" + id + "_depth2.fbin";
  p.m_conf_raw = "masks/" + id + "_mconf.fbin";
  p.m_ssim_raw = "masks/" + id + "_mssim.fbin";
  p.m_dc_raw = "masks/" + id + "_mdc.fbin";
  p.ao_raw = "masks/" + id + "_ao.fbin";
  p.m_conf_bin = "masks/" + id + "_mconf.png";
  p.m_ssim_bin = "masks/" + id + "_mssim.png";
  p.m_dc_bin = "masks/" + id + "_mdc.png";
  p.occ_bin = "masks/" + id + "_occ.png";
  p.supervision_bin = "masks/" + id + "_supervision.png";
  p.meta = "meta/" + id + ".json";
  return p;
}

namespace {

json meta_to_json(const SampleMeta& m) {
  json floaters = json::array();
  for (const auto& f : m.floaters) floaters.push_back(detail::floater_json(f));
  json checksums = json::object();
  for (const auto& [file, crc] : m.checksums) checksums[file] = crc;
  return {{"schema_version", kSchemaVersion},
          {"id", m.id},
          {"index", m.index},
          {"seed_view1", m.seed_view1},
          {"seed_view2", m.seed_view2},
          {"seed_floaters", m.seed_floaters},
          {"camera", detail::camera_json(m.camera)},
          {"pose_1", detail::pose_json(m.pose_1)},
          {"pose_2", detail::pose_json(m.pose_2)},
          {"sampling_1", detail::sampling_json(m.sampling_1)},
          {"sampling_2", detail::sampling_json(m.sampling_2)},
          {"filter", detail::filter_json(m.filter)},
          {"floaters", floaters},
          {"counts", detail::counts_json(m.counts)},
          {"checksums", checksums}};
}

SampleMeta meta_from_json(const json& j, const std::filesystem::path& path) {
  const std::string version = j.at("schema_version").get<std::string>();
  if (version != kSchemaVersion)
    fail(path, "schema version mismatch: file has '" + version + "', expected '" +
                   std::string(kSchemaVersion) + "'");
  SampleMeta m;
  m.id = j.at("id").get<std::string>();
  m.index = j.at("index").get<int>();
  m.seed_view1 = j.at("seed_view1").get<std::uint64_t>();
  m.seed_view2 = j.at("seed_view2").get<std::uint64_t>();
  m.seed_floaters = j.at("seed_floaters").get<std::uint64_t>();
  m.camera = detail::camera_from(j.at("camera"));
  m.pose_1 = detail::pose_from(j.at("pose_1"));
  m.pose_2 = detail::pose_from(j.at("pose_2"));
  m.sampling_1 = detail::sampling_from(j.at("sampling_1"));
  m.sampling_2 = detail::sampling_from(j.at("sampling_2"));
  m.filter = detail::filter_from(j.at("filter"));
  for (const auto& f : j.at("floaters")) m.floaters.push_back(detail::floater_from(f));
  m.counts = detail::counts_from(j.at("counts"));
  for (const auto& [file, crc] : j.at("checksums").items())
    m.checksums[file] = crc.get<std::uint32_t>();
  return m;
}

}  // namespace

MaskGrid validity_from_nan(const ScalarGrid& g) {
  MaskGrid valid(g.width(), g.height(), 0);
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) valid(x, y) = std::isnan(g(x, y)) ? 0 : 1;
  return valid;
}

void write_sample_meta(const SampleMeta& meta, const std::filesystem::path& root) {
  const SamplePaths paths = sample_paths(meta.id);
  std::filesystem::create_directories(root / "meta");
  write_json_file(root / paths.meta, meta_to_json(meta));
}

SampleMeta read_sample_meta(const std::filesystem::path& root, const std::string& id) {
  const std::filesystem::path path = root / sample_paths(id).meta;
  return meta_from_json(read_json_file(path), path);
}

void write_sample(const DatasetSample& sample, const std::filesystem::path& root) {
  const SamplePaths paths = sample_paths(sample.id);
  for (const char* dir : {"images", "flow", "depth", "masks", "meta"})
    std::filesystem::create_directories(root / dir);

  write_image_png(root / paths.image1, sample.image1);
  write_image_png(root / paths.image2, sample.image2);
  write_flow_png(root / paths.flow, sample.flow);
  write_float_grid(root / paths.depth1, sample.depth1);
  write_float_grid(root / paths.depth2, sample.depth2);
  write_float_grid(root / paths.m_conf_raw, sample.m_conf);
  write_float_grid(root / paths.m_ssim_raw, sample.m_ssim);
  write_float_grid(root / paths.m_dc_raw, sample.m_dc);
  write_float_grid(root / paths.ao_raw, sample.ao);

  // Thresholded views of the raw maps (255 = measurement valid and passing).
  const FilterConfig& cfg = sample.meta.filter;
  const int w = sample.m_conf.width(), h = sample.m_conf.height();
  MaskGrid conf_bin(w, h, 0), ssim_bin(w, h, 0), dc_bin(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      conf_bin(x, y) = !std::isnan(sample.m_conf(x, y)) && sample.m_conf(x, y) < cfg.th_conf;
      ssim_bin(x, y) = !std::isnan(sample.m_ssim(x, y)) && sample.m_ssim(x, y) < cfg.th_ssim;
      dc_bin(x, y) = !std::isnan(sample.m_dc(x, y)) && sample.m_dc(x, y) < cfg.th_dc;
    }
  }
  write_mask_png(root / paths.m_conf_bin, conf_bin);
  write_mask_png(root / paths.m_ssim_bin, ssim_bin);
  write_mask_png(root / paths.m_dc_bin, dc_bin);
  write_mask_png(root / paths.occ_bin, sample.occluded);
  write_mask_png(root / paths.supervision_bin, sample.supervision);

  SampleMeta meta = sample.meta;
  meta.checksums.clear();
  for (const std::string& file : paths.all_data_files())
    meta.checksums[file] = file_crc32(root / file);
  write_sample_meta(meta, root);
}

DatasetSample read_sample(const std::filesystem::path& root, const std::string& id) {
  const SamplePaths paths = sample_paths(id);
  DatasetSample s;
  s.id = id;
  s.meta = read_sample_meta(root, id);

  for (const auto& [file, expected] : s.meta.checksums) {
    const std::uint32_t actual = file_crc32(root / file);
    if (actual != expected)
      fail(root / file, "checksum mismatch (file corrupt or modified)");
  }

  s.image1 = read_image_png(root / paths.image1);
  s.image2 = read_image_png(root / paths.image2);
  s.flow = read_flow_png(root / paths.flow);
  s.depth1 = read_float_grid(root / paths.depth1);
  s.depth2 = read_float_grid(root / paths.depth2);
  s.m_conf = read_float_grid(root / paths.m_conf_raw);
  s.m_ssim = read_float_grid(root / paths.m_ssim_raw);
  s.m_dc = read_float_grid(root / paths.m_dc_raw);
  s.ao = read_float_grid(root / paths.ao_raw);
  s.occluded = read_mask_png(root / paths.occ_bin);
  s.supervision = read_mask_png(root / paths.supervision_bin);
  return s;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& root) {
  json j = {{"schema_version", manifest.schema_version},
            {"sample_count", manifest.sample_ids.size()},
            {"samples", manifest.sample_ids}};
  std::filesystem::create_directories(root);
  write_json_file(root / "manifest.json", j);
}

Manifest read_manifest(const std::filesystem::path& root) {
  const std::filesystem::path path = root / "manifest.json";
  const json j = read_json_file(path);
  Manifest m;
  m.schema_version = j.at("schema_version").get<std::string>();
  if (m.schema_version != kSchemaVersion)
    fail(path, "schema version mismatch: file has '" + m.schema_version + "'");
  for (const auto& id : j.at("samples")) m.sample_ids.push_back(id.get<std::string>());
  return m;
}

namespace detail {
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& ctx) {
  if (!j.is_object()) throw std::runtime_error(ctx + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) {
        known = true;
        break;
      }
    if (!known) throw std::runtime_error(ctx + ": unknown key '" + key + "'");
  }
}
}  // namespace detail

}  // namespace flowforge
