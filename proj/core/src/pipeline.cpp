#include "flowforge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

#include "flowforge/parallel.hpp"
#include "serialize_detail.hpp"

namespace flowforge {

namespace {

using detail::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Raw maps are persisted as float32; thresholding the quantized values during
// generation makes refiltering from disk bit-exact.
void quantize_to_float(ScalarGrid& g) {
  for (double& v : g) v = static_cast<double>(static_cast<float>(v));
}

void mask_invalid_to_nan(ScalarGrid& g, const MaskGrid& valid) {
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      if (!valid(x, y)) g(x, y) = kNaN;
}

json summary_json(const GenerateReport& report) {
  json samples = json::array();
  for (const auto& s : report.samples) {
    samples.push_back({{"id", s.id},
                       {"valid_flow", s.counts.valid_flow},
                       {"pass_conf", s.counts.pass_conf},
                       {"pass_ssim", s.counts.pass_ssim},
                       {"pass_dc", s.counts.pass_dc},
                       {"supervised", s.counts.supervised},
                       {"total", s.counts.total},
                       {"retained_fraction", s.retained_fraction}});
  }
  const auto& a = report.aggregate;
  const double denom = a.total > 0 ? static_cast<double>(a.total) : 1.0;
  const double flow_denom = a.valid_flow > 0 ? static_cast<double>(a.valid_flow) : 1.0;
  return {{"schema_version", kSchemaVersion},
          {"requested", report.requested},
          {"written", report.written},
          {"samples", samples},
          {"aggregate",
           {{"valid_flow_fraction", a.valid_flow / denom},
            {"pass_conf_fraction", a.pass_conf / flow_denom},
            {"pass_ssim_fraction", a.pass_ssim / flow_denom},
            {"pass_dc_fraction", a.pass_dc / flow_denom},
            {"retained_fraction", a.supervised / denom}}}};
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  json j;
  in >> j;
  return j;
}

}  // namespace

SampleSeeds seeds_for_sample(std::uint64_t global_seed, int sample_index) {
  SampleSeeds s;
  s.view1 = derive_seed(global_seed, static_cast<std::uint64_t>(sample_index), 1);
  s.view2 = derive_seed(global_seed, static_cast<std::uint64_t>(sample_index), 2);
  s.floaters = derive_seed(global_seed, static_cast<std::uint64_t>(sample_index), 3);
  return s;
}

std::string sample_id_for_index(int index) {
  std::ostringstream s;
  s << "pair_" << std::setw(6) << std::setfill('0') << index;
  return s.str();
}

DatasetSample generate_sample(const SceneModel& scene, const Camera& camera,
                              const Pose& pose_1, const Pose& pose_2,
                              const RaySamplingConfig& sampling, const FilterConfig& filter,
                              const SampleSeeds& seeds, const std::string& id, int index,
                              int parallelism) {
  filter.validate();
  const RaySamplingConfig sampling_1 = resolve_sampling(sampling, scene, pose_1.translation);
  const RaySamplingConfig sampling_2 = resolve_sampling(sampling, scene, pose_2.translation);

  const RenderedView view1 = render_view(scene, camera, pose_1, sampling_1, seeds.view1,
                                         filter.th_low, filter.th_high, parallelism);
  const RenderedView view2 = render_view(scene, camera, pose_2, sampling_2, seeds.view2,
                                         filter.th_low, filter.th_high, parallelism);

  ReprojectionMaps maps =
      reproject(view1.midpoint_depth, view1.depth_valid, camera, pose_1, pose_2);
  attach_target_depth(maps, view2.midpoint_depth, view2.depth_valid);
  const FlowField flow = flow_from_reprojection(maps);

  OcclusionMask occ = occlusion_from_ao(scene, camera, pose_2, maps, sampling_2,
                                        filter.th_occ, parallelism);
  quantize_to_float(occ.ao_values);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x)
      occ.occluded(x, y) = occ.ao_values(x, y) >= filter.th_occ ? 1 : 0;

  const WarpResult warp = backward_warp(view2.rgb, flow);
  SsimResult ssim = ssim_mask(view1.rgb, warp.warped, warp.sampled_valid);
  RfcResult rfc = rfc_mask(view1, filter.th_low, filter.th_high);
  DcResult dc = depth_consistency_mask(maps);

  CredibilityMaps cred;
  cred.m_ssim = std::move(ssim.m_ssim);
  cred.ssim_valid = std::move(ssim.valid);
  cred.m_conf = std::move(rfc.m_conf);
  cred.conf_valid = std::move(rfc.valid);
  cred.m_dc = std::move(dc.m_dc);
  cred.dc_valid = std::move(dc.valid);
  quantize_to_float(cred.m_ssim);
  quantize_to_float(cred.m_conf);
  quantize_to_float(cred.m_dc);

  const FilterResult filtered = filter_label(flow, cred, occ, filter);
  const std::vector<Floater> floaters =
      sample_floaters(filter.n_foreground, seeds.floaters, camera.width, camera.height);
  CompositeResult comp =
      composite(view1.rgb, view2.rgb, filtered.label, occ, cred, filter, floaters);

  DatasetSample sample;
  sample.id = id;
  sample.image1 = std::move(comp.image1);
  sample.image2 = std::move(comp.image2);
  sample.flow = std::move(comp.label.flow);
  sample.supervision = std::move(comp.label.supervision);
  sample.m_conf = std::move(comp.credibility.m_conf);
  sample.m_ssim = std::move(comp.credibility.m_ssim);
  sample.m_dc = std::move(comp.credibility.m_dc);
  mask_invalid_to_nan(sample.m_conf, comp.credibility.conf_valid);
  mask_invalid_to_nan(sample.m_ssim, comp.credibility.ssim_valid);
  mask_invalid_to_nan(sample.m_dc, comp.credibility.dc_valid);
  sample.ao = std::move(comp.occlusion.ao_values);
  sample.occluded = std::move(comp.occlusion.occluded);
  sample.depth1 = view1.midpoint_depth;
  sample.depth2 = view2.midpoint_depth;

  SampleMeta& meta = sample.meta;
  meta.id = id;
  meta.index = index;
  meta.seed_view1 = seeds.view1;
  meta.seed_view2 = seeds.view2;
  meta.seed_floaters = seeds.floaters;
  meta.camera = camera;
  meta.pose_1 = pose_1;
  meta.pose_2 = pose_2;
  meta.sampling_1 = sampling_1;
  meta.sampling_2 = sampling_2;
  meta.filter = filter;
  meta.floaters = floaters;
  meta.counts = comp.counts;
  return sample;
}

GenerateReport generate_dataset(const PipelineConfig& cfg,
                                const std::filesystem::path& out_root) {
  cfg.filter.validate();
  cfg.bundle.scene.validate();
  cfg.bundle.camera.validate();
  if (out_root.empty()) throw ConfigError("generate: no output root given");
  std::filesystem::create_directories(out_root);

  const auto pairs = sample_pose_pairs(cfg.bundle.pose_pairs, cfg.bundle.scene,
                                       cfg.bundle.scene.bounds.center());
  const int count = static_cast<int>(pairs.size());

  GenerateReport report;
  report.root = out_root;
  report.requested = count;

  const int sample_workers = std::max(1, std::min(cfg.parallelism, count));
  const int row_workers = std::max(1, cfg.parallelism / sample_workers);

  std::mutex mutex;
  parallel_for(0, count, sample_workers, [&](int i) {
    const std::string id = sample_id_for_index(i);
    try {
      DatasetSample sample = generate_sample(
          cfg.bundle.scene, cfg.bundle.camera, pairs[i].first, pairs[i].second, cfg.sampling,
          cfg.filter, seeds_for_sample(cfg.seed, i), id, i, row_workers);
      write_sample(sample, out_root);
      SampleSummary summary;
      summary.id = id;
      summary.counts = sample.meta.counts;
      summary.retained_fraction =
          sample.meta.counts.total > 0
              ? static_cast<double>(sample.meta.counts.supervised) / sample.meta.counts.total
              : 0.0;
      std::lock_guard<std::mutex> lock(mutex);
      report.samples.push_back(std::move(summary));
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mutex);
      report.failures.emplace_back(id, e.what());
    }
  });

  std::sort(report.samples.begin(), report.samples.end(),
            [](const SampleSummary& a, const SampleSummary& b) { return a.id < b.id; });
  std::sort(report.failures.begin(), report.failures.end());
  report.written = static_cast<int>(report.samples.size());
  for (const auto& s : report.samples) {
    report.aggregate.total += s.counts.total;
    report.aggregate.valid_flow += s.counts.valid_flow;
    report.aggregate.pass_conf += s.counts.pass_conf;
    report.aggregate.pass_ssim += s.counts.pass_ssim;
    report.aggregate.pass_dc += s.counts.pass_dc;
    report.aggregate.supervised += s.counts.supervised;
  }

  Manifest manifest;
  for (const auto& s : report.samples) manifest.sample_ids.push_back(s.id);
  write_manifest(manifest, out_root);

  json dataset = {{"schema_version", kSchemaVersion},
                  {"seed", cfg.seed},
                  {"scene", detail::scene_bundle_json(cfg.bundle)},
                  {"sampling", detail::sampling_json(cfg.sampling)},
                  {"filter", detail::filter_json(cfg.filter)}};
  write_json_file(out_root / "dataset.json", dataset);
  write_json_file(out_root / "summary.json", summary_json(report));
  return report;
}

namespace {

struct RawSample {
  FlowField flow;
  CredibilityMaps cred;
  ScalarGrid ao;
};

RawSample load_raw_maps(const std::filesystem::path& root, const std::string& id) {
  const SamplePaths paths = sample_paths(id);
  RawSample raw;
  raw.flow = read_flow_png(root / paths.flow);
  raw.cred.m_conf = read_float_grid(root / paths.m_conf_raw);
  raw.cred.m_ssim = read_float_grid(root / paths.m_ssim_raw);
  raw.cred.m_dc = read_float_grid(root / paths.m_dc_raw);
  raw.ao = read_float_grid(root / paths.ao_raw);
  raw.cred.conf_valid = validity_from_nan(raw.cred.m_conf);
  raw.cred.ssim_valid = validity_from_nan(raw.cred.m_ssim);
  raw.cred.dc_valid = validity_from_nan(raw.cred.m_dc);
  return raw;
}

}  // namespace

FilterConfig dataset_filter_config(const std::filesystem::path& root) {
  const json dataset = load_json_file(root / "dataset.json");
  return detail::filter_from(dataset.at("filter"));
}

RefilterReport refilter_dataset(const std::filesystem::path& root, const FilterConfig& cfg) {
  cfg.validate();
  const Manifest manifest = read_manifest(root);
  RefilterReport report;

  for (const std::string& id : manifest.sample_ids) {
    const SamplePaths paths = sample_paths(id);
    RawSample raw = load_raw_maps(root, id);
    const MaskGrid old_supervision = read_mask_png(root / paths.supervision_bin);
    report.retained_before += count_set(old_supervision);

    const int w = raw.flow.width(), h = raw.flow.height();
    OcclusionMask occ;
    occ.ao_values = raw.ao;
    occ.occluded = MaskGrid(w, h, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        occ.occluded(x, y) = raw.ao(x, y) >= cfg.th_occ ? 1 : 0;

    const FilterResult filtered = filter_label(raw.flow, raw.cred, occ, cfg);
    report.retained_after += filtered.counts.supervised;

    MaskGrid conf_bin(w, h, 0), ssim_bin(w, h, 0), dc_bin(w, h, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        conf_bin(x, y) = raw.cred.conf_valid(x, y) && raw.cred.m_conf(x, y) < cfg.th_conf;
        ssim_bin(x, y) = raw.cred.ssim_valid(x, y) && raw.cred.m_ssim(x, y) < cfg.th_ssim;
        dc_bin(x, y) = raw.cred.dc_valid(x, y) && raw.cred.m_dc(x, y) < cfg.th_dc;
      }
    }
    write_mask_png(root / paths.m_conf_bin, conf_bin);
    write_mask_png(root / paths.m_ssim_bin, ssim_bin);
    write_mask_png(root / paths.m_dc_bin, dc_bin);
    write_mask_png(root / paths.occ_bin, occ.occluded);
    write_mask_png(root / paths.supervision_bin, filtered.label.supervision);

    SampleMeta meta = read_sample_meta(root, id);
    const int n_fg = meta.filter.n_foreground;
    meta.filter = cfg;
    meta.filter.n_foreground = n_fg;  // generation-time fact, not a threshold
    meta.counts = filtered.counts;
    for (const char* file : {paths.m_conf_bin.c_str(), paths.m_ssim_bin.c_str(),
                             paths.m_dc_bin.c_str(), paths.occ_bin.c_str(),
                             paths.supervision_bin.c_str()})
      meta.checksums[file] = file_crc32(root / file);
    write_sample_meta(meta, root);

    SampleSummary summary;
    summary.id = id;
    summary.counts = filtered.counts;
    summary.retained_fraction =
        filtered.counts.total > 0
            ? static_cast<double>(filtered.counts.supervised) / filtered.counts.total
            : 0.0;
    report.per_sample.push_back(std::move(summary));
    ++report.samples;
  }
  return report;
}

namespace {

std::vector<std::string> plain_dir_ids(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("eval: not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".png") ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

EvalReport evaluate_directories(const std::filesystem::path& pred,
                                const std::filesystem::path& gt, const EvalOptions& options) {
  EvalReport report;
  const bool dataset_mode = std::filesystem::exists(gt / "manifest.json");

  double epe_sum = 0.0, all_sum = 0.0, mid_sum = 0.0, s_sum = 0.0, p_sum = 0.0;
  std::int64_t pixel_sum = 0, mid_pixels = 0;
  int mid_samples = 0, zs_samples = 0;

  std::vector<std::string> missing;
  if (dataset_mode) {
    const Manifest manifest = read_manifest(gt);
    for (const std::string& id : manifest.sample_ids) {
      const SamplePaths paths = sample_paths(id);
      const std::filesystem::path pred_path = pred / (id + "_flow.png");
      if (!std::filesystem::exists(pred_path)) {
        missing.push_back(id);
        continue;
      }
      if (!missing.empty()) continue;  // already failing; just finish the scan
      const FlowField pred_flow = read_flow_png(pred_path);
      const FlowField gt_flow = read_flow_png(gt / paths.flow);
      const MaskGrid supervision = read_mask_png(gt / paths.supervision_bin);
      MaskGrid eval_mask(gt_flow.width(), gt_flow.height(), 0);
      for (int y = 0; y < gt_flow.height(); ++y)
        for (int x = 0; x < gt_flow.width(); ++x)
          eval_mask(x, y) = supervision(x, y) && gt_flow.valid(x, y);

      const FlowMetricsReport m = flow_epe_all(pred_flow, gt_flow, eval_mask, options.rule);
      epe_sum += m.fl_epe;
      all_sum += m.fl_all;
      pixel_sum += m.pixel_count;
      ++report.samples;

      // Zero-shot losses of the predicted flow against the stored image pair.
      const ImageRGB image1 = read_image_png(gt / paths.image1);
      const ImageRGB image2 = read_image_png(gt / paths.image2);
      OcclusionMask occ;
      occ.occluded = read_mask_png(gt / paths.occ_bin);
      occ.ao_values = ScalarGrid(image1.width(), image1.height(), 0.0);
      const ZeroShotLosses zs = zero_shot_losses(image1, image2, pred_flow, occ);
      s_sum += zs.s_loss;
      p_sum += zs.p_loss;
      ++zs_samples;

      // Depth-change-rate evaluation when the prediction provides tau maps.
      const std::filesystem::path tau_path = pred / "tau" / (id + ".fbin");
      if (std::filesystem::exists(tau_path)) {
        const ScalarGrid tau_pred = read_float_grid(tau_path);
        const SampleMeta meta = read_sample_meta(gt, id);
        const ScalarGrid depth1 = read_float_grid(gt / paths.depth1);
        const MaskGrid depth1_valid = validity_from_nan(depth1);
        ReprojectionMaps maps =
            reproject(depth1, depth1_valid, meta.camera, meta.pose_1, meta.pose_2);
        ScalarGrid tau_gt(depth1.width(), depth1.height(), kNaN);
        MaskGrid tau_mask(depth1.width(), depth1.height(), 0);
        for (int y = 0; y < depth1.height(); ++y) {
          for (int x = 0; x < depth1.width(); ++x) {
            if (!maps.valid(x, y) || !eval_mask(x, y)) continue;
            if (std::isnan(tau_pred(x, y))) continue;
            tau_gt(x, y) = maps.depth_in_target(x, y) / depth1(x, y);
            tau_mask(x, y) = 1;
          }
        }
        if (count_set(tau_mask) > 0) {
          const DepthRatioReport dr = mid_error(tau_pred, tau_gt, tau_mask);
          mid_sum += dr.mid_error;
          mid_pixels += dr.pixel_count;
          ++mid_samples;
        }
      }
    }
  } else {
    for (const std::string& name : plain_dir_ids(gt)) {
      const std::filesystem::path pred_path = pred / name;
      if (!std::filesystem::exists(pred_path)) {
        missing.push_back(name);
        continue;
      }
      if (!missing.empty()) continue;
      const FlowField pred_flow = read_flow_png(pred_path);
      const FlowField gt_flow = read_flow_png(gt / name);
      const FlowMetricsReport m = flow_epe_all(pred_flow, gt_flow, gt_flow.valid, options.rule);
      epe_sum += m.fl_epe;
      all_sum += m.fl_all;
      pixel_sum += m.pixel_count;
      ++report.samples;
    }
  }

  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw std::runtime_error("eval: prediction missing for: " + list);
  }
  if (report.samples == 0) throw std::runtime_error("eval: no samples to evaluate");

  report.flow.fl_epe = epe_sum / report.samples;
  report.flow.fl_all = all_sum / report.samples;
  report.flow.pixel_count = pixel_sum;
  if (mid_samples > 0)
    report.depth_ratio = DepthRatioReport{mid_sum / mid_samples, mid_pixels};
  if (zs_samples > 0) {
    ZeroShotLosses zs;
    zs.s_loss = s_sum / zs_samples;
    zs.p_loss = p_sum / zs_samples;
    report.zero_shot = zs;
  }
  return report;
}

std::string inspect_pixel(const std::filesystem::path& root, const std::string& id, int u,
                          int v) {
  const SampleMeta meta = read_sample_meta(root, id);
  const json dataset = load_json_file(root / "dataset.json");
  const SceneBundle bundle =
      detail::scene_bundle_from(dataset.at("scene"), (root / "dataset.json").string());

  if (u < 0 || u >= meta.camera.width || v < 0 || v >= meta.camera.height) {
    std::ostringstream msg;
    msg << "inspect: pixel (" << u << ", " << v << ") outside " << meta.camera.width << "x"
        << meta.camera.height << " image";
    throw std::runtime_error(msg.str());
  }

  // Re-march the frame-1 ray exactly as render_view did.
  const Vec3 dir_cam = meta.camera.pixel_direction(u, v);
  const Ray ray{meta.pose_1.translation, meta.pose_1.rotation * dir_cam};
  RngStream rng(derive_seed(meta.seed_view1,
                            static_cast<std::uint64_t>(v) * meta.camera.width + u));
  const WeightProfile profile = march_ray(bundle.scene, ray, meta.sampling_1, rng);
  const double dz = dir_cam.z();

  const SamplePaths paths = sample_paths(id);
  const ScalarGrid m_conf = read_float_grid(root / paths.m_conf_raw);
  const ScalarGrid m_ssim = read_float_grid(root / paths.m_ssim_raw);
  const ScalarGrid m_dc = read_float_grid(root / paths.m_dc_raw);
  const ScalarGrid ao = read_float_grid(root / paths.ao_raw);
  const MaskGrid occluded = read_mask_png(root / paths.occ_bin);
  const MaskGrid supervision = read_mask_png(root / paths.supervision_bin);
  const FlowField flow = read_flow_png(root / paths.flow);

  std::ostringstream out;
  out << std::setprecision(6);
  out << "sample " << id << "  pixel (" << u << ", " << v << ")\n";
  out << "ray profile (frame 1): n_intervals=" << profile.n_intervals() << "  t_range=["
      << profile.boundaries.front() << ", " << profile.boundaries.back()
      << "]  total_weight=" << profile.total_weight() << "\n";

  auto print_quantile = [&](const char* name, double q) {
    out << "  " << name << "(q=" << q << "): ";
    if (auto t = weight_quantile_depth(profile, q))
      out << "t=" << *t << "  z=" << *t * dz << "\n";
    else
      out << "invalid (total weight below " << kMinDepthWeight << ")\n";
  };
  print_quantile("t_low", meta.filter.th_low);
  print_quantile("t_mid", 0.5);
  print_quantile("t_high", meta.filter.th_high);
  if (auto e = expected_depth(profile))
    out << "  expected: t=" << *e << "  z=" << *e * dz << "\n";
  else
    out << "  expected: invalid\n";

  out << "flow: ";
  if (flow.valid(u, v))
    out << "(" << flow.u(u, v) << ", " << flow.v(u, v) << ")\n";
  else
    out << "invalid\n";
  out << "masks: m_conf=" << m_conf(u, v) << " m_ssim=" << m_ssim(u, v)
      << " m_dc=" << m_dc(u, v) << " ao=" << ao(u, v)
      << " occluded=" << (occluded(u, v) ? "yes" : "no") << "\n";

  out << "criteria:\n";
  auto criterion = [&](const char* name, double value, double th, bool bypass) {
    out << "  ";
    if (bypass) {
      out << "pass: " << name << " bypassed (occluded)\n";
    } else if (std::isnan(value)) {
      out << "fail: " << name << " invalid\n";
    } else if (value < th) {
      out << "pass: " << name << " " << value << " < " << th << "\n";
    } else {
      out << "fail: " << name << " " << value << " >= " << th << "\n";
    }
  };
  criterion("m_conf", m_conf(u, v), meta.filter.th_conf, false);
  criterion("m_ssim", m_ssim(u, v), meta.filter.th_ssim, occluded(u, v) != 0);
  criterion("m_dc", m_dc(u, v), meta.filter.th_dc, false);
  if (meta.filter.occlusion_hard_filter)
    out << "  " << (occluded(u, v) ? "fail" : "pass") << ": occlusion hard filter\n";
  out << "supervision: " << (supervision(u, v) ? "included" : "excluded") << "\n";
  return out.str();
}

}  // namespace flowforge
