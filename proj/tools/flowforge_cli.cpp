// flowforge command line: generate / refilter / eval / inspect.
// Exit codes: 0 success, 1 partial or runtime failure, 2 config error.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "flowforge/config.hpp"
#include "flowforge/pipeline.hpp"

namespace {

using namespace flowforge;

int run_generate(const std::string& config_path, const std::string& out_dir) {
  PipelineConfig cfg = load_pipeline_config(config_path);
  std::filesystem::path out = out_dir.empty() ? cfg.output_root : std::filesystem::path(out_dir);
  if (out.empty()) throw ConfigError("generate: pass --out or set out_root in the config");

  const GenerateReport report = generate_dataset(cfg, out);
  std::printf("wrote %d/%d samples to %s\n", report.written, report.requested,
              report.root.string().c_str());
  std::printf("%-12s %10s %10s %10s %10s %10s\n", "sample", "valid", "conf", "ssim", "dc",
              "retained");
  for (const auto& s : report.samples) {
    std::printf("%-12s %10lld %10lld %10lld %10lld   %8.4f\n", s.id.c_str(),
                static_cast<long long>(s.counts.valid_flow),
                static_cast<long long>(s.counts.pass_conf),
                static_cast<long long>(s.counts.pass_ssim),
                static_cast<long long>(s.counts.pass_dc), s.retained_fraction);
  }
  const auto& a = report.aggregate;
  if (a.total > 0)
    std::printf("aggregate retained fraction: %.4f (%lld px of %lld)\n",
                static_cast<double>(a.supervised) / a.total,
                static_cast<long long>(a.supervised), static_cast<long long>(a.total));
  for (const auto& [id, error] : report.failures)
    std::fprintf(stderr, "FAILED %s: %s\n", id.c_str(), error.c_str());
  return report.failures.empty() ? 0 : 1;
}

int run_refilter(const std::string& root, double th_conf, double th_ssim, double th_dc,
                 double th_occ) {
  FilterConfig cfg = dataset_filter_config(root);
  if (th_conf > 0) cfg.th_conf = th_conf;
  if (th_ssim > 0) cfg.th_ssim = th_ssim;
  if (th_dc > 0) cfg.th_dc = th_dc;
  if (th_occ > 0) cfg.th_occ = th_occ;

  const RefilterReport report = refilter_dataset(root, cfg);
  std::printf("refiltered %d samples  (th_conf=%g th_ssim=%g th_dc=%g th_occ=%g)\n",
              report.samples, cfg.th_conf, cfg.th_ssim, cfg.th_dc, cfg.th_occ);
  std::printf("retained pixels: %lld -> %lld (%+lld)\n",
              static_cast<long long>(report.retained_before),
              static_cast<long long>(report.retained_after),
              static_cast<long long>(report.retained_after - report.retained_before));
  return 0;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& rule) {
  EvalOptions options;
  if (rule == "and")
    options.rule = OutlierRule::kKittiAnd;
  else if (rule == "or")
    options.rule = OutlierRule::kOr;
  else
    throw ConfigError("eval: --fl-all-rule must be 'and' or 'or'");

  const EvalReport report = evaluate_directories(pred, gt, options);
  std::printf("samples      %d\n", report.samples);
  std::printf("fl_epe       %.4f px\n", report.flow.fl_epe);
  std::printf("fl_all       %.4f %%\n", report.flow.fl_all);
  if (report.depth_ratio) std::printf("mid_error    %.4f\n", report.depth_ratio->mid_error);
  if (report.zero_shot) {
    std::printf("s_loss       %.4f\n", report.zero_shot->s_loss);
    std::printf("p_loss       %.4f\n", report.zero_shot->p_loss);
  }
  return 0;
}

int run_inspect(const std::string& root, const std::string& sample, const std::string& pixel) {
  const auto comma = pixel.find(',');
  if (comma == std::string::npos) throw ConfigError("inspect: --pixel expects 'u,v'");
  int u = 0, v = 0;
  try {
    u = std::stoi(pixel.substr(0, comma));
    v = std::stoi(pixel.substr(comma + 1));
  } catch (const std::exception&) {
    throw ConfigError("inspect: --pixel expects 'u,v' with integer coordinates");
  }
  std::cout << inspect_pixel(root, sample, u, v);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowforge: volumetric-scene optical-flow label factory"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* generate = app.add_subcommand("generate", "render pose pairs and write a dataset");
  generate->add_option("--config", config_path, "pipeline config JSON")->required();
  generate->add_option("--out", out_dir, "output dataset root");

  std::string root;
  double th_conf = -1, th_ssim = -1, th_dc = -1, th_occ = -1;
  auto* refilter = app.add_subcommand("refilter", "re-threshold stored raw masks");
  refilter->add_option("--root", root, "dataset root")->required();
  refilter->add_option("--th-conf", th_conf, "RFC threshold");
  refilter->add_option("--th-ssim", th_ssim, "SSIM threshold");
  refilter->add_option("--th-dc", th_dc, "depth consistency threshold");
  refilter->add_option("--th-occ", th_occ, "occlusion AO threshold");

  std::string pred_dir, gt_dir, rule = "and";
  auto* eval = app.add_subcommand("eval", "score predicted flow against ground truth");
  eval->add_option("--pred", pred_dir, "directory of predicted flow PNGs")->required();
  eval->add_option("--gt", gt_dir, "dataset root or directory of flow PNGs")->required();
  eval->add_option("--fl-all-rule", rule, "outlier rule: and (KITTI devkit) | or");

  std::string sample_id, pixel;
  auto* inspect = app.add_subcommand("inspect", "per-ray diagnostics for one pixel");
  inspect->add_option("--root", root, "dataset root")->required();
  inspect->add_option("--sample", sample_id, "sample id")->required();
  inspect->add_option("--pixel", pixel, "pixel as u,v")->required();

  try {
    app.parse(argc, argv);
    if (generate->parsed()) return run_generate(config_path, out_dir);
    if (refilter->parsed()) return run_refilter(root, th_conf, th_ssim, th_dc, th_occ);
    if (eval->parsed()) return run_eval(pred_dir, gt_dir, rule);
    if (inspect->parsed()) return run_inspect(root, sample_id, pixel);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const flowforge::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
