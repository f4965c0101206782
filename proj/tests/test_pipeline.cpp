#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "flowforge/config.hpp"
#include "flowforge/dataio.hpp"
#include "flowforge/pipeline.hpp"
#include "testutil.hpp"

using namespace flowforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("flowforge_pipe_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

// Pipeline + scene config pair on disk; small enough for test budgets.
PipelineConfig test_config(const TempDir& dir, int pairs, int n_intervals, int width,
                           int height, std::uint64_t seed, int parallelism = 2,
                           int n_foreground = 2) {
  SceneBundle bundle = fftest::slab_sphere_bundle(width, height, pairs, 404);
  write_text(dir.path / "scene.json", scene_config_to_string(bundle));
  std::ostringstream cfg;
  cfg << "{\n"
      << "  \"scene_config\": \"scene.json\",\n"
      << "  \"sampling\": {\"t_near\": 1.0, \"t_far\": 11.0, \"n_intervals\": " << n_intervals
      << ", \"stratified\": true},\n"
      << "  \"n_foreground\": " << n_foreground << ",\n"
      << "  \"seed\": " << seed << ",\n"
      << "  \"parallelism\": " << parallelism << "\n"
      << "}\n";
  write_text(dir.path / "pipeline.json", cfg.str());
  return load_pipeline_config(dir.path / "pipeline.json");
}

std::map<std::string, std::uint32_t> tree_checksums(const fs::path& root) {
  std::map<std::string, std::uint32_t> sums;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    sums[fs::relative(entry.path(), root).string()] = file_crc32(entry.path());
  }
  return sums;
}

}  // namespace

TEST_CASE("pipeline config: loading, defaults, error paths") {
  TempDir dir;
  const PipelineConfig cfg = test_config(dir, 2, 32, 32, 24, 7);
  CHECK(cfg.seed == 7);
  CHECK(cfg.sampling.n_intervals == 32);
  CHECK(cfg.filter.th_conf == 0.3);
  CHECK(cfg.filter.th_ssim == 0.1);
  CHECK(cfg.filter.th_dc == 0.01);
  CHECK(cfg.filter.th_occ == 0.3);
  CHECK(cfg.filter.n_foreground == 2);
  CHECK(cfg.bundle.camera.width == 32);

  SUBCASE("missing seed is a config error") {
    write_text(dir.path / "bad.json", R"({"scene_config": "scene.json"})");
    CHECK_THROWS_AS(load_pipeline_config(dir.path / "bad.json"), ConfigError);
  }
  SUBCASE("unknown keys are rejected") {
    write_text(dir.path / "bad.json",
               R"({"scene_config": "scene.json", "seed": 1, "typo": true})");
    CHECK_THROWS_AS(load_pipeline_config(dir.path / "bad.json"), ConfigError);
  }
  SUBCASE("missing scene file is a config error") {
    write_text(dir.path / "bad.json", R"({"scene_config": "nope.json", "seed": 1})");
    CHECK_THROWS_AS(load_pipeline_config(dir.path / "bad.json"), ConfigError);
  }
}

TEST_CASE("generate_dataset: manifest, summary, and recount agreement") {
  TempDir dir;
  const PipelineConfig cfg = test_config(dir, 3, 64, 48, 32, 21);
  TempDir out;
  const GenerateReport report = generate_dataset(cfg, out.path);
  CHECK(report.requested == 3);
  CHECK(report.written == 3);
  CHECK(report.failures.empty());

  const Manifest manifest = read_manifest(out.path);
  REQUIRE(manifest.sample_ids.size() == 3);
  CHECK(std::is_sorted(manifest.sample_ids.begin(), manifest.sample_ids.end()));

  // summary retained fractions equal an independent recount from the files
  for (const auto& s : report.samples) {
    const MaskGrid supervision =
        read_mask_png(out.path / sample_paths(s.id).supervision_bin);
    CHECK(s.counts.supervised == count_set(supervision));
    CHECK(s.retained_fraction ==
          doctest::Approx(double(count_set(supervision)) / supervision.size()).epsilon(1e-12));
  }
  CHECK(fs::exists(out.path / "dataset.json"));
  CHECK(fs::exists(out.path / "summary.json"));
}

TEST_CASE("generate_dataset: fixed seed reproduces byte-identical trees") {
  TempDir dir;
  TempDir out_a, out_b;
  // different parallelism on purpose: the schedule must not leak into output
  const PipelineConfig cfg_a = test_config(dir, 4, 96, 48, 32, 99, 3);
  generate_dataset(cfg_a, out_a.path);
  const PipelineConfig cfg_b = test_config(dir, 4, 96, 48, 32, 99, 1);
  generate_dataset(cfg_b, out_b.path);

  const auto sums_a = tree_checksums(out_a.path);
  const auto sums_b = tree_checksums(out_b.path);
  REQUIRE(sums_a.size() == sums_b.size());
  for (const auto& [rel, crc] : sums_a) {
    INFO(rel);
    auto it = sums_b.find(rel);
    REQUIRE(it != sums_b.end());
    CHECK(it->second == crc);
  }

  // a different seed must not reproduce the tree
  TempDir out_c;
  const PipelineConfig cfg_c = test_config(dir, 4, 96, 48, 32, 100, 2);
  generate_dataset(cfg_c, out_c.path);
  CHECK(tree_checksums(out_c.path) != sums_a);
}

TEST_CASE("generated supervision passes an independent recheck of every criterion") {
  TempDir dir;
  TempDir out;
  const PipelineConfig cfg = test_config(dir, 2, 128, 64, 48, 5);
  const GenerateReport report = generate_dataset(cfg, out.path);
  REQUIRE(report.written == 2);

  for (const auto& id : read_manifest(out.path).sample_ids) {
    const DatasetSample s = read_sample(out.path, id);
    std::int64_t supervised = 0;
    for (int y = 0; y < s.supervision.height(); ++y) {
      for (int x = 0; x < s.supervision.width(); ++x) {
        if (!s.supervision(x, y)) continue;
        ++supervised;
        CHECK(s.flow.valid(x, y) == 1);
        CHECK(!std::isnan(s.m_conf(x, y)));
        CHECK(s.m_conf(x, y) < 0.3);
        CHECK(!std::isnan(s.m_dc(x, y)));
        CHECK(s.m_dc(x, y) < 0.01);
        if (!s.occluded(x, y)) {
          CHECK(!std::isnan(s.m_ssim(x, y)));
          CHECK(s.m_ssim(x, y) < 0.1);
        }
      }
    }
    CHECK(supervised > 0);
  }
}

TEST_CASE("n_foreground = 0 keeps the dataset purely static") {
  TempDir dir;
  TempDir out;
  const PipelineConfig cfg = test_config(dir, 1, 64, 48, 32, 15, 2, /*n_foreground=*/0);
  CHECK(cfg.filter.n_foreground == 0);
  generate_dataset(cfg, out.path);
  const DatasetSample s = read_sample(out.path, "pair_000000");
  CHECK(s.meta.floaters.empty());
  // every supervised pixel re-passes the full rule (no floater overrides exist)
  for (int y = 0; y < s.supervision.height(); ++y)
    for (int x = 0; x < s.supervision.width(); ++x)
      if (s.supervision(x, y)) {
        CHECK(s.m_conf(x, y) < 0.3);
        CHECK(s.m_dc(x, y) < 0.01);
        if (!s.occluded(x, y)) CHECK(s.m_ssim(x, y) < 0.1);
      }
}

TEST_CASE("refilter: defaults are a no-op, tightening is monotone, 1.0 is vacuous") {
  TempDir dir;
  TempDir out;
  const PipelineConfig cfg = test_config(dir, 2, 64, 48, 32, 33);
  generate_dataset(cfg, out.path);

  const auto supervision_of = [&](const std::string& id) {
    return read_mask_png(out.path / sample_paths(id).supervision_bin);
  };
  const MaskGrid before_0 = supervision_of("pair_000000");
  const MaskGrid before_1 = supervision_of("pair_000001");

  SUBCASE("identical thresholds reproduce identical supervision masks") {
    const FilterConfig same = dataset_filter_config(out.path);
    const RefilterReport r = refilter_dataset(out.path, same);
    CHECK(r.retained_before == r.retained_after);
    const MaskGrid after_0 = supervision_of("pair_000000");
    for (int y = 0; y < after_0.height(); ++y)
      for (int x = 0; x < after_0.width(); ++x) CHECK(after_0(x, y) == before_0(x, y));
  }
  SUBCASE("tightening th_dc never grows the retained set") {
    FilterConfig tight = dataset_filter_config(out.path);
    tight.th_dc = 0.001;
    const RefilterReport r = refilter_dataset(out.path, tight);
    CHECK(r.retained_after <= r.retained_before);
    const MaskGrid after_1 = supervision_of("pair_000001");
    for (int y = 0; y < after_1.height(); ++y)
      for (int x = 0; x < after_1.width(); ++x)
        if (after_1(x, y)) CHECK(before_1(x, y) == 1);
  }
  SUBCASE("all-vacuous thresholds reduce supervision to flow validity") {
    FilterConfig vacuous = dataset_filter_config(out.path);
    vacuous.th_conf = vacuous.th_ssim = vacuous.th_dc = vacuous.th_occ = 1.0;
    refilter_dataset(out.path, vacuous);
    const FlowField flow = read_flow_png(out.path / sample_paths("pair_000000").flow);
    const MaskGrid after = supervision_of("pair_000000");
    for (int y = 0; y < after.height(); ++y)
      for (int x = 0; x < after.width(); ++x) CHECK(after(x, y) == flow.valid(x, y));
  }
  SUBCASE("missing raw masks fail loudly") {
    fs::remove(out.path / sample_paths("pair_000000").m_conf_raw);
    CHECK_THROWS(refilter_dataset(out.path, dataset_filter_config(out.path)));
  }
}

TEST_CASE("evaluate_directories: dataset mode with perfect predictions") {
  TempDir dir;
  TempDir out;
  const PipelineConfig cfg = test_config(dir, 2, 64, 48, 32, 77);
  generate_dataset(cfg, out.path);

  TempDir pred;
  for (const auto& id : read_manifest(out.path).sample_ids)
    fs::copy_file(out.path / sample_paths(id).flow, pred.path / (id + "_flow.png"));

  const EvalReport report = evaluate_directories(pred.path, out.path, EvalOptions{});
  CHECK(report.samples == 2);
  CHECK(report.flow.fl_epe == 0.0);
  CHECK(report.flow.fl_all == 0.0);
  REQUIRE(report.zero_shot.has_value());
  CHECK(report.zero_shot->s_loss >= 0.0);

  SUBCASE("a missing prediction is an error naming the id") {
    fs::remove(pred.path / "pair_000001_flow.png");
    CHECK_THROWS_WITH_AS(evaluate_directories(pred.path, out.path, EvalOptions{}),
                         doctest::Contains("pair_000001"), std::runtime_error);
  }
  SUBCASE("tau maps produce a mid_error report") {
    // tau == ground-truth ratio everywhere -> mid_error 0
    for (const auto& id : read_manifest(out.path).sample_ids) {
      const SampleMeta meta = read_sample_meta(out.path, id);
      const ScalarGrid depth1 = read_float_grid(out.path / sample_paths(id).depth1);
      const MaskGrid depth1_valid = validity_from_nan(depth1);
      ReprojectionMaps maps =
          reproject(depth1, depth1_valid, meta.camera, meta.pose_1, meta.pose_2);
      ScalarGrid tau(depth1.width(), depth1.height(),
                     std::numeric_limits<double>::quiet_NaN());
      for (int y = 0; y < depth1.height(); ++y)
        for (int x = 0; x < depth1.width(); ++x)
          if (maps.valid(x, y)) tau(x, y) = maps.depth_in_target(x, y) / depth1(x, y);
      fs::create_directories(pred.path / "tau");
      write_float_grid(pred.path / "tau" / (id + ".fbin"), tau);
    }
    const EvalReport with_tau = evaluate_directories(pred.path, out.path, EvalOptions{});
    REQUIRE(with_tau.depth_ratio.has_value());
    CHECK(with_tau.depth_ratio->mid_error < 1.0);  // float quantization only
  }
}

TEST_CASE("evaluate_directories: plain-dir mode, +1 px on 50 px flow") {
  TempDir gt_dir, pred_dir;
  FlowField gt(16, 12);
  gt.u.fill(50.0);
  gt.valid.fill(1);
  write_flow_png(gt_dir.path / "a_flow.png", gt);
  FlowField pred = gt;
  pred.u.fill(51.0);
  write_flow_png(pred_dir.path / "a_flow.png", pred);

  const EvalReport report = evaluate_directories(pred_dir.path, gt_dir.path, EvalOptions{});
  CHECK(report.samples == 1);
  CHECK(report.flow.fl_epe == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.flow.fl_all == 0.0);
  CHECK_FALSE(report.zero_shot.has_value());
}

TEST_CASE("inspect_pixel: criterion lines and bounds checking") {
  TempDir dir;
  TempDir out;
  const PipelineConfig cfg = test_config(dir, 1, 64, 48, 32, 55);
  generate_dataset(cfg, out.path);

  // find a supervised pixel and an excluded one
  const DatasetSample s = read_sample(out.path, "pair_000000");
  int sx = -1, sy = -1, fx = -1, fy = -1;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x) {
      if (s.supervision(x, y) && sx < 0) {
        sx = x;
        sy = y;
      }
      if (!s.supervision(x, y) && s.flow.valid(x, y) && fx < 0) {
        fx = x;
        fy = y;
      }
    }
  REQUIRE(sx >= 0);

  const std::string good = inspect_pixel(out.path, "pair_000000",  sx, sy);
  CHECK(good.find("supervision: included") != std::string::npos);
  CHECK(good.find("fail:") == std::string::npos);
  CHECK(good.find("total_weight") != std::string::npos);

  if (fx >= 0) {
    const std::string bad = inspect_pixel(out.path, "pair_000000", fx, fy);
    CHECK(bad.find("supervision: excluded") != std::string::npos);
  }

  CHECK_THROWS_WITH_AS(inspect_pixel(out.path, "pair_000000", 480, 2),
                       doctest::Contains("outside"), std::runtime_error);
  CHECK_THROWS(inspect_pixel(out.path, "pair_999999", 1, 1));
}

TEST_CASE("a 200-pair run yields a 200-entry manifest") {
  TempDir dir;
  TempDir out;
  SceneBundle bundle = fftest::slab_sphere_bundle(24, 16, 200, 2025);
  write_text(dir.path / "scene.json", scene_config_to_string(bundle));
  write_text(dir.path / "pipeline.json",
             R"({"scene_config": "scene.json",
                 "sampling": {"t_near": 1.0, "t_far": 11.0, "n_intervals": 24},
                 "seed": 9, "parallelism": 4})");
  const PipelineConfig cfg = load_pipeline_config(dir.path / "pipeline.json");
  const GenerateReport report = generate_dataset(cfg, out.path);
  CHECK(report.written == 200);
  CHECK(read_manifest(out.path).sample_ids.size() == 200);
}
