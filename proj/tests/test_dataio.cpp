#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

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
           ("flowforge_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

FlowField random_flow(int w, int h, std::uint64_t seed, double max_mag = 500.0) {
  FlowField flow(w, h);
  RngStream rng(seed);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      flow.u(x, y) = rng.next_double(-max_mag, max_mag);
      flow.v(x, y) = rng.next_double(-max_mag, max_mag);
      flow.valid(x, y) = rng.next_double() < 0.9;
    }
  }
  return flow;
}

}  // namespace

TEST_CASE("flow codec: offset identity and fixed-point examples") {
  FlowField flow(2, 1);
  flow.valid(0, 0) = 1;  // f = 0
  flow.u(1, 0) = 1.0;
  flow.v(1, 0) = 2.0;
  flow.valid(1, 0) = 0;  // invalid, values ignored

  const Png16 img = encode_flow_png(flow);
  CHECK(img.pixels[0] == 32768);
  CHECK(img.pixels[1] == 32768);
  CHECK(img.pixels[2] == 1);
  CHECK(img.pixels[3] == 0);  // invalid -> (0, 0, 0)
  CHECK(img.pixels[4] == 0);
  CHECK(img.pixels[5] == 0);

  flow.valid(1, 0) = 1;
  const Png16 img2 = encode_flow_png(flow);
  CHECK(img2.pixels[3] == 32832);  // 64 * 1 + 32768

  Png16 manual;
  manual.width = 1;
  manual.height = 1;
  manual.channels = 3;
  manual.pixels = {32896, 32768, 1};
  const FlowField decoded = decode_flow_png(manual);
  CHECK(decoded.u(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(decoded.v(0, 0) == 0.0);
}

TEST_CASE("flow codec: round trip is exact to 1/64 px incl. extremes") {
  for (int trial = 0; trial < 50; ++trial) {
    FlowField flow = random_flow(16, 12, 1000 + trial);
    flow.u(0, 0) = 511.9;
    flow.v(0, 0) = -511.9;
    flow.valid(0, 0) = 1;
    const FlowField back = decode_flow_png(encode_flow_png(flow));
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 16; ++x) {
        CHECK(back.valid(x, y) == flow.valid(x, y));
        if (!flow.valid(x, y)) continue;
        CHECK(std::abs(back.u(x, y) - flow.u(x, y)) <= 0.5 / 64.0 + 1e-12);
        CHECK(std::abs(back.v(x, y) - flow.v(x, y)) <= 0.5 / 64.0 + 1e-12);
        // quantized values re-encode exactly
        const FlowField twice = decode_flow_png(encode_flow_png(back));
        CHECK(twice.u(x, y) == back.u(x, y));
        CHECK(twice.v(x, y) == back.v(x, y));
      }
    }
  }
}

TEST_CASE("flow codec: out-of-range error names the pixel") {
  FlowField flow(4, 3);
  flow.u(2, 1) = 600.0;
  flow.valid(2, 1) = 1;
  CHECK_THROWS_WITH_AS(encode_flow_png(flow),
                       doctest::Contains("(2, 1)"), std::runtime_error);
}

TEST_CASE("flow codec: wrong channel count is a format error") {
  Png16 img;
  img.width = 2;
  img.height = 2;
  img.channels = 1;
  img.pixels.assign(4, 0);
  CHECK_THROWS(decode_flow_png(img));
}

TEST_CASE("flow png file: all-zero image decodes as all-invalid") {
  TempDir tmp;
  Png16 zeros;
  zeros.width = 6;
  zeros.height = 4;
  zeros.channels = 3;
  zeros.pixels.assign(6 * 4 * 3, 0);
  write_png16(tmp.path / "z.png", zeros);
  const FlowField flow = read_flow_png(tmp.path / "z.png");
  CHECK(count_set(flow.valid) == 0);
}

TEST_CASE("png16 read rejects 8-bit files") {
  TempDir tmp;
  Png8 img;
  img.width = 3;
  img.height = 2;
  img.channels = 3;
  img.pixels.assign(18, 7);
  write_png8(tmp.path / "x.png", img);
  CHECK_THROWS_WITH_AS(read_png16(tmp.path / "x.png"), doctest::Contains("bit depth"),
                       std::runtime_error);
}

TEST_CASE("float grid: bit-exact round trip including NaN") {
  TempDir tmp;
  ScalarGrid g(7, 5, 0.0);
  RngStream rng(9);
  for (double& v : g) v = rng.next_double(-100, 100);
  g(3, 2) = std::numeric_limits<double>::quiet_NaN();
  write_float_grid(tmp.path / "g.fbin", g);
  const ScalarGrid back = read_float_grid(tmp.path / "g.fbin");
  REQUIRE(back.same_size(g));
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      const float expect = static_cast<float>(g(x, y));
      const float got = static_cast<float>(back(x, y));
      CHECK(std::memcmp(&expect, &got, sizeof(float)) == 0);
    }
  }
  // second write of the read-back grid is byte-identical
  write_float_grid(tmp.path / "g2.fbin", back);
  CHECK(file_crc32(tmp.path / "g.fbin") == file_crc32(tmp.path / "g2.fbin"));
}

TEST_CASE("image png round trip within 8-bit quantization") {
  TempDir tmp;
  ImageRGB img(9, 6, Color::Zero());
  RngStream rng(13);
  for (auto& c : img) c = Color(rng.next_double(), rng.next_double(), rng.next_double());
  write_image_png(tmp.path / "i.png", img);
  const ImageRGB back = read_image_png(tmp.path / "i.png");
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 9; ++x)
      CHECK((back(x, y) - img(x, y)).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("write_sample / read_sample: lossless round trip with checksums") {
  TempDir tmp;
  const SceneBundle bundle = fftest::slab_sphere_bundle(32, 24, 1, 42);
  const auto pairs =
      sample_pose_pairs(bundle.pose_pairs, bundle.scene, bundle.scene.bounds.center());
  RaySamplingConfig sampling = fftest::tight_sampling(128);
  FilterConfig filter;
  const DatasetSample sample =
      generate_sample(bundle.scene, bundle.camera, pairs[0].first, pairs[0].second, sampling,
                      filter, seeds_for_sample(7, 0), "pair_000000", 0);
  write_sample(sample, tmp.path);

  const DatasetSample back = read_sample(tmp.path, "pair_000000");
  CHECK(back.meta.index == 0);
  CHECK(back.meta.seed_view1 == sample.meta.seed_view1);
  CHECK(back.meta.camera.fx == sample.meta.camera.fx);
  CHECK(back.meta.pose_1.rotation == sample.meta.pose_1.rotation);
  CHECK(back.meta.floaters.size() == sample.meta.floaters.size());
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x) {
      CHECK(back.supervision(x, y) == sample.supervision(x, y));
      CHECK(back.occluded(x, y) == sample.occluded(x, y));
      // raw maps are float32 quantized before thresholding, so they persist exactly
      CHECK((std::isnan(back.m_conf(x, y)) && std::isnan(sample.m_conf(x, y))) ||
            back.m_conf(x, y) == sample.m_conf(x, y));
      if (sample.flow.valid(x, y)) {
        CHECK(std::abs(back.flow.u(x, y) - sample.flow.u(x, y)) <= 1.0 / 64.0);
      }
    }
  }

  // writing the re-read sample elsewhere reproduces the data files byte for byte
  TempDir tmp2;
  DatasetSample copy = back;
  write_sample(copy, tmp2.path);
  for (const std::string& rel : sample_paths("pair_000000").all_data_files()) {
    INFO(rel);
    CHECK(file_crc32(tmp.path / rel) == file_crc32(tmp2.path / rel));
  }
}

TEST_CASE("read_sample: missing file and corruption are reported") {
  TempDir tmp;
  const SceneBundle bundle = fftest::slab_sphere_bundle(24, 16, 1, 43);
  const auto pairs =
      sample_pose_pairs(bundle.pose_pairs, bundle.scene, bundle.scene.bounds.center());
  const DatasetSample sample = generate_sample(
      bundle.scene, bundle.camera, pairs[0].first, pairs[0].second,
      fftest::tight_sampling(64), FilterConfig{}, seeds_for_sample(3, 0), "pair_000000", 0);
  write_sample(sample, tmp.path);

  SUBCASE("missing mask file names the path") {
    fs::remove(tmp.path / "masks/pair_000000_mdc.fbin");
    CHECK_THROWS_WITH_AS(read_sample(tmp.path, "pair_000000"),
                         doctest::Contains("pair_000000_mdc.fbin"), std::runtime_error);
  }
  SUBCASE("corrupted file fails the checksum") {
    std::ofstream f(tmp.path / "depth/pair_000000_depth1.fbin",
                    std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(32);
    f.put('\xff');
    f.close();
    CHECK_THROWS_WITH_AS(read_sample(tmp.path, "pair_000000"),
                         doctest::Contains("checksum"), std::runtime_error);
  }
  SUBCASE("schema version mismatch is rejected") {
    auto meta_path = tmp.path / "meta/pair_000000.json";
    std::ifstream in(meta_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find(kSchemaVersion);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string(kSchemaVersion).size(), "flowforge.dataset.v0");
    std::ofstream out(meta_path, std::ios::trunc);
    out << text;
    out.close();
    CHECK_THROWS_WITH_AS(read_sample(tmp.path, "pair_000000"),
                         doctest::Contains("schema version"), std::runtime_error);
  }
}

TEST_CASE("manifest round trip") {
  TempDir tmp;
  Manifest m;
  m.sample_ids = {"pair_000000", "pair_000001", "pair_000002"};
  write_manifest(m, tmp.path);
  const Manifest back = read_manifest(tmp.path);
  CHECK(back.schema_version == kSchemaVersion);
  CHECK(back.sample_ids == m.sample_ids);
}
