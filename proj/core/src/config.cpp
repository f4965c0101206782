#include "flowforge/config.hpp"

#include <fstream>

#include "serialize_detail.hpp"

namespace flowforge {

namespace {

using detail::json;
using detail::reject_unknown_keys;

json parse_json(const std::string& text, const std::string& ctx) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(ctx + ": malformed JSON (" + e.what() + ")");
  }
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_json(text, path.string());
}

Color color_from(const json& j, const std::string& ctx) {
  const Vec3 c = detail::vec3_from(j);
  if ((c.array() < 0).any() || (c.array() > 1).any())
    throw ConfigError(ctx + ": color components must lie in [0,1]");
  return c;
}

ColorFn color_fn_from(const json& j, const std::string& ctx) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") {
    reject_unknown_keys(j, {"type", "rgb"}, ctx);
    return ConstantColor{color_from(j.at("rgb"), ctx)};
  }
  if (type == "checkerboard") {
    reject_unknown_keys(j, {"type", "scale", "rgb_a", "rgb_b"}, ctx);
    CheckerColor c;
    c.scale = j.at("scale").get<double>();
    c.rgb_a = color_from(j.at("rgb_a"), ctx);
    c.rgb_b = color_from(j.at("rgb_b"), ctx);
    return c;
  }
  if (type == "gradient") {
    reject_unknown_keys(j, {"type", "direction", "range", "rgb_a", "rgb_b"}, ctx);
    GradientColor g;
    g.direction = detail::vec3_from(j.at("direction")).normalized();
    const json& range = j.at("range");
    if (!range.is_array() || range.size() != 2)
      throw ConfigError(ctx + ": gradient range must be [lo, hi]");
    g.range_lo = range[0].get<double>();
    g.range_hi = range[1].get<double>();
    g.rgb_a = color_from(j.at("rgb_a"), ctx);
    g.rgb_b = color_from(j.at("rgb_b"), ctx);
    return g;
  }
  throw ConfigError(ctx + ": unknown color type '" + type + "'");
}

json color_fn_json(const ColorFn& fn) {
  if (const auto* c = std::get_if<ConstantColor>(&fn))
    return {{"type", "constant"}, {"rgb", detail::vec3_json(c->rgb)}};
  if (const auto* c = std::get_if<CheckerColor>(&fn))
    return {{"type", "checkerboard"}, {"scale", c->scale},
            {"rgb_a", detail::vec3_json(c->rgb_a)}, {"rgb_b", detail::vec3_json(c->rgb_b)}};
  const auto& g = std::get<GradientColor>(fn);
  return {{"type", "gradient"},
          {"direction", detail::vec3_json(g.direction)},
          {"range", json::array({g.range_lo, g.range_hi})},
          {"rgb_a", detail::vec3_json(g.rgb_a)},
          {"rgb_b", detail::vec3_json(g.rgb_b)}};
}

VolumePrimitive primitive_from(const json& j, const std::string& ctx) {
  VolumePrimitive p;
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "sphere") {
    reject_unknown_keys(j, {"shape", "center", "radius", "density", "color"}, ctx);
    SphereShape s;
    s.center = detail::vec3_from(j.at("center"));
    s.radius = j.at("radius").get<double>();
    p.shape = s;
  } else if (shape == "box") {
    reject_unknown_keys(j, {"shape", "min", "max", "density", "color"}, ctx);
    BoxShape b;
    b.min = detail::vec3_from(j.at("min"));
    b.max = detail::vec3_from(j.at("max"));
    p.shape = b;
  } else if (shape == "slab") {
    reject_unknown_keys(j, {"shape", "normal", "offset", "thickness", "density", "color"}, ctx);
    SlabShape s;
    s.normal = detail::vec3_from(j.at("normal")).normalized();
    s.offset = j.at("offset").get<double>();
    s.thickness = j.at("thickness").get<double>();
    p.shape = s;
  } else {
    throw ConfigError(ctx + ": unknown shape '" + shape + "'");
  }
  p.density = j.at("density").get<double>();
  p.color = color_fn_from(j.at("color"), ctx + ".color");
  return p;
}

json primitive_json(const VolumePrimitive& p) {
  json j;
  if (const auto* s = std::get_if<SphereShape>(&p.shape)) {
    j["shape"] = "sphere";
    j["center"] = detail::vec3_json(s->center);
    j["radius"] = s->radius;
  } else if (const auto* b = std::get_if<BoxShape>(&p.shape)) {
    j["shape"] = "box";
    j["min"] = detail::vec3_json(b->min);
    j["max"] = detail::vec3_json(b->max);
  } else {
    const auto& s = std::get<SlabShape>(p.shape);
    j["shape"] = "slab";
    j["normal"] = detail::vec3_json(s.normal);
    j["offset"] = s.offset;
    j["thickness"] = s.thickness;
  }
  j["density"] = p.density;
  j["color"] = color_fn_json(p.color);
  return j;
}

PosePairSpec pose_pairs_from(const json& j, const std::string& ctx) {
  reject_unknown_keys(j,
                      {"count", "orbit_radius_range", "elevation_range", "baseline_max",
                       "rotation_jitter_max", "seed"},
                      ctx);
  PosePairSpec spec;
  spec.count = j.at("count").get<int>();
  const json& radius = j.at("orbit_radius_range");
  const json& elev = j.at("elevation_range");
  if (!radius.is_array() || radius.size() != 2 || !elev.is_array() || elev.size() != 2)
    throw ConfigError(ctx + ": ranges must be [min, max]");
  spec.orbit_radius_min = radius[0].get<double>();
  spec.orbit_radius_max = radius[1].get<double>();
  spec.elevation_min = elev[0].get<double>();
  spec.elevation_max = elev[1].get<double>();
  spec.baseline_max = j.at("baseline_max").get<double>();
  spec.rotation_jitter_max = j.value("rotation_jitter_max", 0.0);
  if (!j.contains("seed")) throw ConfigError(ctx + ": seed is mandatory");
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

}  // namespace

SceneBundle parse_scene_config(const std::string& json_text, const std::string& context) {
  const json j = parse_json(json_text, context);
  return detail::scene_bundle_from(j, context);
}

SceneBundle load_scene_config(const std::filesystem::path& path) {
  return detail::scene_bundle_from(load_json_file(path), path.string());
}

std::string scene_config_to_string(const SceneBundle& bundle) {
  return detail::scene_bundle_json(bundle).dump(2) + "\n";
}

namespace detail {

json scene_bundle_json(const SceneBundle& b) {
  json prims = json::array();
  for (const auto& p : b.scene.primitives) prims.push_back(primitive_json(p));
  return {{"bounds", {{"min", vec3_json(b.scene.bounds.min)}, {"max", vec3_json(b.scene.bounds.max)}}},
          {"background_color", vec3_json(b.scene.background_color)},
          {"primitives", prims},
          {"camera", camera_json(b.camera)},
          {"pose_pairs",
           {{"count", b.pose_pairs.count},
            {"orbit_radius_range", json::array({b.pose_pairs.orbit_radius_min, b.pose_pairs.orbit_radius_max})},
            {"elevation_range", json::array({b.pose_pairs.elevation_min, b.pose_pairs.elevation_max})},
            {"baseline_max", b.pose_pairs.baseline_max},
            {"rotation_jitter_max", b.pose_pairs.rotation_jitter_max},
            {"seed", b.pose_pairs.seed}}}};
}

SceneBundle scene_bundle_from(const json& j, const std::string& ctx) {
  try {
    reject_unknown_keys(j, {"bounds", "background_color", "primitives", "camera", "pose_pairs"},
                        ctx);
    SceneBundle b;
    const json& bounds = j.at("bounds");
    reject_unknown_keys(bounds, {"min", "max"}, ctx + ".bounds");
    b.scene.bounds.min = vec3_from(bounds.at("min"));
    b.scene.bounds.max = vec3_from(bounds.at("max"));
    b.scene.background_color = color_from(j.at("background_color"), ctx + ".background_color");
    int index = 0;
    for (const auto& p : j.at("primitives"))
      b.scene.primitives.push_back(
          primitive_from(p, ctx + ".primitives[" + std::to_string(index++) + "]"));

    const json& cam = j.at("camera");
    reject_unknown_keys(cam, {"fx", "fy", "cx", "cy", "width", "height"}, ctx + ".camera");
    b.camera = camera_from(cam);
    b.pose_pairs = pose_pairs_from(j.at("pose_pairs"), ctx + ".pose_pairs");

    b.scene.validate();
    b.camera.validate();
    b.pose_pairs.validate();
    return b;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

}  // namespace detail

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  const std::string ctx = path.string();
  try {
    reject_unknown_keys(
        j, {"scene_config", "out_root", "sampling", "filter", "n_foreground", "seed", "parallelism"},
        ctx);
    PipelineConfig cfg;

    if (!j.contains("seed")) throw ConfigError(ctx + ": seed is mandatory (no implicit entropy)");
    cfg.seed = j.at("seed").get<std::uint64_t>();

    cfg.scene_config_path = j.at("scene_config").get<std::string>();
    if (cfg.scene_config_path.is_relative())
      cfg.scene_config_path = path.parent_path() / cfg.scene_config_path;
    if (j.contains("out_root")) cfg.output_root = j.at("out_root").get<std::string>();

    cfg.sampling.stratified = true;  // pipeline default; plain struct default is false
    if (j.contains("sampling")) {
      const json& s = j.at("sampling");
      reject_unknown_keys(s, {"t_near", "t_far", "n_intervals", "stratified"}, ctx + ".sampling");
      cfg.sampling.t_near = s.value("t_near", 0.0);
      cfg.sampling.t_far = s.value("t_far", 0.0);
      cfg.sampling.n_intervals = s.value("n_intervals", 256);
      cfg.sampling.stratified = s.value("stratified", true);
    }
    if (j.contains("filter")) {
      const json& f = j.at("filter");
      reject_unknown_keys(f,
                          {"th_conf", "th_ssim", "th_dc", "th_occ", "th_low", "th_high",
                           "occlusion_hard_filter"},
                          ctx + ".filter");
      cfg.filter.th_conf = f.value("th_conf", cfg.filter.th_conf);
      cfg.filter.th_ssim = f.value("th_ssim", cfg.filter.th_ssim);
      cfg.filter.th_dc = f.value("th_dc", cfg.filter.th_dc);
      cfg.filter.th_occ = f.value("th_occ", cfg.filter.th_occ);
      cfg.filter.th_low = f.value("th_low", cfg.filter.th_low);
      cfg.filter.th_high = f.value("th_high", cfg.filter.th_high);
      cfg.filter.occlusion_hard_filter =
          f.value("occlusion_hard_filter", cfg.filter.occlusion_hard_filter);
    }
    cfg.filter.n_foreground = j.value("n_foreground", cfg.filter.n_foreground);
    cfg.parallelism = j.value("parallelism", 1);
    if (cfg.parallelism < 1) throw ConfigError(ctx + ": parallelism must be >= 1");

    cfg.filter.validate();
    if (cfg.sampling.t_far > cfg.sampling.t_near) cfg.sampling.validate();
    if (cfg.sampling.n_intervals < 2) throw ConfigError(ctx + ": n_intervals must be >= 2");

    cfg.bundle = load_scene_config(cfg.scene_config_path);
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

}  // namespace flowforge
