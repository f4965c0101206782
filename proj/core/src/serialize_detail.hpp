#pragma once

// JSON serializers shared by dataio / config / pipeline. Internal: keeps the
// JSON dependency out of public headers.

#include <json.hpp>

#include <stdexcept>
#include <string>

#include "flowforge/config.hpp"
#include "flowforge/dataio.hpp"
#include "flowforge/foreground.hpp"
#include "flowforge/masks.hpp"
#include "flowforge/render.hpp"
#include "flowforge/scene.hpp"

namespace flowforge::detail {

using nlohmann::json;

inline json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec2 vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("expected 2-element array");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}
inline Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json mat3_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}
inline Mat3 mat3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw std::runtime_error("expected 3x3 matrix");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline json camera_json(const Camera& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
          {"width", c.width}, {"height", c.height}};
}
inline Camera camera_from(const json& j) {
  Camera c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  return c;
}

inline json pose_json(const Pose& p) {
  return {{"rotation", mat3_json(p.rotation)}, {"translation", vec3_json(p.translation)}};
}
inline Pose pose_from(const json& j) {
  Pose p;
  p.rotation = mat3_from(j.at("rotation"));
  p.translation = vec3_from(j.at("translation"));
  return p;
}

inline json sampling_json(const RaySamplingConfig& s) {
  return {{"t_near", s.t_near}, {"t_far", s.t_far}, {"n_intervals", s.n_intervals},
          {"stratified", s.stratified}};
}
inline RaySamplingConfig sampling_from(const json& j) {
  RaySamplingConfig s;
  s.t_near = j.at("t_near").get<double>();
  s.t_far = j.at("t_far").get<double>();
  s.n_intervals = j.at("n_intervals").get<int>();
  s.stratified = j.at("stratified").get<bool>();
  return s;
}

inline json filter_json(const FilterConfig& f) {
  return {{"th_conf", f.th_conf}, {"th_ssim", f.th_ssim}, {"th_dc", f.th_dc},
          {"th_occ", f.th_occ},   {"th_low", f.th_low},   {"th_high", f.th_high},
          {"n_foreground", f.n_foreground},
          {"occlusion_hard_filter", f.occlusion_hard_filter}};
}
inline FilterConfig filter_from(const json& j) {
  FilterConfig f;
  f.th_conf = j.at("th_conf").get<double>();
  f.th_ssim = j.at("th_ssim").get<double>();
  f.th_dc = j.at("th_dc").get<double>();
  f.th_occ = j.at("th_occ").get<double>();
  f.th_low = j.at("th_low").get<double>();
  f.th_high = j.at("th_high").get<double>();
  f.n_foreground = j.at("n_foreground").get<int>();
  f.occlusion_hard_filter = j.at("occlusion_hard_filter").get<bool>();
  return f;
}

inline json counts_json(const FilterCounts& c) {
  return {{"total", c.total},         {"valid_flow", c.valid_flow},
          {"pass_conf", c.pass_conf}, {"pass_ssim", c.pass_ssim},
          {"pass_dc", c.pass_dc},     {"supervised", c.supervised}};
}
inline FilterCounts counts_from(const json& j) {
  FilterCounts c;
  c.total = j.at("total").get<std::int64_t>();
  c.valid_flow = j.at("valid_flow").get<std::int64_t>();
  c.pass_conf = j.at("pass_conf").get<std::int64_t>();
  c.pass_ssim = j.at("pass_ssim").get<std::int64_t>();
  c.pass_dc = j.at("pass_dc").get<std::int64_t>();
  c.supervised = j.at("supervised").get<std::int64_t>();
  return c;
}

inline json floater_json(const Floater& f) {
  json segs = json::array();
  for (const auto& s : f.segments)
    segs.push_back({{"p0", vec2_json(s.p0)}, {"c1", vec2_json(s.c1)},
                    {"c2", vec2_json(s.c2)}, {"p1", vec2_json(s.p1)}});
  json tex;
  if (const auto* c = std::get_if<ConstantTexture>(&f.texture)) {
    tex = {{"type", "constant"}, {"rgb", vec3_json(c->rgb)}};
  } else {
    const auto& g = std::get<GradientTexture>(f.texture);
    tex = {{"type", "gradient"},      {"direction", vec2_json(g.direction)},
           {"lo", g.lo},              {"hi", g.hi},
           {"rgb_a", vec3_json(g.rgb_a)}, {"rgb_b", vec3_json(g.rgb_b)}};
  }
  return {{"segments", segs}, {"texture", tex}, {"motion", mat3_json(f.motion)},
          {"depth_order", f.depth_order}};
}
inline Floater floater_from(const json& j) {
  Floater f;
  for (const auto& s : j.at("segments")) {
    BezierSegment seg;
    seg.p0 = vec2_from(s.at("p0"));
    seg.c1 = vec2_from(s.at("c1"));
    seg.c2 = vec2_from(s.at("c2"));
    seg.p1 = vec2_from(s.at("p1"));
    f.segments.push_back(seg);
  }
  const json& tex = j.at("texture");
  const std::string type = tex.at("type").get<std::string>();
  if (type == "constant") {
    f.texture = ConstantTexture{vec3_from(tex.at("rgb"))};
  } else if (type == "gradient") {
    GradientTexture g;
    g.direction = vec2_from(tex.at("direction"));
    g.lo = tex.at("lo").get<double>();
    g.hi = tex.at("hi").get<double>();
    g.rgb_a = vec3_from(tex.at("rgb_a"));
    g.rgb_b = vec3_from(tex.at("rgb_b"));
    f.texture = g;
  } else {
    throw std::runtime_error("unknown floater texture type: " + type);
  }
  f.motion = mat3_from(j.at("motion"));
  f.depth_order = j.at("depth_order").get<int>();
  return f;
}

/// Rejects JSON objects carrying keys outside `allowed`; `ctx` names the
/// object in the error.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& ctx);

/// Scene config schema, shared between scene config files and the scene
/// bundle embedded in dataset.json.
json scene_bundle_json(const SceneBundle& bundle);
SceneBundle scene_bundle_from(const json& j, const std::string& ctx);

}  // namespace flowforge::detail
