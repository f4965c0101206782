#include "flowforge/foreground.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowforge/rng.hpp"

namespace flowforge {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFlattenTol = 0.25;  // px

double point_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-24) return (p - a).norm();
  const double cross = ab.x() * (p - a).y() - ab.y() * (p - a).x();
  return std::abs(cross) / std::sqrt(len2);
}

void flatten_cubic(const Vec2& p0, const Vec2& c1, const Vec2& c2, const Vec2& p1,
                   int depth, std::vector<Vec2>& out) {
  if (depth >= 16 || (point_line_distance(c1, p0, p1) <= kFlattenTol &&
                      point_line_distance(c2, p0, p1) <= kFlattenTol)) {
    out.push_back(p1);
    return;
  }
  const Vec2 p01 = 0.5 * (p0 + c1), p12 = 0.5 * (c1 + c2), p23 = 0.5 * (c2 + p1);
  const Vec2 p012 = 0.5 * (p01 + p12), p123 = 0.5 * (p12 + p23);
  const Vec2 mid = 0.5 * (p012 + p123);
  flatten_cubic(p0, p01, p012, mid, depth + 1, out);
  flatten_cubic(mid, p123, p23, p1, depth + 1, out);
}

// Closed outline in pixel coordinates, flattened to <= 0.25 px deviation.
std::vector<Vec2> flatten_outline(const Floater& f, int width, int height) {
  std::vector<Vec2> poly;
  const Vec2 scale(width, height);
  for (const auto& seg : f.segments) {
    const Vec2 p0 = seg.p0.cwiseProduct(scale), c1 = seg.c1.cwiseProduct(scale);
    const Vec2 c2 = seg.c2.cwiseProduct(scale), p1 = seg.p1.cwiseProduct(scale);
    if (poly.empty()) poly.push_back(p0);
    flatten_cubic(p0, c1, c2, p1, 0, poly);
  }
  return poly;
}

MaskGrid rasterize_polygon(const std::vector<Vec2>& poly, int width, int height) {
  MaskGrid mask(width, height, 0);
  if (poly.size() < 3) return mask;
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    xs.clear();
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[i + 1];
      const bool crosses = (a.y() <= y && y < b.y()) || (b.y() <= y && y < a.y());
      if (!crosses) continue;
      xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t j = 0; j + 1 < xs.size(); j += 2) {
      const int u0 = std::max(0, static_cast<int>(std::ceil(xs[j])));
      const int u1 = std::min(width, static_cast<int>(std::ceil(xs[j + 1])));
      for (int u = u0; u < u1; ++u) mask(u, y) = 1;
    }
  }
  return mask;
}

}  // namespace

Color Floater::texture_at(const Vec2& pixel) const {
  return std::visit(
      [&](const auto& t) -> Color {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ConstantTexture>) {
          return t.rgb;
        } else {
          const double span = t.hi - t.lo;
          double s = span != 0 ? (pixel.dot(t.direction) - t.lo) / span : 0.0;
          s = std::clamp(s, 0.0, 1.0);
          return (1.0 - s) * t.rgb_a + s * t.rgb_b;
        }
      },
      texture);
}

void Floater::validate() const {
  if (segments.size() < 3 || segments.size() > 6)
    throw std::invalid_argument("floater: need 3..6 segments");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Vec2& end = segments[i].p1;
    const Vec2& next = segments[(i + 1) % segments.size()].p0;
    if (end != next) throw std::invalid_argument("floater: outline is not closed");
  }
  if (std::abs(motion.determinant()) <= 1e-9)
    throw std::invalid_argument("floater: motion homography is singular");
}

Vec2 apply_homography(const Mat3& h, const Vec2& pixel) {
  const Vec3 q = h * Vec3(pixel.x(), pixel.y(), 1.0);
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

std::vector<Floater> sample_floaters(int n, std::uint64_t seed, int width, int height) {
  if (n < 0) throw std::invalid_argument("sample_floaters: n must be >= 0");
  RngStream rng(derive_seed(seed, 0x666c6f61));  // "floa"
  const double dim = std::min(width, height);
  const double disk_radius = 0.25 * dim;

  std::vector<Floater> floaters;
  floaters.reserve(n);
  for (int f = 0; f < n; ++f) {
    const Vec2 center(rng.next_double(0.25, 0.75) * width,
                      rng.next_double(0.25, 0.75) * height);
    const int k = 3 + static_cast<int>(rng.next_below(4));
    const double shape_scale = rng.next_double(0.35, 0.75);

    // On-curve points on jittered spokes; interpolating control points stay
    // within the disk because radii are capped at 0.75 of it.
    std::vector<Vec2> pts(k);
    for (int i = 0; i < k; ++i) {
      const double angle = 2.0 * kPi * (i + 0.3 * rng.next_double(-1, 1)) / k;
      const double radius = shape_scale * disk_radius * rng.next_double(0.55, 1.0);
      pts[i] = center + radius * Vec2(std::cos(angle), std::sin(angle));
    }

    Floater fl;
    fl.depth_order = f;
    fl.segments.resize(k);
    const Vec2 inv_scale(1.0 / width, 1.0 / height);
    for (int i = 0; i < k; ++i) {
      const Vec2& prev = pts[(i + k - 1) % k];
      const Vec2& a = pts[i];
      const Vec2& b = pts[(i + 1) % k];
      const Vec2& next = pts[(i + 2) % k];
      fl.segments[i].p0 = a.cwiseProduct(inv_scale);
      fl.segments[i].c1 = (a + (b - prev) / 6.0).cwiseProduct(inv_scale);
      fl.segments[i].c2 = (b - (next - a) / 6.0).cwiseProduct(inv_scale);
      fl.segments[i].p1 = b.cwiseProduct(inv_scale);
    }

    if (rng.next_double() < 0.5) {
      fl.texture = ConstantTexture{Color(rng.next_double(0.1, 0.9), rng.next_double(0.1, 0.9),
                                         rng.next_double(0.1, 0.9))};
    } else {
      GradientTexture g;
      const double phi = rng.next_double(0, 2 * kPi);
      g.direction = Vec2(std::cos(phi), std::sin(phi));
      const double mid = center.dot(g.direction);
      g.lo = mid - shape_scale * disk_radius;
      g.hi = mid + shape_scale * disk_radius;
      g.rgb_a = Color(rng.next_double(0.1, 0.9), rng.next_double(0.1, 0.9),
                      rng.next_double(0.1, 0.9));
      g.rgb_b = Color(rng.next_double(0.1, 0.9), rng.next_double(0.1, 0.9),
                      rng.next_double(0.1, 0.9));
      fl.texture = g;
    }

    const double angle = rng.next_double(-15.0, 15.0) * kPi / 180.0;
    const double scale = rng.next_double(0.9, 1.1);
    const double shift_phi = rng.next_double(0, 2 * kPi);
    const double shift_mag = rng.next_double(0, 0.1 * dim);
    const double jitter_max = 0.1 / dim;
    const double g0 = rng.next_double(-jitter_max, jitter_max);
    const double g1 = rng.next_double(-jitter_max, jitter_max);

    Mat3 to_center = Mat3::Identity(), back = Mat3::Identity(), rot_scale = Mat3::Identity();
    Mat3 projective = Mat3::Identity();
    to_center(0, 2) = -center.x();
    to_center(1, 2) = -center.y();
    back(0, 2) = center.x() + shift_mag * std::cos(shift_phi);
    back(1, 2) = center.y() + shift_mag * std::sin(shift_phi);
    rot_scale(0, 0) = scale * std::cos(angle);
    rot_scale(0, 1) = -scale * std::sin(angle);
    rot_scale(1, 0) = scale * std::sin(angle);
    rot_scale(1, 1) = scale * std::cos(angle);
    projective(2, 0) = g0;
    projective(2, 1) = g1;
    fl.motion = back * projective * rot_scale * to_center;
    fl.validate();
    floaters.push_back(std::move(fl));
  }
  return floaters;
}

MaskGrid rasterize_floater(const Floater& floater, int width, int height) {
  return rasterize_polygon(flatten_outline(floater, width, height), width, height);
}

CompositeResult composite(const ImageRGB& image1, const ImageRGB& image2,
                          const FilteredLabel& label, const OcclusionMask& occ,
                          const CredibilityMaps& cred, const FilterConfig& cfg,
                          std::span<const Floater> floaters) {
  const int w = image1.width(), h = image1.height();
  if (!image2.same_size(image1) || !label.flow.u.same_size(image1) ||
      !occ.occluded.same_size(image1))
    throw std::invalid_argument("composite: input dimensions differ");

  CompositeResult res;
  res.image1 = image1;
  res.image2 = image2;
  res.label = label;
  res.occlusion = occ;
  res.credibility = cred;
  res.fg_mask_1 = MaskGrid(w, h, 0);
  res.fg_mask_2 = MaskGrid(w, h, 0);
  res.occlusion_update = MaskGrid(w, h, 0);

  const int n = static_cast<int>(floaters.size());
  std::vector<MaskGrid> masks1(n), masks2(n);
  std::vector<Mat3> inverse_motion(n);
  for (int f = 0; f < n; ++f) {
    floaters[f].validate();
    std::vector<Vec2> poly1 = flatten_outline(floaters[f], w, h);
    std::vector<Vec2> poly2(poly1.size());
    for (std::size_t i = 0; i < poly1.size(); ++i)
      poly2[i] = apply_homography(floaters[f].motion, poly1[i]);
    masks1[f] = rasterize_polygon(poly1, w, h);
    masks2[f] = rasterize_polygon(poly2, w, h);
    inverse_motion[f] = floaters[f].motion.inverse();
  }

  // Paint far to near so nearer floaters overwrite; track the nearest owner.
  std::vector<int> order(n);
  for (int f = 0; f < n; ++f) order[f] = f;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return floaters[a].depth_order > floaters[b].depth_order;
  });

  Grid<int> owner1(w, h, -1), owner2(w, h, -1);
  for (int f : order) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (masks1[f](x, y)) {
          owner1(x, y) = f;
          res.fg_mask_1(x, y) = 1;
        }
        if (masks2[f](x, y)) {
          owner2(x, y) = f;
          res.fg_mask_2(x, y) = 1;
        }
      }
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (owner1(x, y) >= 0) {
        const Floater& fl = floaters[owner1(x, y)];
        const Vec2 p(x, y);
        res.image1(x, y) = fl.texture_at(p);
        const Vec2 target = apply_homography(fl.motion, p);
        res.label.flow.u(x, y) = target.x() - x;
        res.label.flow.v(x, y) = target.y() - y;
        res.label.flow.valid(x, y) = 1;
        // The stamp is exact by construction: every credibility measurement
        // reads as perfect so refiltering reproduces the override.
        res.credibility.m_conf(x, y) = 0.0;
        res.credibility.m_ssim(x, y) = 0.0;
        res.credibility.m_dc(x, y) = 0.0;
        res.credibility.conf_valid(x, y) = 1;
        res.credibility.ssim_valid(x, y) = 1;
        res.credibility.dc_valid(x, y) = 1;
        res.occlusion.ao_values(x, y) = 0.0;
        res.occlusion.occluded(x, y) = 0;
      }
      if (owner2(x, y) >= 0) {
        const Vec2 pre = apply_homography(inverse_motion[owner2(x, y)], Vec2(x, y));
        res.image2(x, y) = floaters[owner2(x, y)].texture_at(pre);
      }
    }
  }

  // A pixel whose flow target hides behind a strictly nearer frame-2 floater
  // is occluded (its label stays geometrically correct).
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!res.label.flow.valid(x, y)) continue;
      const int own_order =
          owner1(x, y) >= 0 ? floaters[owner1(x, y)].depth_order : std::numeric_limits<int>::max();
      const int tx = static_cast<int>(std::lround(x + res.label.flow.u(x, y)));
      const int ty = static_cast<int>(std::lround(y + res.label.flow.v(x, y)));
      if (tx < 0 || tx >= w || ty < 0 || ty >= h) continue;
      const int cover = owner2(tx, ty);
      if (cover >= 0 && floaters[cover].depth_order < own_order) {
        // An opaque floater in front makes the occlusion certain; writing
        // ao = 1 keeps occluded == (ao >= th_occ) reconstructible from the
        // persisted raw map under any threshold.
        res.occlusion.occluded(x, y) = 1;
        res.occlusion.ao_values(x, y) = 1.0;
        res.occlusion_update(x, y) = 1;
      }
    }
  }

  FilterResult filtered = filter_label(res.label.flow, res.credibility, res.occlusion, cfg);
  res.label.supervision = std::move(filtered.label.supervision);
  res.counts = filtered.counts;
  return res;
}

}  // namespace flowforge
