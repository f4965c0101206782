#pragma once

#include <cmath>
#include <optional>

#include "flowforge/grid.hpp"

namespace flowforge {

/// Bilinear sample of a grid at continuous (x, y). Valid only when the sample
/// point lies in [0, w-1] x [0, h-1] and, if `valid` is given, all four
/// touched texels are valid. T must support a*T + b*T (double, Color).
template <typename T>
std::optional<T> bilinear_sample(const Grid<T>& g, const MaskGrid* valid, double x, double y) {
  const int w = g.width(), h = g.height();
  if (w < 2 || h < 2) return std::nullopt;
  if (!(x >= 0.0) || !(y >= 0.0) || !(x <= w - 1.0) || !(y <= h - 1.0)) return std::nullopt;

  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  if (x0 > w - 2) x0 = w - 2;
  if (y0 > h - 2) y0 = h - 2;
  const double fx = x - x0;
  const double fy = y - y0;

  if (valid) {
    if (!(*valid)(x0, y0) || !(*valid)(x0 + 1, y0) || !(*valid)(x0, y0 + 1) ||
        !(*valid)(x0 + 1, y0 + 1))
      return std::nullopt;
  }

  const T top = (1.0 - fx) * g(x0, y0) + fx * g(x0 + 1, y0);
  const T bot = (1.0 - fx) * g(x0, y0 + 1) + fx * g(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace flowforge
