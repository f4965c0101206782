#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowforge/geometry.hpp"

namespace flowforge {

/// Dense row-major 2D array addressed as (x, y), x = column (u), y = row (v).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    assert(width >= 0 && height >= 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }
  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_size(const Grid<U>& other) const {
    return same_size(other.width(), other.height());
  }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  void fill(const T& value) { data_.assign(data_.size(), value); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using MaskGrid = Grid<std::uint8_t>;  // 0 = false, 1 = true
using ScalarGrid = Grid<double>;
using ImageRGB = Grid<Color>;

inline std::int64_t count_set(const MaskGrid& m) {
  std::int64_t n = 0;
  for (auto v : m) n += (v != 0);
  return n;
}

}  // namespace flowforge
