#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace flowforge {

/// Interleaved 8-bit image, `channels` in {1, 3}.
struct Png8 {
  int width = 0, height = 0, channels = 1;
  std::vector<std::uint8_t> pixels;
};

/// Interleaved 16-bit image, `channels` in {1, 3}.
struct Png16 {
  int width = 0, height = 0, channels = 1;
  std::vector<std::uint16_t> pixels;
};

void write_png8(const std::filesystem::path& path, const Png8& img);
Png8 read_png8(const std::filesystem::path& path);

void write_png16(const std::filesystem::path& path, const Png16& img);
/// Throws when the file is not a 16-bit PNG (bit depth is part of the format
/// contract, not something to silently widen).
Png16 read_png16(const std::filesystem::path& path);

}  // namespace flowforge
