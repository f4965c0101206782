#include "flowforge/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

namespace flowforge {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("png: " + what + ": " + path.string());
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 3: return PNG_COLOR_TYPE_RGB;
    default: throw std::invalid_argument("png: unsupported channel count");
  }
}

template <typename Pixel>
void write_png_impl(const std::filesystem::path& path, int width, int height, int channels,
                    int bit_depth, const Pixel* pixels) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) fail(path, "cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "encode error");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type_for(channels),
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // in-memory data is little-endian

  std::vector<png_bytep> rows(height);
  const std::size_t stride = std::size_t(width) * channels * sizeof(Pixel);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(reinterpret_cast<const png_byte*>(pixels) + y * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct PngHeader {
  int width, height, channels, bit_depth;
};

template <typename Pixel>
PngHeader read_png_impl(const std::filesystem::path& path, int want_bit_depth,
                        std::vector<Pixel>& out) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) fail(path, "cannot open for reading");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "decode error");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  PngHeader hdr;
  hdr.width = static_cast<int>(png_get_image_width(png, info));
  hdr.height = static_cast<int>(png_get_image_height(png, info));
  hdr.bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_GRAY)
    hdr.channels = 1;
  else if (color_type == PNG_COLOR_TYPE_RGB)
    hdr.channels = 3;
  else {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "unsupported color type");
  }
  if (hdr.bit_depth != want_bit_depth) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "unexpected bit depth " + std::to_string(hdr.bit_depth) + " (want " +
                   std::to_string(want_bit_depth) + ")");
  }
  if (want_bit_depth == 16) png_set_swap(png);

  out.resize(std::size_t(hdr.width) * hdr.height * hdr.channels);
  std::vector<png_bytep> rows(hdr.height);
  const std::size_t stride = std::size_t(hdr.width) * hdr.channels * sizeof(Pixel);
  for (int y = 0; y < hdr.height; ++y)
    rows[y] = reinterpret_cast<png_byte*>(out.data()) + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return hdr;
}

}  // namespace

void write_png8(const std::filesystem::path& path, const Png8& img) {
  write_png_impl(path, img.width, img.height, img.channels, 8, img.pixels.data());
}

Png8 read_png8(const std::filesystem::path& path) {
  Png8 img;
  const PngHeader hdr = read_png_impl(path, 8, img.pixels);
  img.width = hdr.width;
  img.height = hdr.height;
  img.channels = hdr.channels;
  return img;
}

void write_png16(const std::filesystem::path& path, const Png16& img) {
  write_png_impl(path, img.width, img.height, img.channels, 16, img.pixels.data());
}

Png16 read_png16(const std::filesystem::path& path) {
  Png16 img;
  const PngHeader hdr = read_png_impl(path, 16, img.pixels);
  img.width = hdr.width;
  img.height = hdr.height;
  img.channels = hdr.channels;
  return img;
}

}  // namespace flowforge
