#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "blindsr/errors.hpp"
#include "blindsr/image.hpp"

namespace blindsr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const Index w = png_get_image_width(png, info);
  const Index h = png_get_image_height(png, info);
  const Index c = png_get_channels(png, info);
  if (c != 1 && c != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported channel count in " + path.string());
  }
  std::vector<png_byte> buffer(static_cast<std::size_t>(w * h * c));
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (Index y = 0; y < h; ++y) rows[y] = buffer.data() + y * w * c;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image image(h, w, c);
  for (Index i = 0; i < image.size(); ++i) image.pixels[i] = buffer[i] / 255.0;
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed for " + path.string());
  }
  std::vector<png_byte> buffer(static_cast<std::size_t>(image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (Index y = 0; y < image.height; ++y) rows[y] = buffer.data() + y * image.width * image.channels;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace blindsr
