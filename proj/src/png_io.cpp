#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include "uap/dataio.hpp"

namespace uap {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageTensor read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw std::runtime_error("missing file: " + path.string());

  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error("invalid image: " + path.string());
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("invalid image: " + path.string());
  }

  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("invalid image: " + path.string());
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize to 8-bit gray or RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 height = png_get_image_height(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_byte color = png_get_color_type(png, info);
  const int channels =
      color == PNG_COLOR_TYPE_GRAY ? 1 : (color == PNG_COLOR_TYPE_RGB ? 3 : 0);
  if (channels == 0 || height == 0 || width == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("invalid image: " + path.string());
  }

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<png_byte> pixels(static_cast<std::size_t>(height) * stride);
  row_ptrs.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) row_ptrs[r] = &pixels[r * stride];
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageTensor out{{static_cast<int>(height), static_cast<int>(width), channels},
                  std::vector<double>(pixels.size())};
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    out.data[i] = static_cast<double>(pixels[i]) / 255.0;
  }
  return out;
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
  if (image.shape.channels != 1 && image.shape.channels != 3) {
    throw std::invalid_argument("unsupported channel count: " +
                                std::to_string(image.shape.channels));
  }
  if (image.data.size() != static_cast<std::size_t>(image.shape.count())) {
    throw std::invalid_argument("shape mismatch");
  }

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write file: " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("cannot write file: " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("cannot write file: " + path.string());
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.shape.width),
               static_cast<png_uint_32>(image.shape.height), 8,
               image.shape.channels == 1 ? PNG_COLOR_TYPE_GRAY
                                         : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t stride =
      static_cast<std::size_t>(image.shape.width) * image.shape.channels;
  std::vector<png_byte> row(stride);
  for (int r = 0; r < image.shape.height; ++r) {
    for (std::size_t j = 0; j < stride; ++j) {
      const double v = std::clamp(image.data[r * stride + j], 0.0, 1.0);
      row[j] = static_cast<png_byte>(std::lround(v * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace uap
