#include "resdehaze/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace resdehaze {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void io_fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("png: " + what + ": " + path);
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

}  // namespace

Tensor<float> read_png_rgb8(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) io_fail(path, "cannot open for reading");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) io_fail(path, "png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) io_fail(path, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) io_fail(path, "corrupt or truncated image");
  png_init_io(r.png, fp.get());
  png_read_info(r.png, r.info);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  const int bit_depth = png_get_bit_depth(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);

  // normalize whatever arrives into 8-bit RGB
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (bit_depth < 8) png_set_expand(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) {
    png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
  }
  png_read_update_info(r.png, r.info);

  std::vector<png_byte> row(3 * w);
  Tensor<float> img(3, static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img(c, static_cast<int>(y), static_cast<int>(x)) =
            static_cast<float>(row[3 * x + c]) / 255.0f;
  }
  png_read_end(r.png, nullptr);
  return img;
}

void write_png_rgb8(const std::string& path, const Tensor<float>& img) {
  require(img.c() == 3, "write_png_rgb8: expected a 3-channel image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) io_fail(path, "cannot open for writing");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) io_fail(path, "png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) io_fail(path, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) io_fail(path, "write failed");
  png_init_io(wr.png, fp.get());
  png_set_compression_level(wr.png, 6);
  png_set_IHDR(wr.png, wr.info, img.w(), img.h(), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);

  std::vector<png_byte> row(3 * img.w());
  for (int y = 0; y < img.h(); ++y) {
    for (int x = 0; x < img.w(); ++x)
      for (int c = 0; c < 3; ++c) {
        float v = img(c, y, x);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        row[3 * x + c] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    png_write_row(wr.png, row.data());
  }
  png_write_end(wr.png, nullptr);
}

Tensor<float> read_png_gray16(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) io_fail(path, "cannot open for reading");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) io_fail(path, "png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) io_fail(path, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) io_fail(path, "corrupt or truncated image");
  png_init_io(r.png, fp.get());
  png_read_info(r.png, r.info);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(r.png, r.info) != 16)
    io_fail(path, "expected 16-bit grayscale");
  png_read_update_info(r.png, r.info);

  std::vector<png_byte> row(2 * w);
  Tensor<float> map(1, static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      // network byte order (big endian)
      const unsigned v = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
      map(0, static_cast<int>(y), static_cast<int>(x)) =
          static_cast<float>(v) / 65535.0f;
    }
  }
  png_read_end(r.png, nullptr);
  return map;
}

void write_png_gray16(const std::string& path, const Tensor<float>& map) {
  require(map.c() == 1, "write_png_gray16: expected a 1-channel map");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) io_fail(path, "cannot open for writing");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) io_fail(path, "png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) io_fail(path, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) io_fail(path, "write failed");
  png_init_io(wr.png, fp.get());
  png_set_compression_level(wr.png, 6);
  png_set_IHDR(wr.png, wr.info, map.w(), map.h(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);

  std::vector<png_byte> row(2 * map.w());
  for (int y = 0; y < map.h(); ++y) {
    for (int x = 0; x < map.w(); ++x) {
      float v = map(0, y, x);
      v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      const unsigned q = static_cast<unsigned>(std::lround(v * 65535.0f));
      row[2 * x] = static_cast<png_byte>(q >> 8);
      row[2 * x + 1] = static_cast<png_byte>(q & 0xff);
    }
    png_write_row(wr.png, row.data());
  }
  png_write_end(wr.png, nullptr);
}

}  // namespace resdehaze
