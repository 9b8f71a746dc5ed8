#include "dlgdd/image.hpp"

#include <png.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "dlgdd/common.hpp"

namespace dlgdd {

Image Image::make(int w, int h, int channels, std::uint8_t fill) {
  if (w <= 0 || h <= 0 || (channels != 1 && channels != 3)) {
    throw UsageError("Image::make: bad dimensions");
  }
  Image img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(w) * h * channels, fill);
  return img;
}

std::uint8_t& Image::at(int x, int y, int c) {
  return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
}
std::uint8_t Image::at(int x, int y, int c) const {
  return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_png(const Image& img, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open '" + path + "' for writing");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png write failed for '" + path + "'");
  }
  png_init_io(png, fp.get());
  int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(img.data.data() + y * stride);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image '" + path + "'");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png read failed for '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_uint_32 w, h;
  int depth, color;
  png_get_IHDR(png, info, &w, &h, &depth, &color, nullptr, nullptr, nullptr);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("image '" + path + "': unsupported channel count");
  }
  Image img = Image::make(static_cast<int>(w), static_cast<int>(h), channels);
  std::vector<png_bytep> rows(h);
  std::size_t stride = static_cast<std::size_t>(img.width) * channels;
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::uint32_t crc32_bytes(const std::uint8_t* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data),
              static_cast<uInt>(len)));
}

std::uint32_t crc32_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for checksum");
  std::uint32_t crc = static_cast<std::uint32_t>(::crc32(0L, Z_NULL, 0));
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    std::streamsize got = f.gcount();
    if (got > 0) {
      crc = static_cast<std::uint32_t>(
          ::crc32(crc, reinterpret_cast<const Bytef*>(buf),
                  static_cast<uInt>(got)));
    }
  }
  return crc;
}

Image resize_nearest(const Image& src, int w, int h) {
  Image out = Image::make(w, h, src.channels);
  for (int y = 0; y < h; ++y) {
    int sy = static_cast<int>((static_cast<std::int64_t>(y) * src.height) / h);
    for (int x = 0; x < w; ++x) {
      int sx = static_cast<int>((static_cast<std::int64_t>(x) * src.width) / w);
      for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

std::vector<double> area_average_gray(const Image& src, int w, int h) {
  std::vector<double> gray(static_cast<std::size_t>(src.width) * src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double v;
      if (src.channels == 1) {
        v = src.at(x, y, 0);
      } else {
        v = 0.2126 * src.at(x, y, 0) + 0.7152 * src.at(x, y, 1) +
            0.0722 * src.at(x, y, 2);
      }
      gray[static_cast<std::size_t>(y) * src.width + x] = v / 255.0;
    }
  }
  // Exact area average: each output cell integrates the overlapping source
  // pixels with fractional edge weights.
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  double sx = static_cast<double>(src.width) / w;
  double sy = static_cast<double>(src.height) / h;
  for (int oy = 0; oy < h; ++oy) {
    double y0 = oy * sy, y1 = (oy + 1) * sy;
    int iy0 = static_cast<int>(std::floor(y0));
    int iy1 = std::min(src.height, static_cast<int>(std::ceil(y1)));
    for (int ox = 0; ox < w; ++ox) {
      double x0 = ox * sx, x1 = (ox + 1) * sx;
      int ix0 = static_cast<int>(std::floor(x0));
      int ix1 = std::min(src.width, static_cast<int>(std::ceil(x1)));
      double acc = 0.0;
      for (int y = iy0; y < iy1; ++y) {
        double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        for (int x = ix0; x < ix1; ++x) {
          double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          acc += wy * wx * gray[static_cast<std::size_t>(y) * src.width + x];
        }
      }
      out[static_cast<std::size_t>(oy) * w + ox] = acc / (sx * sy);
    }
  }
  return out;
}

}  // namespace dlgdd
