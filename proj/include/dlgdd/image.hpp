#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dlgdd {

// Interleaved 8-bit raster, row-major. channels is 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  static Image make(int w, int h, int channels, std::uint8_t fill = 0);
  std::uint8_t& at(int x, int y, int c);
  std::uint8_t at(int x, int y, int c) const;
  bool operator==(const Image&) const = default;
};

void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

std::uint32_t crc32_bytes(const std::uint8_t* data, std::size_t len);
std::uint32_t crc32_file(const std::string& path);

// Nearest-neighbour rescale (deterministic, used for the fallback crop path).
Image resize_nearest(const Image& src, int w, int h);

// Exact box-filter downscale of a single-channel view of src (RGB is
// converted via Rec.709 luminance) to w x h doubles in [0,1].
std::vector<double> area_average_gray(const Image& src, int w, int h);

}  // namespace dlgdd
