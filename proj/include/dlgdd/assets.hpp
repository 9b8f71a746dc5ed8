#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dlgdd/image.hpp"

namespace dlgdd::ded {

// Fixed-cell bitmap font face; glyph rows are 8 bits, MSB = leftmost column.
struct BitmapFont {
  std::string name;
  int cell = 8;
  std::array<std::array<std::uint8_t, 8>, 128> glyphs{};

  bool has_glyph(char c) const {
    return c >= 32 && c < 127;
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

// WCAG relative luminance of an sRGB color, in [0,1].
double relative_luminance(Rgb c);
// Contrast ratio between the color and white.
double contrast_vs_white(Rgb c);

// Candidate figures, font faces, text corpus, and text colors used by the
// decorator. The builtin library is fully procedural and deterministic.
struct AssetLibrary {
  std::vector<Image> images;
  std::vector<BitmapFont> fonts;
  std::string corpus;  // sentence-delimited text, >= 10k chars
  std::vector<Rgb> palette;

  static AssetLibrary builtin(std::uint64_t seed = 0);
  // Loads every *.png in dir (sorted by name) as candidate images; fonts,
  // corpus, and palette stay builtin.
  static AssetLibrary load_dir(const std::string& dir,
                               std::uint64_t seed = 0);

  // Throws DataError when a library invariant is broken.
  void validate() const;
};

}  // namespace dlgdd::ded
