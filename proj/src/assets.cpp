#include "dlgdd/assets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "dlgdd/common.hpp"

namespace dlgdd::ded {

double relative_luminance(Rgb c) {
  auto lin = [](std::uint8_t v) {
    double s = v / 255.0;
    return s <= 0.03928 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  return 0.2126 * lin(c.r) + 0.7152 * lin(c.g) + 0.0722 * lin(c.b);
}

double contrast_vs_white(Rgb c) {
  return 1.05 / (relative_luminance(c) + 0.05);
}

namespace {

// Stroke-composed glyphs: not a real typeface, but deterministic shapes
// with per-character identity that read as text texture at small sizes.
std::array<std::uint8_t, 8> make_glyph(char c, std::uint64_t salt) {
  std::array<std::uint8_t, 8> rows{};
  if (c == ' ') return rows;
  std::uint64_t h = splitmix64(salt * 1315423911ULL +
                               static_cast<std::uint64_t>(c) * 2654435761ULL);
  bool lowercase = c >= 'a' && c <= 'z';
  int top = lowercase ? 3 : 1;
  int bottom = 7;
  auto bit = [&](int i) { return (h >> i) & 1ULL; };
  auto set_px = [&](int x, int y) {
    if (x >= 0 && x < 8 && y >= 0 && y < 8)
      rows[static_cast<std::size_t>(y)] |= static_cast<std::uint8_t>(0x80 >> x);
  };
  auto vline = [&](int x) {
    for (int y = top; y < bottom; ++y) set_px(x, y);
  };
  auto hline = [&](int y) {
    for (int x = 0; x < 6; ++x) set_px(x, y);
  };
  int strokes = 0;
  if (bit(0)) { vline(0); ++strokes; }
  if (bit(1)) { vline(5); ++strokes; }
  if (bit(2)) { hline(top); ++strokes; }
  if (bit(3)) { hline(bottom - 1); ++strokes; }
  if (bit(4)) { hline((top + bottom) / 2); ++strokes; }
  if (bit(5)) {  // diagonal
    int span = bottom - top;
    for (int i = 0; i < span; ++i)
      set_px(bit(6) ? i * 5 / std::max(1, span - 1)
                    : 5 - i * 5 / std::max(1, span - 1),
             top + i);
    ++strokes;
  }
  if (strokes < 2) {
    vline(2);
    hline((top + bottom) / 2);
  }
  // Punctuation is drawn small regardless of the stroke draw.
  if (!std::isalnum(static_cast<unsigned char>(c))) {
    rows.fill(0);
    set_px(2, 6);
    if (bit(7)) set_px(2, 4);
    if (c == '-' || c == '=') {
      rows.fill(0);
      hline(4);
    }
  }
  return rows;
}

BitmapFont make_font(const std::string& name, std::uint64_t salt, bool bold) {
  BitmapFont f;
  f.name = name;
  for (int c = 32; c < 127; ++c) {
    auto g = make_glyph(static_cast<char>(c), salt);
    if (bold) {
      for (auto& row : g)
        row = static_cast<std::uint8_t>(row | (row >> 1));
    }
    f.glyphs[static_cast<std::size_t>(c)] = g;
  }
  return f;
}

const char* kSentences[] = {
    "The archive room smelled of dust and old paper.",
    "Every shelf held ledgers that nobody had opened in years.",
    "A narrow window let in a strip of pale morning light.",
    "She traced the column of figures with a careful finger.",
    "The press in the basement started its slow clatter at dawn.",
    "Fresh ink has a sharpness that fades within the hour.",
    "He sorted the plates by size and leaned them against the wall.",
    "Rain tapped on the skylight while the binder stitched quires.",
    "The apprentice learned to fold sheets without creasing the margins.",
    "Type metal is heavier than it looks and colder than it should be.",
    "A good margin gives the eye a place to rest.",
    "They argued for an hour about the width of the gutter.",
    "The proofreader kept a jar of red pencils sharpened to needles.",
    "Nothing in the shop moved faster than a rumor about overtime.",
    "By afternoon the galleys were stacked like roof tiles.",
    "The foreman counted signatures twice and still came up short.",
    "Paper curls toward the coated side when the air is dry.",
    "An em is a measure of patience as much as of width.",
    "The old map on the wall had gone brown at the folds.",
    "Deliveries arrived wrapped in kraft and tied with twine.",
    "Someone had pencilled a grid on the back of a spoiled sheet.",
    "The ledger closed with a thump that raised a little cloud.",
    "Lamplight made the wet ink glitter like a beetle's back.",
    "He kept the best brayer locked in the bottom drawer.",
    "A crooked headline will ruin a straight story.",
    "The cutting bar dropped with a sound like a full stop.",
    "Offcuts collected in the corner until the sweeper came.",
    "She matched the swatches against the window light twice.",
    "Numbers ran down the page in tidy grey battalions.",
    "At closing time the machines ticked as they cooled.",
};

std::string make_corpus(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "corpus"));
  std::size_t count = sizeof(kSentences) / sizeof(kSentences[0]);
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  std::string out;
  while (out.size() < 12000) {
    out += kSentences[pick(rng)];
    out += ' ';
  }
  return out;
}

Image make_candidate_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u8(0, 255);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Image img = Image::make(w, h, 3);
  // Diagonal two-color gradient background.
  Rgb a{static_cast<std::uint8_t>(u8(rng)), static_cast<std::uint8_t>(u8(rng)),
        static_cast<std::uint8_t>(u8(rng))};
  Rgb b{static_cast<std::uint8_t>(u8(rng)), static_cast<std::uint8_t>(u8(rng)),
        static_cast<std::uint8_t>(u8(rng))};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double t = (static_cast<double>(x) / w + static_cast<double>(y) / h) / 2;
      img.at(x, y, 0) = static_cast<std::uint8_t>(a.r + t * (b.r - a.r));
      img.at(x, y, 1) = static_cast<std::uint8_t>(a.g + t * (b.g - a.g));
      img.at(x, y, 2) = static_cast<std::uint8_t>(a.b + t * (b.b - a.b));
    }
  }
  // Scattered filled rectangles and ellipses.
  int shapes = 3 + static_cast<int>(u01(rng) * 6);
  for (int s = 0; s < shapes; ++s) {
    Rgb c{static_cast<std::uint8_t>(u8(rng)), static_cast<std::uint8_t>(u8(rng)),
          static_cast<std::uint8_t>(u8(rng))};
    int cw = std::max(2, static_cast<int>(u01(rng) * w / 2));
    int ch = std::max(2, static_cast<int>(u01(rng) * h / 2));
    int cx = static_cast<int>(u01(rng) * (w - cw));
    int cy = static_cast<int>(u01(rng) * (h - ch));
    bool ellipse = u01(rng) < 0.5;
    for (int y = cy; y < cy + ch; ++y) {
      for (int x = cx; x < cx + cw; ++x) {
        if (ellipse) {
          double dx = (x - cx - cw / 2.0) / (cw / 2.0);
          double dy = (y - cy - ch / 2.0) / (ch / 2.0);
          if (dx * dx + dy * dy > 1.0) continue;
        }
        img.at(x, y, 0) = c.r;
        img.at(x, y, 1) = c.g;
        img.at(x, y, 2) = c.b;
      }
    }
  }
  return img;
}

std::vector<Rgb> make_palette() {
  return {
      {0, 0, 0},      {25, 25, 112},  {139, 0, 0},    {0, 80, 30},
      {70, 70, 70},   {80, 0, 100},   {120, 60, 10},  {0, 60, 90},
  };
}

}  // namespace

AssetLibrary AssetLibrary::builtin(std::uint64_t seed) {
  AssetLibrary lib;
  // Geometric size grids so that for any paste area in a sane pixel range
  // some candidate lands inside the [w,1.5w] x [h,2h] eligibility band.
  const int widths[] = {12, 18, 26, 38, 55, 80, 116, 168, 244, 354, 500, 700};
  const int heights[] = {16, 30, 56, 105, 200, 380, 700};
  std::uint64_t idx = 0;
  for (int w : widths) {
    for (int h : heights) {
      lib.images.push_back(
          make_candidate_image(w, h, derive_seed(seed, "asset-img", idx)));
      ++idx;
    }
  }
  lib.fonts.push_back(make_font("strokeface-regular", 11, false));
  lib.fonts.push_back(make_font("strokeface-bold", 47, true));
  lib.corpus = make_corpus(seed);
  lib.palette = make_palette();
  lib.validate();
  return lib;
}

AssetLibrary AssetLibrary::load_dir(const std::string& dir,
                                    std::uint64_t seed) {
  namespace fs = std::filesystem;
  AssetLibrary lib = builtin(seed);
  std::vector<fs::path> pngs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".png") pngs.push_back(entry.path());
  }
  if (ec) throw DataError("cannot read asset directory '" + dir + "'");
  if (pngs.empty()) {
    throw DataError("asset directory '" + dir + "' contains no .png images");
  }
  std::sort(pngs.begin(), pngs.end());
  lib.images.clear();
  for (const auto& p : pngs) lib.images.push_back(read_png(p.string()));
  lib.validate();
  return lib;
}

void AssetLibrary::validate() const {
  if (images.size() < 20) {
    throw DataError("asset library: need >= 20 candidate images, have " +
                    std::to_string(images.size()));
  }
  std::set<std::pair<int, int>> dims;
  for (const Image& im : images) dims.insert({im.width, im.height});
  if (dims.size() < 5) {
    throw DataError("asset library: candidate images must span varied sizes");
  }
  if (fonts.size() < 2) throw DataError("asset library: need >= 2 font faces");
  if (corpus.size() < 10000) {
    throw DataError("asset library: text corpus must be >= 10000 characters");
  }
  if (palette.empty()) throw DataError("asset library: empty color palette");
  for (const Rgb& c : palette) {
    if (contrast_vs_white(c) < 3.0) {
      throw DataError("asset library: palette color fails 3:1 contrast");
    }
  }
}

}  // namespace dlgdd::ded
