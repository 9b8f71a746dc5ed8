#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "dlgdd/common.hpp"
#include "dlgdd/layout.hpp"
#include "dlgdd/render.hpp"

using namespace dlgdd;

namespace {

LayoutElement box(ElementClass c, double x, double y, double w, double h) {
  LayoutElement e;
  e.cls = c;
  e.x = x;
  e.y = y;
  e.w = w;
  e.h = h;
  return e;
}

const ded::AssetLibrary& assets() {
  static ded::AssetLibrary lib = ded::AssetLibrary::builtin(3);
  return lib;
}

}  // namespace

TEST_CASE("element_pixel_rect follows the floor convention") {
  LayoutElement e = box(ElementClass::figure, 0.1, 0.2, 0.35, 0.4);
  auto r = ded::element_pixel_rect(e, 400, 500);
  CHECK(r.x0 == static_cast<int>(std::floor(0.1 * 400)));
  CHECK(r.x1 == static_cast<int>(std::floor((0.1 + 0.35) * 400)));
  CHECK(r.y0 == static_cast<int>(std::floor(0.2 * 500)));
  CHECK(r.y1 == static_cast<int>(std::floor((0.2 + 0.4) * 500)));
  // Full page maps to the full raster.
  auto full = ded::element_pixel_rect(box(ElementClass::text, 0, 0, 1, 1),
                                      400, 500);
  CHECK(full.x0 == 0);
  CHECK(full.x1 == 400);
  CHECK(full.y1 == 500);
}

TEST_CASE("select_image respects the eligibility band") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dw(10, 300), dh(10, 300);
  int fallbacks = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    int w = dw(rng), h = dh(rng);
    ded::CropSpec spec = ded::select_image(assets(), w, h, rng);
    REQUIRE(spec.image_index >= 0);
    REQUIRE(spec.image_index < static_cast<int>(assets().images.size()));
    CHECK(spec.w == w);
    CHECK(spec.h == h);
    if (spec.fallback) {
      ++fallbacks;
      CHECK(spec.scaled_w == static_cast<int>(std::ceil(1.25 * w)));
      CHECK(spec.scaled_h == static_cast<int>(std::ceil(1.5 * h)));
      CHECK(spec.src_x + w <= spec.scaled_w);
      CHECK(spec.src_y + h <= spec.scaled_h);
    } else {
      const Image& img = assets().images[spec.image_index];
      CHECK(img.width >= w);
      CHECK(img.width <= static_cast<int>(std::floor(1.5 * w)));
      CHECK(img.height >= h);
      CHECK(img.height <= 2 * h);
      CHECK(spec.src_x >= 0);
      CHECK(spec.src_y >= 0);
      CHECK(spec.src_x + w <= img.width);
      CHECK(spec.src_y + h <= img.height);
    }
  }
  CHECK(fallbacks < trials);  // the bundled set serves most requests
}

TEST_CASE("select_image falls back when nothing is eligible") {
  std::mt19937_64 rng(8);
  // Larger than every bundled image: must fall back.
  ded::CropSpec spec = ded::select_image(assets(), 2000, 2000, rng);
  CHECK(spec.fallback);
}

TEST_CASE("apply_crop reproduces source pixels for direct crops") {
  std::mt19937_64 rng(9);
  ded::CropSpec spec;
  for (int t = 0; t < 50; ++t) {
    spec = ded::select_image(assets(), 40, 30, rng);
    if (!spec.fallback) break;
  }
  REQUIRE_FALSE(spec.fallback);
  Image out = ded::apply_crop(assets(), spec);
  REQUIRE(out.width == 40);
  REQUIRE(out.height == 30);
  REQUIRE(out.channels == 3);
  const Image& src = assets().images[spec.image_index];
  for (int y = 0; y < 30; y += 7)
    for (int x = 0; x < 40; x += 7)
      for (int c = 0; c < 3; ++c)
        CHECK(out.at(x, y, c) == src.at(spec.src_x + x, spec.src_y + y, c));
}

TEST_CASE("render_text_block sizes fonts within the band and covers the box") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 60; ++t) {
    int w = 30 + t * 3, h = 20 + (t % 11) * 9;
    ded::TextStyle style;
    Image block = ded::render_text_block(assets(), w, h, rng, &style);
    CHECK(block.width == w);
    CHECK(block.height == h);
    CHECK(style.size_px >= 8);
    CHECK(style.size_px <= h / 2);
    CHECK(style.precrop_w >= w);
    CHECK(style.precrop_h >= h);
    CHECK(style.font_index >= 0);
    CHECK(style.font_index < static_cast<int>(assets().fonts.size()));
    CHECK(style.color_index >= 0);
    CHECK(style.color_index < static_cast<int>(assets().palette.size()));
  }
}

TEST_CASE("text block pixels are white or the chosen palette color") {
  std::mt19937_64 rng(11);
  ded::TextStyle style;
  Image block = ded::render_text_block(assets(), 120, 60, rng, &style);
  ded::Rgb ink = assets().palette[style.color_index];
  bool saw_ink = false;
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 120; ++x) {
      bool white = block.at(x, y, 0) == 255 && block.at(x, y, 1) == 255 &&
                   block.at(x, y, 2) == 255;
      bool inked = block.at(x, y, 0) == ink.r && block.at(x, y, 1) == ink.g &&
                   block.at(x, y, 2) == ink.b;
      CHECK((white || inked));
      saw_ink = saw_ink || inked;
    }
  CHECK(saw_ink);
}

TEST_CASE("palette colors all read against white") {
  for (const ded::Rgb& c : assets().palette)
    CHECK(ded::contrast_vs_white(c) >= 4.5);
  CHECK(ded::relative_luminance({255, 255, 255}) == doctest::Approx(1.0));
  CHECK(ded::relative_luminance({0, 0, 0}) == doctest::Approx(0.0));
}

TEST_CASE("decorate produces exact masks for non-overlapping layouts") {
  std::mt19937_64 seed_rng(12);
  for (int t = 0; t < 5; ++t) {
    PageLayout l;
    l.elements.push_back(box(ElementClass::text, 0.05, 0.05, 0.4, 0.2));
    l.elements.push_back(box(ElementClass::figure, 0.55, 0.05, 0.38, 0.3));
    l.elements.push_back(box(ElementClass::table, 0.05, 0.5, 0.5, 0.35));
    ded::RenderedPage page = ded::decorate(l, assets(), 320, 416, seed_rng());
    REQUIRE(page.mask.width == 320);
    REQUIRE(page.mask.height == 416);
    REQUIRE(page.mask.channels == 1);

    // Every pixel's class code must match the covering element (or 0).
    std::vector<int> expected(320 * 416, 0);
    for (const auto& e : l.elements) {
      auto r = ded::element_pixel_rect(e, 320, 416);
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
          expected[y * 320 + x] = ded::mask_code(e.cls);
    }
    for (int y = 0; y < 416; ++y)
      for (int x = 0; x < 320; ++x)
        REQUIRE(page.mask.at(x, y, 0) == expected[y * 320 + x]);

    // Background stays white on the rendered page.
    for (int y = 0; y < 416; y += 13)
      for (int x = 0; x < 320; x += 13)
        if (expected[y * 320 + x] == 0)
          for (int c = 0; c < 3; ++c) REQUIRE(page.page.at(x, y, c) == 255);
  }
}

TEST_CASE("overlapping elements composite in list order") {
  PageLayout l;
  l.elements.push_back(box(ElementClass::figure, 0.1, 0.1, 0.5, 0.5));
  l.elements.push_back(box(ElementClass::table, 0.3, 0.3, 0.5, 0.5));
  ded::RenderedPage page = ded::decorate(l, assets(), 300, 300, 77);
  // The shared region belongs to the later element.
  CHECK(page.mask.at(120, 120, 0) == ded::mask_code(ElementClass::table));
  CHECK(page.mask.at(45, 45, 0) == ded::mask_code(ElementClass::figure));
}

TEST_CASE("decorate is deterministic in the seed") {
  PageLayout l;
  l.elements.push_back(box(ElementClass::text, 0.1, 0.1, 0.6, 0.25));
  l.elements.push_back(box(ElementClass::figure, 0.1, 0.45, 0.5, 0.4));
  ded::RenderedPage a = ded::decorate(l, assets(), 256, 256, 5);
  ded::RenderedPage b = ded::decorate(l, assets(), 256, 256, 5);
  CHECK(a.page == b.page);
  CHECK(a.mask == b.mask);
  ded::RenderedPage c = ded::decorate(l, assets(), 256, 256, 6);
  CHECK_FALSE(a.page == c.page);
}

TEST_CASE("decorate_batch matches sequential decoration and is ordered") {
  std::vector<PageLayout> layouts;
  std::mt19937_64 rng(13);
  for (int i = 0; i < 12; ++i) {
    PageLayout l;
    std::uniform_real_distribution<double> u(0.05, 0.4);
    l.elements.push_back(box(ElementClass::text, u(rng), u(rng), 0.3, 0.2));
    layouts.push_back(l);
  }
  auto parallel = ded::decorate_batch(layouts, assets(), 256, 256, 100, 4);
  REQUIRE(parallel.size() == layouts.size());
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    ded::RenderedPage solo = ded::decorate(layouts[i], assets(), 256, 256,
                                           100 + static_cast<int>(i));
    CHECK(parallel[i].page == solo.page);
    CHECK(parallel[i].mask == solo.mask);
    CHECK(parallel[i].seed == solo.seed);
  }
  // Thread count must not affect output.
  auto serial = ded::decorate_batch(layouts, assets(), 256, 256, 100, 1);
  for (std::size_t i = 0; i < layouts.size(); ++i)
    CHECK(parallel[i].page == serial[i].page);
}

TEST_CASE("layout_renderable screens undersized elements") {
  PageLayout ok;
  ok.elements.push_back(box(ElementClass::figure, 0.1, 0.1, 0.1, 0.1));
  CHECK(ded::layout_renderable(ok, 400, 400));
  CHECK_FALSE(ded::layout_renderable(ok, 60, 60));  // 6x6 px figure
  PageLayout text;
  text.elements.push_back(box(ElementClass::text, 0.1, 0.1, 0.2, 0.05));
  CHECK(ded::layout_renderable(text, 400, 400));   // 80x20 px
  CHECK_FALSE(ded::layout_renderable(text, 400, 200));  // 10 px tall
}

TEST_CASE("mask_to_rgb maps every class to its display color") {
  Image mask = Image::make(4, 1, 1);
  for (int i = 0; i < 4; ++i) mask.at(i, 0, 0) = static_cast<std::uint8_t>(i);
  Image rgb = ded::mask_to_rgb(mask);
  for (int i = 0; i < 4; ++i) {
    ded::Rgb c = ded::mask_color(i);
    CHECK(rgb.at(i, 0, 0) == c.r);
    CHECK(rgb.at(i, 0, 1) == c.g);
    CHECK(rgb.at(i, 0, 2) == c.b);
  }
}

TEST_CASE("export then verify round trips; corruption is detected") {
  std::vector<PageLayout> layouts(3);
  layouts[0].elements.push_back(box(ElementClass::text, 0.1, 0.1, 0.4, 0.2));
  layouts[1].elements.push_back(box(ElementClass::figure, 0.2, 0.3, 0.3, 0.3));
  layouts[2].elements.push_back(box(ElementClass::table, 0.1, 0.6, 0.5, 0.3));
  auto pages = ded::decorate_batch(layouts, assets(), 256, 320, 50, 2);
  std::string dir =
      (std::filesystem::temp_directory_path() / "dataset_rt").string();
  std::filesystem::remove_all(dir);
  ded::export_dataset(pages, dir);
  CHECK(std::filesystem::exists(dir + "/manifest.json"));
  CHECK(ded::verify_dataset(dir).empty());

  // Flip one byte inside a PNG payload.
  std::string victim = dir + "/pages/page_00001.png";
  REQUIRE(std::filesystem::exists(victim));
  {
    std::fstream f(victim,
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    char byte;
    f.seekg(-1, std::ios::end);
    f.get(byte);
    f.seekp(-1, std::ios::end);
    byte = static_cast<char>(byte ^ 0xFF);
    f.put(byte);
  }
  auto bad = ded::verify_dataset(dir);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].find("page_00001.png") != std::string::npos);

  // A missing file is also reported.
  std::filesystem::remove(dir + "/masks/mask_00002.png");
  auto bad2 = ded::verify_dataset(dir);
  CHECK(bad2.size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify_dataset requires a manifest") {
  std::string dir =
      (std::filesystem::temp_directory_path() / "dataset_none").string();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  CHECK_THROWS_AS(ded::verify_dataset(dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("builtin asset library satisfies its invariants") {
  const ded::AssetLibrary& lib = assets();
  lib.validate();
  CHECK(lib.images.size() >= 8);
  CHECK(lib.fonts.size() >= 2);
  CHECK(lib.corpus.size() >= 10000);
  CHECK_FALSE(lib.palette.empty());
  // Deterministic per seed.
  ded::AssetLibrary again = ded::AssetLibrary::builtin(3);
  CHECK(again.corpus == lib.corpus);
  CHECK(again.images.size() == lib.images.size());
  CHECK(again.images[0] == lib.images[0]);
}
