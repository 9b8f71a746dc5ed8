#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dlgdd/assets.hpp"
#include "dlgdd/image.hpp"
#include "dlgdd/layout.hpp"

namespace dlgdd::ded {

// Mask codes: 0 background, 1 figure, 2 table, 3 text.
inline int mask_code(ElementClass c) { return static_cast<int>(c) + 1; }
// Human-viewable mask colors: background black, figure red, table blue,
// text green.
Rgb mask_color(int code);
Image mask_to_rgb(const Image& mask);

struct CropSpec {
  int image_index = 0;
  int src_x = 0, src_y = 0;  // crop origin within the (possibly rescaled) image
  int w = 0, h = 0;          // crop extent == destination extent
  bool fallback = false;
  int scaled_w = 0, scaled_h = 0;  // rescale dims when fallback
};

struct TextStyle {
  int font_index = 0;
  int size_px = 0;
  int color_index = 0;
  std::size_t corpus_offset = 0;
  int precrop_w = 0, precrop_h = 0;  // rendered extent before cropping
};

struct RenderLogEntry {
  std::size_t element_index = 0;
  ElementClass cls = ElementClass::text;
  bool is_text = false;
  CropSpec crop;    // valid when !is_text
  TextStyle style;  // valid when is_text
};

struct RenderedPage {
  Image page;        // RGB, white background
  Image mask;        // single channel class indices
  PageLayout layout;
  std::vector<RenderLogEntry> log;
  std::uint64_t seed = 0;
};

// Uniform choice among candidates inside the eligibility band
// w <= W <= 1.5w and h <= H <= 2h, with uniform crop origin. When no
// candidate qualifies, a uniformly chosen image is rescaled to
// (1.25w, 1.5h) and the pick is logged as a fallback.
CropSpec select_image(const AssetLibrary& assets, int w_px, int h_px,
                      std::mt19937_64& rng);

// Renders the crop described by spec into a w x h RGB raster.
Image apply_crop(const AssetLibrary& assets, const CropSpec& spec);

// Wrapped sentence text at a uniform font size in [8, h_px/2]; the
// pre-crop canvas covers the box in both dimensions, then is cropped
// top-left to exactly w_px x h_px.
Image render_text_block(const AssetLibrary& assets, int w_px, int h_px,
                        std::mt19937_64& rng, TextStyle* style_out);

// Pixel convention: an element covers [floor(x*W), floor((x+w)*W)) x
// [floor(y*H), floor((y+h)*H)). Elements composite in list order.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
};
PixelRect element_pixel_rect(const LayoutElement& e, int page_w, int page_h);

RenderedPage decorate(const PageLayout& layout, const AssetLibrary& assets,
                      int page_w, int page_h, std::uint64_t seed);

// Parallel batch renderer; page i uses seed seed_base + i and output order
// matches input order.
std::vector<RenderedPage> decorate_batch(const std::vector<PageLayout>& layouts,
                                         const AssetLibrary& assets,
                                         int page_w, int page_h,
                                         std::uint64_t seed_base,
                                         int threads = 0);

// True when the layout's every element is large enough on this pixel grid
// to be decorated (figures >= 8x8 px, text >= 8 px wide and 16 px tall).
bool layout_renderable(const PageLayout& layout, int page_w, int page_h);

struct ExportManifest {
  std::string json;  // serialized manifest document
};

// Writes pages/, masks/, masks_rgb/, layouts.json and manifest.json with
// per-file CRC32 checksums; returns the manifest text.
ExportManifest export_dataset(const std::vector<RenderedPage>& pages,
                              const std::string& dir);

// Recomputes checksums against manifest.json; returns the list of paths
// that mismatch (empty = dataset intact).
std::vector<std::string> verify_dataset(const std::string& dir);

}  // namespace dlgdd::ded
