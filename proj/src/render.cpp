#include "dlgdd/render.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "dlgdd/common.hpp"
#include "json.hpp"

namespace dlgdd::ded {

namespace fs = std::filesystem;

Rgb mask_color(int code) {
  switch (code) {
    case 1:
      return {255, 0, 0};  // figure
    case 2:
      return {0, 0, 255};  // table
    case 3:
      return {0, 255, 0};  // text
    default:
      return {0, 0, 0};  // background
  }
}

Image mask_to_rgb(const Image& mask) {
  Image out = Image::make(mask.width, mask.height, 3);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      Rgb c = mask_color(mask.at(x, y, 0));
      out.at(x, y, 0) = c.r;
      out.at(x, y, 1) = c.g;
      out.at(x, y, 2) = c.b;
    }
  }
  return out;
}

CropSpec select_image(const AssetLibrary& assets, int w_px, int h_px,
                      std::mt19937_64& rng) {
  if (assets.images.empty()) {
    throw DataError("select_image: asset library has no candidate images");
  }
  if (w_px < 8 || h_px < 8) {
    throw UsageError("select_image: paste area " + std::to_string(w_px) + "x" +
                     std::to_string(h_px) + " below 8x8 px");
  }
  std::vector<int> eligible;
  for (std::size_t i = 0; i < assets.images.size(); ++i) {
    const Image& im = assets.images[i];
    bool w_ok = im.width >= w_px && 2 * im.width <= 3 * w_px;   // W <= 1.5w
    bool h_ok = im.height >= h_px && im.height <= 2 * h_px;     // H <= 2h
    if (w_ok && h_ok) eligible.push_back(static_cast<int>(i));
  }
  CropSpec spec;
  spec.w = w_px;
  spec.h = h_px;
  if (!eligible.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    spec.image_index = eligible[pick(rng)];
    const Image& im = assets.images[static_cast<std::size_t>(spec.image_index)];
    std::uniform_int_distribution<int> ux(0, im.width - w_px);
    std::uniform_int_distribution<int> uy(0, im.height - h_px);
    spec.src_x = ux(rng);
    spec.src_y = uy(rng);
  } else {
    // Midpoints of the legal bands keep the rescaled image comfortably
    // inside both constraints.
    std::uniform_int_distribution<std::size_t> pick(0, assets.images.size() - 1);
    spec.image_index = static_cast<int>(pick(rng));
    spec.fallback = true;
    spec.scaled_w = (5 * w_px + 3) / 4;  // ceil(1.25w)
    spec.scaled_h = (3 * h_px + 1) / 2;  // ceil(1.5h)
    std::uniform_int_distribution<int> ux(0, spec.scaled_w - w_px);
    std::uniform_int_distribution<int> uy(0, spec.scaled_h - h_px);
    spec.src_x = ux(rng);
    spec.src_y = uy(rng);
  }
  return spec;
}

Image apply_crop(const AssetLibrary& assets, const CropSpec& spec) {
  const Image* src = &assets.images[static_cast<std::size_t>(spec.image_index)];
  Image scaled;
  if (spec.fallback) {
    scaled = resize_nearest(*src, spec.scaled_w, spec.scaled_h);
    src = &scaled;
  }
  Image out = Image::make(spec.w, spec.h, 3);
  for (int y = 0; y < spec.h; ++y)
    for (int x = 0; x < spec.w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = src->at(spec.src_x + x, spec.src_y + y, c);
  return out;
}

namespace {

void draw_glyph(Image& canvas, const BitmapFont& font, char c, int px, int py,
                int size, Rgb color) {
  if (!font.has_glyph(c)) c = '?';
  const auto& rows = font.glyphs[static_cast<std::size_t>(c)];
  // Nearest scaling of the 8x8 cell to size x size.
  for (int y = 0; y < size; ++y) {
    int gy = y * font.cell / size;
    std::uint8_t row = rows[static_cast<std::size_t>(gy)];
    if (!row) continue;
    int cy = py + y;
    if (cy < 0 || cy >= canvas.height) continue;
    for (int x = 0; x < size; ++x) {
      int gx = x * font.cell / size;
      if (!(row & (0x80 >> gx))) continue;
      int cx = px + x;
      if (cx < 0 || cx >= canvas.width) continue;
      canvas.at(cx, cy, 0) = color.r;
      canvas.at(cx, cy, 1) = color.g;
      canvas.at(cx, cy, 2) = color.b;
    }
  }
}

}  // namespace

Image render_text_block(const AssetLibrary& assets, int w_px, int h_px,
                        std::mt19937_64& rng, TextStyle* style_out) {
  if (h_px < 16) {
    throw UsageError("render_text_block: box height " + std::to_string(h_px) +
                     " px leaves no valid font size (needs >= 16)");
  }
  if (w_px < 1) throw UsageError("render_text_block: empty box");
  TextStyle style;
  std::uniform_int_distribution<int> usize(8, h_px / 2);
  style.size_px = usize(rng);
  std::uniform_int_distribution<std::size_t> ufont(0, assets.fonts.size() - 1);
  style.font_index = static_cast<int>(ufont(rng));
  std::uniform_int_distribution<std::size_t> ucolor(0, assets.palette.size() - 1);
  style.color_index = static_cast<int>(ucolor(rng));
  std::uniform_int_distribution<std::size_t> uoff(0, assets.corpus.size() - 1);
  // Advance to the next sentence start after a random offset.
  std::size_t off = uoff(rng);
  std::size_t dot = assets.corpus.find(". ", off);
  style.corpus_offset = dot == std::string::npos ? 0 : dot + 2;

  int size = style.size_px;
  int line_h = (12 * size + 9) / 10;  // 1.2 x font size, rounded up
  int n_lines = (h_px + line_h - 1) / line_h;
  int canvas_h = n_lines * line_h;
  style.precrop_w = w_px;
  style.precrop_h = canvas_h;
  Image canvas = Image::make(w_px, canvas_h, 3, 255);
  const BitmapFont& font =
      assets.fonts[static_cast<std::size_t>(style.font_index)];
  Rgb color = assets.palette[static_cast<std::size_t>(style.color_index)];
  int advance = std::max(2, 3 * size / 4);

  std::size_t pos = style.corpus_offset;
  for (int line = 0; line < n_lines; ++line) {
    int x = 0;
    int y = line * line_h;
    while (true) {
      // Next word (up to and including a trailing space).
      if (pos >= assets.corpus.size()) pos = 0;
      std::size_t wend = assets.corpus.find(' ', pos);
      if (wend == std::string::npos) wend = assets.corpus.size();
      int word_len = static_cast<int>(wend - pos);
      int word_w = word_len * advance;
      if (x > 0 && x + word_w > w_px) break;  // wrap before this word
      for (std::size_t i = pos; i < wend; ++i) {
        if (x + advance > w_px && x > 0) break;  // hard break inside long word
        draw_glyph(canvas, font, assets.corpus[i], x, y, size, color);
        x += advance;
      }
      pos = wend + 1;
      x += advance;  // space
      if (x >= w_px) break;
    }
  }

  if (style_out) *style_out = style;
  // Crop top-left to the exact box extent.
  Image out = Image::make(w_px, h_px, 3, 255);
  for (int y = 0; y < h_px; ++y)
    for (int x = 0; x < w_px; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = canvas.at(x, y, c);
  return out;
}

PixelRect element_pixel_rect(const LayoutElement& e, int page_w, int page_h) {
  PixelRect r;
  r.x0 = static_cast<int>(std::floor(e.x * page_w));
  r.y0 = static_cast<int>(std::floor(e.y * page_h));
  r.x1 = static_cast<int>(std::floor((e.x + e.w) * page_w));
  r.y1 = static_cast<int>(std::floor((e.y + e.h) * page_h));
  return r;
}

bool layout_renderable(const PageLayout& layout, int page_w, int page_h) {
  for (const LayoutElement& e : layout.elements) {
    PixelRect r = element_pixel_rect(e, page_w, page_h);
    if (e.cls == ElementClass::text) {
      if (r.w() < 8 || r.h() < 16) return false;
    } else {
      if (r.w() < 8 || r.h() < 8) return false;
    }
  }
  return true;
}

RenderedPage decorate(const PageLayout& layout, const AssetLibrary& assets,
                      int page_w, int page_h, std::uint64_t seed) {
  if (page_w < 256 || page_h < 256) {
    throw UsageError("decorate: page size must be at least 256x256");
  }
  if (layout.latent) throw UsageError("decorate: layout is latent");
  RenderedPage out;
  out.layout = layout;
  out.seed = seed;
  out.page = Image::make(page_w, page_h, 3, 255);
  out.mask = Image::make(page_w, page_h, 1, 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < layout.elements.size(); ++i) {
    const LayoutElement& e = layout.elements[i];
    PixelRect r = element_pixel_rect(e, page_w, page_h);
    RenderLogEntry entry;
    entry.element_index = i;
    entry.cls = e.cls;
    Image patch;
    try {
      if (e.cls == ElementClass::text) {
        entry.is_text = true;
        patch = render_text_block(assets, r.w(), r.h(), rng, &entry.style);
      } else {
        entry.is_text = false;
        entry.crop = select_image(assets, r.w(), r.h(), rng);
        patch = apply_crop(assets, entry.crop);
      }
    } catch (const Error& err) {
      throw Error(err.code(), "decorate: element " + std::to_string(i) + ": " +
                                  err.what());
    }
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        for (int c = 0; c < 3; ++c)
          out.page.at(x, y, c) = patch.at(x - r.x0, y - r.y0, c);
        out.mask.at(x, y, 0) = static_cast<std::uint8_t>(mask_code(e.cls));
      }
    }
    out.log.push_back(entry);
  }
  return out;
}

std::vector<RenderedPage> decorate_batch(const std::vector<PageLayout>& layouts,
                                         const AssetLibrary& assets,
                                         int page_w, int page_h,
                                         std::uint64_t seed_base, int threads) {
  std::vector<RenderedPage> out(layouts.size());
  if (layouts.empty()) return out;
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 4;
  }
  threads = std::min<int>(threads, static_cast<int>(layouts.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(layouts.size());
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= layouts.size()) return;
      try {
        out[i] = decorate(layouts[i], assets, page_w, page_h, seed_base + i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw DataError("decorate_batch: page " + std::to_string(i) + ": " +
                      errors[i]);
    }
  }
  return out;
}

namespace {

nlohmann::json log_entry_json(const RenderLogEntry& e) {
  nlohmann::json j{{"element", e.element_index},
                   {"class", element_class_name(e.cls)}};
  if (e.is_text) {
    j["text"] = {{"font", e.style.font_index},
                 {"size_px", e.style.size_px},
                 {"color", e.style.color_index},
                 {"corpus_offset", e.style.corpus_offset},
                 {"precrop_w", e.style.precrop_w},
                 {"precrop_h", e.style.precrop_h}};
  } else {
    j["image"] = {{"index", e.crop.image_index},
                  {"src_x", e.crop.src_x},
                  {"src_y", e.crop.src_y},
                  {"w", e.crop.w},
                  {"h", e.crop.h},
                  {"fallback", e.crop.fallback},
                  {"scaled_w", e.crop.scaled_w},
                  {"scaled_h", e.crop.scaled_h}};
  }
  return j;
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

}  // namespace

ExportManifest export_dataset(const std::vector<RenderedPage>& pages,
                              const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "pages", ec);
  fs::create_directories(fs::path(dir) / "masks", ec);
  fs::create_directories(fs::path(dir) / "masks_rgb", ec);
  if (ec) throw DataError("cannot create dataset directories under '" + dir + "'");

  nlohmann::json page_list = nlohmann::json::array();
  std::vector<PageLayout> layouts;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu", i);
    std::string page_rel = std::string("pages/page_") + name + ".png";
    std::string mask_rel = std::string("masks/mask_") + name + ".png";
    std::string rgb_rel = std::string("masks_rgb/mask_") + name + ".png";
    write_png(pages[i].page, (fs::path(dir) / page_rel).string());
    write_png(pages[i].mask, (fs::path(dir) / mask_rel).string());
    write_png(mask_to_rgb(pages[i].mask), (fs::path(dir) / rgb_rel).string());
    nlohmann::json logs = nlohmann::json::array();
    for (const RenderLogEntry& e : pages[i].log) logs.push_back(log_entry_json(e));
    page_list.push_back(
        {{"page", page_rel},
         {"mask", mask_rel},
         {"mask_rgb", rgb_rel},
         {"seed", pages[i].seed},
         {"page_crc32", hex32(crc32_file((fs::path(dir) / page_rel).string()))},
         {"mask_crc32", hex32(crc32_file((fs::path(dir) / mask_rel).string()))},
         {"render_log", logs}});
    layouts.push_back(pages[i].layout);
  }
  write_layouts(layouts, (fs::path(dir) / "layouts.json").string());
  nlohmann::json doc{{"format_version", 1},
                     {"count", pages.size()},
                     {"layouts", "layouts.json"},
                     {"pages", page_list}};
  ExportManifest manifest;
  manifest.json = doc.dump(2);
  std::ofstream f((fs::path(dir) / "manifest.json").string());
  if (!f) throw DataError("cannot write manifest under '" + dir + "'");
  f << manifest.json << "\n";
  return manifest;
}

std::vector<std::string> verify_dataset(const std::string& dir) {
  std::ifstream f((fs::path(dir) / "manifest.json").string());
  if (!f) throw DataError("cannot open manifest under '" + dir + "'");
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("manifest parse error: ") + e.what());
  }
  std::vector<std::string> bad;
  for (const auto& p : doc["pages"]) {
    for (auto [path_key, crc_key] :
         {std::pair{"page", "page_crc32"}, std::pair{"mask", "mask_crc32"}}) {
      std::string rel = p[path_key].get<std::string>();
      std::string want = p[crc_key].get<std::string>();
      std::string got;
      try {
        got = hex32(crc32_file((fs::path(dir) / rel).string()));
      } catch (const Error&) {
        bad.push_back(rel + " (missing)");
        continue;
      }
      if (got != want) bad.push_back(rel);
    }
  }
  return bad;
}

}  // namespace dlgdd::ded
