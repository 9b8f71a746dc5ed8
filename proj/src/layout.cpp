#include "dlgdd/layout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dlgdd/common.hpp"
#include "json.hpp"

namespace dlgdd {

const char* element_class_name(ElementClass c) {
  switch (c) {
    case ElementClass::figure:
      return "figure";
    case ElementClass::table:
      return "table";
    case ElementClass::text:
      return "text";
  }
  return "?";
}

ElementClass element_class_from_name(const std::string& name) {
  if (name == "figure") return ElementClass::figure;
  if (name == "table") return ElementClass::table;
  if (name == "text") return ElementClass::text;
  throw DataError("unknown element class '" + name + "'");
}

PageLayout sample_latent_layout(int n, std::uint64_t seed) {
  if (n < 1 || n > kMaxElements) {
    throw UsageError("sample_latent_layout: n=" + std::to_string(n) +
                     " outside [1," + std::to_string(kMaxElements) + "]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, kNumElementClasses - 1);
  PageLayout out;
  out.latent = true;
  out.elements.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    LayoutElement e;
    e.cls = static_cast<ElementClass>(cls(rng));
    e.x = gauss(rng);
    e.y = gauss(rng);
    e.w = gauss(rng);
    e.h = gauss(rng);
    out.elements.push_back(e);
  }
  return out;
}

double iou(const LayoutElement& a, const LayoutElement& b) {
  double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  double inter = ix * iy;
  double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<ViolationReport> validate_layout(const PageLayout& layout,
                                             double overlap_threshold) {
  if (layout.latent) {
    throw UsageError("validate_layout: layout is latent");
  }
  std::vector<ViolationReport> reports;
  for (std::size_t i = 0; i < layout.elements.size(); ++i) {
    const LayoutElement& e = layout.elements[i];
    double oob = 0.0;
    oob = std::max(oob, -e.x);
    oob = std::max(oob, -e.y);
    oob = std::max(oob, e.x + e.w - 1.0);
    oob = std::max(oob, e.y + e.h - 1.0);
    if (oob > 0.0) {
      reports.push_back({i, ViolationKind::out_of_bounds, oob});
    }
    double deg = std::max(kMinBoxSize - e.w, kMinBoxSize - e.h);
    if (deg > 0.0) {
      reports.push_back({i, ViolationKind::degenerate_size, deg});
    }
  }
  // One report per offending pair, attributed to the later element.
  for (std::size_t i = 0; i < layout.elements.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.elements.size(); ++j) {
      double v = iou(layout.elements[i], layout.elements[j]);
      if (v > overlap_threshold) {
        reports.push_back({j, ViolationKind::excessive_overlap, v});
      }
    }
  }
  return reports;
}

static nlohmann::json layout_to_json_obj(const PageLayout& layout) {
  nlohmann::json elems = nlohmann::json::array();
  for (const LayoutElement& e : layout.elements) {
    elems.push_back({{"class", element_class_name(e.cls)},
                     {"x", e.x},
                     {"y", e.y},
                     {"w", e.w},
                     {"h", e.h}});
  }
  return nlohmann::json{{"elements", elems}};
}

std::string layouts_to_json(const std::vector<PageLayout>& layouts) {
  nlohmann::json pages = nlohmann::json::array();
  for (const PageLayout& l : layouts) pages.push_back(layout_to_json_obj(l));
  nlohmann::json doc{{"pages", pages}};
  return doc.dump(2);
}

void write_layouts(const std::vector<PageLayout>& layouts,
                   const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << layouts_to_json(layouts) << "\n";
  if (!f) throw DataError("write failed for '" + path + "'");
}

std::vector<PageLayout> parse_layouts(const std::string& json_text,
                                      const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(origin + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("pages") || !doc["pages"].is_array()) {
    throw DataError(origin + ": expected top-level object with 'pages' array");
  }
  std::vector<PageLayout> out;
  std::size_t page_idx = 0;
  for (const auto& page : doc["pages"]) {
    if (!page.is_object() || !page.contains("elements") ||
        !page["elements"].is_array()) {
      throw DataError(origin + ": page " + std::to_string(page_idx) +
                      " lacks an 'elements' array");
    }
    PageLayout layout;
    std::size_t elem_idx = 0;
    for (const auto& el : page["elements"]) {
      if (!el.is_object()) {
        throw DataError(origin + ": page " + std::to_string(page_idx) +
                        " element " + std::to_string(elem_idx) +
                        " is not an object");
      }
      for (const auto& [key, val] : el.items()) {
        if (key != "class" && key != "x" && key != "y" && key != "w" &&
            key != "h") {
          throw DataError(origin + ": page " + std::to_string(page_idx) +
                          " element " + std::to_string(elem_idx) +
                          " has unexpected field '" + key + "'");
        }
      }
      for (const char* key : {"class", "x", "y", "w", "h"}) {
        if (!el.contains(key)) {
          throw DataError(origin + ": page " + std::to_string(page_idx) +
                          " element " + std::to_string(elem_idx) +
                          " missing field '" + key + "'");
        }
      }
      LayoutElement e;
      if (!el["class"].is_string()) {
        throw DataError(origin + ": element class must be a string");
      }
      e.cls = element_class_from_name(el["class"].get<std::string>());
      for (const char* key : {"x", "y", "w", "h"}) {
        if (!el[key].is_number()) {
          throw DataError(origin + ": field '" + std::string(key) +
                          "' must be numeric (page " +
                          std::to_string(page_idx) + ", element " +
                          std::to_string(elem_idx) + ")");
        }
      }
      e.x = el["x"].get<double>();
      e.y = el["y"].get<double>();
      e.w = el["w"].get<double>();
      e.h = el["h"].get<double>();
      layout.elements.push_back(e);
      ++elem_idx;
    }
    layout.latent = false;
    out.push_back(std::move(layout));
    ++page_idx;
  }
  return out;
}

std::vector<PageLayout> read_layouts(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open layout file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_layouts(ss.str(), path);
}

GrammarStyle grammar_style_from_name(const std::string& name) {
  if (name == "academic") return GrammarStyle::academic;
  if (name == "magazine") return GrammarStyle::magazine;
  throw UsageError("unknown grammar style '" + name + "'");
}

namespace {

// Vertical gap between stacked boxes so same-class regions never touch
// on the pixel grid.
constexpr double kGap = 0.02;
constexpr double kMargin = 0.08;

// Fill one column with stacked blocks top to bottom. figure_slots marks
// which block indices become figure/table boxes instead of text.
void fill_column(std::vector<LayoutElement>& out, double left, double width,
                 std::mt19937_64& rng, int figure_budget) {
  std::uniform_real_distribution<double> uh(0.14, 0.28);
  std::uniform_real_distribution<double> ufig(0.18, 0.30);
  std::uniform_real_distribution<double> ufill(0.36, 0.62);
  std::uniform_int_distribution<int> coin(0, 3);
  std::uniform_int_distribution<int> figcls(0, 1);
  double y = kMargin;
  // Columns stop at a random fill height; real article pages end where
  // the content ends, and the slack keeps the corpus learnable.
  double fill_to = ufill(rng);
  int figs = 0;
  while (true) {
    bool make_fig = figs < figure_budget && coin(rng) == 0;
    double h = make_fig ? ufig(rng) : uh(rng);
    if (y + h > fill_to) {
      double rest = fill_to - y;
      if (rest < 0.08) break;
      h = rest;
      make_fig = false;
    }
    LayoutElement e;
    e.cls = make_fig ? static_cast<ElementClass>(figcls(rng))
                     : ElementClass::text;
    e.x = left;
    e.y = y;
    e.w = width;
    e.h = h;
    out.push_back(e);
    if (make_fig) ++figs;
    y += h + kGap;
    if (out.size() >= static_cast<std::size_t>(kMaxElements)) break;
  }
}

PageLayout academic_page(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ncols(1, 2);
  std::uniform_int_distribution<int> nfig(0, 2);
  PageLayout layout;
  int cols = ncols(rng);
  int figure_budget = nfig(rng);
  double gutter = 0.04;
  double width = (1.0 - 2 * kMargin - (cols - 1) * gutter) / cols;
  for (int c = 0; c < cols; ++c) {
    double left = kMargin + c * (width + gutter);
    int budget = c == 0 ? figure_budget : 0;
    fill_column(layout.elements, left, width, rng, budget);
  }
  layout.latent = false;
  return layout;
}

PageLayout magazine_page(std::mt19937_64& rng) {
  // Horizontal shelves; each shelf holds one large figure or 1-2 loose
  // text blocks with jittered edges.
  std::uniform_real_distribution<double> ujit(0.0, 1.0);
  PageLayout layout;
  double y = 0.05 + 0.04 * ujit(rng);
  bool placed_figure = false;
  while (y < 0.78 && layout.elements.size() + 2 <=
                         static_cast<std::size_t>(kMaxElements)) {
    bool figure_shelf = !placed_figure || ujit(rng) < 0.45;
    if (figure_shelf) {
      LayoutElement e;
      e.cls = ujit(rng) < 0.75 ? ElementClass::figure : ElementClass::table;
      e.w = 0.45 + 0.40 * ujit(rng);
      e.h = 0.22 + 0.22 * ujit(rng);
      if (y + e.h > 0.95) e.h = 0.95 - y;
      if (e.h < 0.10) break;
      e.x = 0.02 + (0.96 - e.w) * ujit(rng);
      e.y = y;
      layout.elements.push_back(e);
      placed_figure = true;
      y += e.h + kGap;
    } else {
      int blocks = ujit(rng) < 0.5 ? 1 : 2;
      double h = 0.10 + 0.14 * ujit(rng);
      if (y + h > 0.95) h = 0.95 - y;
      if (h < 0.08) break;
      double x = 0.03 + 0.05 * ujit(rng);
      for (int b = 0; b < blocks; ++b) {
        LayoutElement e;
        e.cls = ElementClass::text;
        e.w = 0.22 + 0.22 * ujit(rng);
        if (x + e.w > 0.97) e.w = 0.97 - x;
        if (e.w < 0.10) break;
        e.x = x;
        e.y = y;
        e.h = h;
        layout.elements.push_back(e);
        x += e.w + 0.04 + 0.04 * ujit(rng);
      }
      y += h + kGap;
    }
  }
  if (layout.elements.empty()) {
    LayoutElement e;
    e.cls = ElementClass::figure;
    e.x = 0.1;
    e.y = 0.1;
    e.w = 0.8;
    e.h = 0.6;
    layout.elements.push_back(e);
  }
  layout.latent = false;
  return layout;
}

}  // namespace

std::vector<PageLayout> grammar_generate_corpus(GrammarStyle style, int count,
                                                std::uint64_t seed) {
  if (count < 1) throw UsageError("grammar_generate_corpus: count must be >= 1");
  std::vector<PageLayout> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(seed, "grammar", static_cast<std::uint64_t>(i)));
    out.push_back(style == GrammarStyle::academic ? academic_page(rng)
                                                  : magazine_page(rng));
  }
  return out;
}

}  // namespace dlgdd
