#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dlgdd {

enum class ElementClass : int { figure = 0, table = 1, text = 2 };

const char* element_class_name(ElementClass c);
ElementClass element_class_from_name(const std::string& name);

constexpr int kNumElementClasses = 3;
constexpr int kMaxElements = 16;
constexpr double kMinBoxSize = 0.01;

// One layout box in page-fraction units, (x, y) = top-left corner.
// In latent form the geometry fields are unbounded reals.
struct LayoutElement {
  ElementClass cls = ElementClass::text;
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const LayoutElement&) const = default;
};

struct PageLayout {
  std::vector<LayoutElement> elements;
  bool latent = false;

  bool operator==(const PageLayout&) const = default;
  std::size_t size() const { return elements.size(); }
};

enum class ViolationKind { out_of_bounds, degenerate_size, excessive_overlap };

struct ViolationReport {
  std::size_t element_index = 0;
  ViolationKind kind = ViolationKind::out_of_bounds;
  double magnitude = 0.0;
};

// Geometry drawn from independent standard normals, class uniform over the
// three classes. Deterministic per seed.
PageLayout sample_latent_layout(int n, std::uint64_t seed);

double iou(const LayoutElement& a, const LayoutElement& b);

std::vector<ViolationReport> validate_layout(const PageLayout& layout,
                                             double overlap_threshold);

inline bool layout_is_valid(const PageLayout& layout,
                            double overlap_threshold) {
  return validate_layout(layout, overlap_threshold).empty();
}

// JSON layout files: { "pages": [ { "elements": [ {class,x,y,w,h} ] } ] }.
std::vector<PageLayout> read_layouts(const std::string& path);
std::vector<PageLayout> parse_layouts(const std::string& json_text,
                                      const std::string& origin);
void write_layouts(const std::vector<PageLayout>& layouts,
                   const std::string& path);
std::string layouts_to_json(const std::vector<PageLayout>& layouts);

enum class GrammarStyle { academic, magazine };

GrammarStyle grammar_style_from_name(const std::string& name);

// Procedural stand-in corpora. Every emitted layout passes validate_layout
// at overlap threshold 0.05; same-class boxes are separated by visible gaps.
std::vector<PageLayout> grammar_generate_corpus(GrammarStyle style, int count,
                                                std::uint64_t seed);

}  // namespace dlgdd
