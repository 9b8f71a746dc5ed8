#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlgdd/image.hpp"
#include "dlgdd/nn.hpp"

namespace dlgdd::dsd {

constexpr int kThumbSize = 128;
constexpr int kEmbedDim = 64;
constexpr int kDefaultTopK = 5;

struct DsdConfig {
  int epochs = 30;
  int batch = 32;
  double lr = 1e-3;
  double temperature = 0.1;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
};

// Page-style encoder: 128x128 gray thumbnail -> three stride-2 conv
// stages (1->8->16->32 channels) -> affine to a unit-norm 64-d embedding.
struct StyleEncoder {
  diff::ParameterStore params;
  DsdConfig config;

  void save(const std::string& path) const;
  static StyleEncoder load(const std::string& path);
};

struct StyleCorpus {
  std::vector<std::vector<double>> positives;  // S+
  std::vector<std::vector<double>> negatives;  // S-
  std::vector<std::string> positive_labels;
  std::vector<std::string> negative_labels;
};

struct ScoreReport {
  double s_plus = 0.0;
  double s_minus = 0.0;
  double e_min = 0.0;   // min(s_plus, s_minus)
  double margin = 0.0;  // s_plus - s_minus
  bool accepted = false;
};

// Delimited text export of one report per row, with a header line.
std::string score_reports_to_text(const std::vector<ScoreReport>& reports);

struct TrainCurve {
  std::vector<double> epoch_loss;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

// Gray 128x128 thumbnail in [0,1], luminance + area-average resize.
// Page must be at least 64x64.
std::vector<double> preprocess(const Image& page);

StyleEncoder make_encoder(const DsdConfig& config);

std::vector<double> embed(StyleEncoder& encoder, const Image& page);
// Batched variant over preprocessed thumbnails; rows are unit-norm.
std::vector<std::vector<double>> embed_thumbs(
    StyleEncoder& encoder, const std::vector<std::vector<double>>& thumbs);

struct TrainedDsd {
  StyleEncoder encoder;
  TrainCurve curve;
};

// Two-class supervised contrastive training; batches are stratified so
// each class contributes at least two pages. Each class needs >= 50 pages.
TrainedDsd train_dsd(const std::vector<Image>& pos_pages,
                     const std::vector<Image>& neg_pages,
                     const DsdConfig& config);

// Mean cosine similarity over the k nearest members of S.
double set_similarity(const std::vector<double>& e,
                      const std::vector<std::vector<double>>& S, int k);

ScoreReport assess(const Image& page, StyleEncoder& encoder,
                   const StyleCorpus& corpus, double tau);
ScoreReport assess_embedding(const std::vector<double>& e,
                             const StyleCorpus& corpus, double tau);

struct FilterResult {
  std::vector<std::size_t> accepted;  // indices into the input, in order
  std::vector<std::size_t> rejected;
  std::vector<ScoreReport> reports;   // one per input page
  double rate = 0.0;
  bool empty_input = false;
};

FilterResult quality_filter(const std::vector<Image>& pages,
                            StyleEncoder& encoder, const StyleCorpus& corpus,
                            double tau);

// Embeds target_pages as S+ and neg_pages as S-, then keeps the pages
// that assess accepts. Returns indices into pages, in order.
FilterResult cross_domain_select(const std::vector<Image>& pages,
                                 StyleEncoder& encoder,
                                 const std::vector<Image>& target_pages,
                                 const std::vector<Image>& neg_pages,
                                 double tau);

}  // namespace dlgdd::dsd
