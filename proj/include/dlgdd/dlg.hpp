#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlgdd/layout.hpp"
#include "dlgdd/nn.hpp"

namespace dlgdd::dlg {

struct DlgConfig {
  int embed_dim = 64;
  int heads = 4;
  int hidden = 128;
  int epochs = 300;
  int batch = 64;
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  // Weight of the auxiliary pairwise-overlap area penalty added to the
  // generator objective; pure adversarial signal alone is far too slow to
  // push sampled layouts toward non-overlap on a desk CPU.
  double overlap_penalty = 18.0;
  // Validity of sampled layouts is measured with validate_layout at this
  // overlap threshold over this many fresh samples per epoch.
  double validity_overlap_threshold = 0.05;
  int validity_samples = 100;
};

// Encoder MLP -> attention block -> decoder MLP mapping latent boxes to
// decoded boxes (3 class logits + squashed geometry).
struct GeneratorModel {
  diff::ParameterStore params;
  DlgConfig config;
  // Empirical element-count distribution of the training corpus,
  // n_dist[k] = P(page has k elements), k in [0, kMaxElements].
  std::vector<double> n_dist;

  void save(const std::string& path) const;
  static GeneratorModel load(const std::string& path);
};

// Per-element encoder + attention block + mean pool + scoring head.
struct CriticModel {
  diff::ParameterStore params;
  DlgConfig config;

  void save(const std::string& path) const;
  static CriticModel load(const std::string& path);
};

struct EpochRecord {
  int epoch = 0;
  double generator_loss = 0.0;
  double critic_loss = 0.0;
  double validity_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::uint64_t seed = 0;

  std::string to_json() const;  // one record per epoch
};

GeneratorModel make_generator(const DlgConfig& config);
CriticModel make_critic(const DlgConfig& config);

// Feature layout per element: one-hot class (3) then geometry (4).
constexpr int kElementFeatures = kNumElementClasses + 4;

diff::Tensor element_encode(const LayoutElement& v, GeneratorModel& model);

// Batched generator pass over padded latent features [B,N,7] with
// row_mask marking padded slots. Returns [B,N,7] where columns 0..2 are
// class logits and 3..6 decoded geometry (x,y,w,h on the page).
diff::Tensor generator_forward_batch(GeneratorModel& model,
                                     const diff::Tensor& latent,
                                     const std::vector<std::uint8_t>& row_mask);

PageLayout generator_forward(const PageLayout& latent, GeneratorModel& model);

// Batched critic pass over features [B,N,7] -> logits [B,1].
diff::Tensor critic_forward_batch(CriticModel& model, const diff::Tensor& x,
                                  const std::vector<std::uint8_t>& row_mask);

double critic_forward(const PageLayout& layout, CriticModel& model);

struct TrainedDlg {
  GeneratorModel generator;
  CriticModel critic;
  TrainReport report;
};

// Non-saturating logistic GAN, alternating critic/generator steps 1:1.
// Deterministic for a fixed config.seed. Corpus must hold >= 200 layouts.
TrainedDlg train_adversarial(const std::vector<PageLayout>& corpus,
                             const DlgConfig& config);

std::vector<PageLayout> sample_layouts(GeneratorModel& model, int count,
                                       const std::vector<double>& n_dist,
                                       std::uint64_t seed);

// Element-count histogram of a corpus, normalized.
std::vector<double> element_count_distribution(
    const std::vector<PageLayout>& corpus);

}  // namespace dlgdd::dlg
