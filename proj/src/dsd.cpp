#include "dlgdd/dsd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dlgdd/common.hpp"
#include "json.hpp"

namespace dlgdd::dsd {

using diff::Tensor;

namespace {

constexpr int kConv1 = 8, kConv2 = 16, kConv3 = 32;
constexpr int kFlat = kConv3 * (kThumbSize / 8) * (kThumbSize / 8);

void init_tensor(Tensor& t, int fan_in, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in),
                                              1.0 / std::sqrt(fan_in));
  for (double& v : t.values()) v = dist(rng);
}

// Forward pass over a thumbnail batch [B, 1, 128, 128] -> unit rows [B, 64].
Tensor encoder_forward(StyleEncoder& enc, const Tensor& x) {
  diff::ParameterStore& p = enc.params;
  Tensor h1 = diff::relu(diff::conv2d_s2(x, p.get("c1.w"), p.get("c1.b")));
  Tensor h2 = diff::relu(diff::conv2d_s2(h1, p.get("c2.w"), p.get("c2.b")));
  Tensor h3 = diff::relu(diff::conv2d_s2(h2, p.get("c3.w"), p.get("c3.b")));
  Tensor flat = diff::reshape(h3, {x.shape()[0], kFlat});
  Tensor z = diff::affine(flat, p.get("proj.w"), p.get("proj.b"));
  return diff::row_l2_normalize(z);
}

Tensor thumbs_to_tensor(const std::vector<std::vector<double>>& thumbs) {
  int bs = static_cast<int>(thumbs.size());
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(bs) * kThumbSize * kThumbSize);
  for (const auto& t : thumbs) {
    if (t.size() != static_cast<std::size_t>(kThumbSize) * kThumbSize) {
      throw UsageError("embed: thumbnail has wrong size");
    }
    vals.insert(vals.end(), t.begin(), t.end());
  }
  return Tensor::from({bs, 1, kThumbSize, kThumbSize}, std::move(vals));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

nlohmann::json params_to_json(const diff::ParameterStore& store) {
  nlohmann::json out = nlohmann::json::object();
  for (const std::string& name : store.names()) {
    const Tensor& t = store.get(name);
    out[name] = {{"shape", t.shape()}, {"values", t.values()}};
  }
  return out;
}

void params_from_json(diff::ParameterStore& store, const nlohmann::json& j) {
  for (const auto& [name, entry] : j.items()) {
    Tensor& t = store.create(name, entry["shape"].get<std::vector<int>>());
    t.values() = entry["values"].get<std::vector<double>>();
  }
}

}  // namespace

std::vector<double> preprocess(const Image& page) {
  if (page.width < 64 || page.height < 64) {
    throw DataError("preprocess: page must be at least 64x64, got " +
                    std::to_string(page.width) + "x" +
                    std::to_string(page.height));
  }
  return area_average_gray(page, kThumbSize, kThumbSize);
}

StyleEncoder make_encoder(const DsdConfig& config) {
  StyleEncoder enc;
  enc.config = config;
  std::mt19937_64 rng(derive_seed(config.seed, "dsd-init"));
  diff::ParameterStore& p = enc.params;
  init_tensor(p.create("c1.w", {kConv1, 1, 3, 3}), 9, rng);
  p.create("c1.b", {kConv1});
  init_tensor(p.create("c2.w", {kConv2, kConv1, 3, 3}), kConv1 * 9, rng);
  p.create("c2.b", {kConv2});
  init_tensor(p.create("c3.w", {kConv3, kConv2, 3, 3}), kConv2 * 9, rng);
  p.create("c3.b", {kConv3});
  init_tensor(p.create("proj.w", {kFlat, kEmbedDim}), kFlat, rng);
  p.create("proj.b", {kEmbedDim});
  return enc;
}

std::vector<std::vector<double>> embed_thumbs(
    StyleEncoder& encoder, const std::vector<std::vector<double>>& thumbs) {
  std::vector<std::vector<double>> out;
  out.reserve(thumbs.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < thumbs.size(); start += kChunk) {
    std::size_t end = std::min(thumbs.size(), start + kChunk);
    std::vector<std::vector<double>> chunk(thumbs.begin() + start,
                                           thumbs.begin() + end);
    Tensor z = encoder_forward(encoder, thumbs_to_tensor(chunk));
    const std::vector<double>& v = z.values();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(i * kEmbedDim),
                       v.begin() + static_cast<std::ptrdiff_t>((i + 1) * kEmbedDim));
    }
  }
  return out;
}

std::vector<double> embed(StyleEncoder& encoder, const Image& page) {
  return embed_thumbs(encoder, {preprocess(page)})[0];
}

TrainedDsd train_dsd(const std::vector<Image>& pos_pages,
                     const std::vector<Image>& neg_pages,
                     const DsdConfig& config) {
  if (pos_pages.size() < 50 || neg_pages.size() < 50) {
    throw DataError("train_dsd: each class needs >= 50 pages, got " +
                    std::to_string(pos_pages.size()) + " positive / " +
                    std::to_string(neg_pages.size()) + " negative");
  }
  TrainedDsd out{make_encoder(config), {}};
  out.curve.seed = config.seed;
  if (config.epochs == 0) return out;

  std::vector<std::vector<double>> thumbs;
  std::vector<int> labels;
  for (const Image& p : pos_pages) {
    thumbs.push_back(preprocess(p));
    labels.push_back(1);
  }
  for (const Image& p : neg_pages) {
    thumbs.push_back(preprocess(p));
    labels.push_back(0);
  }

  std::mt19937_64 rng(derive_seed(config.seed, "dsd-train"));
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < thumbs.size(); ++i) {
    (labels[i] ? pos_idx : neg_idx).push_back(i);
  }
  int half = std::max(2, config.batch / 2);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(pos_idx.begin(), pos_idx.end(), rng);
    std::shuffle(neg_idx.begin(), neg_idx.end(), rng);
    std::size_t steps =
        std::min(pos_idx.size(), neg_idx.size()) / static_cast<std::size_t>(half);
    steps = std::max<std::size_t>(steps, 1);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::vector<double>> batch;
      std::vector<int> batch_labels;
      for (int j = 0; j < half; ++j) {
        std::size_t pi = (s * static_cast<std::size_t>(half) + j) % pos_idx.size();
        std::size_t ni = (s * static_cast<std::size_t>(half) + j) % neg_idx.size();
        batch.push_back(thumbs[pos_idx[pi]]);
        batch_labels.push_back(1);
        batch.push_back(thumbs[neg_idx[ni]]);
        batch_labels.push_back(0);
      }
      out.encoder.params.zero_grads();
      Tensor z = encoder_forward(out.encoder, thumbs_to_tensor(batch));
      Tensor loss = diff::supcon_loss(z, batch_labels, config.temperature);
      if (!std::isfinite(loss.item())) {
        throw NumericError("train_dsd: non-finite loss at epoch " +
                           std::to_string(epoch));
      }
      loss.backward();
      out.encoder.params.clip_grad_norm(config.clip_norm);
      diff::adam_step(out.encoder.params, config.lr);
      loss_sum += loss.item();
      ++batches;
    }
    out.curve.epoch_loss.push_back(loss_sum / batches);
  }
  return out;
}

double set_similarity(const std::vector<double>& e,
                      const std::vector<std::vector<double>>& S, int k) {
  if (S.empty()) throw UsageError("set_similarity: empty embedding set");
  if (k <= 0) throw UsageError("set_similarity: k must be positive");
  std::vector<double> sims;
  sims.reserve(S.size());
  for (const auto& s : S) {
    if (s.size() != e.size()) {
      throw UsageError("set_similarity: embedding dimension mismatch");
    }
    sims.push_back(dot(e, s));
  }
  int kk = std::min<int>(k, static_cast<int>(sims.size()));
  std::partial_sort(sims.begin(), sims.begin() + kk, sims.end(),
                    std::greater<double>());
  return std::accumulate(sims.begin(), sims.begin() + kk, 0.0) / kk;
}

ScoreReport assess_embedding(const std::vector<double>& e,
                             const StyleCorpus& corpus, double tau) {
  if (corpus.positives.empty() || corpus.negatives.empty()) {
    throw UsageError("assess: style corpus must have both positives and negatives");
  }
  ScoreReport r;
  r.s_plus = set_similarity(e, corpus.positives, kDefaultTopK);
  r.s_minus = set_similarity(e, corpus.negatives, kDefaultTopK);
  r.e_min = std::min(r.s_plus, r.s_minus);
  r.margin = r.s_plus - r.s_minus;
  r.accepted = r.margin > tau;
  return r;
}

ScoreReport assess(const Image& page, StyleEncoder& encoder,
                   const StyleCorpus& corpus, double tau) {
  return assess_embedding(embed(encoder, page), corpus, tau);
}

FilterResult quality_filter(const std::vector<Image>& pages,
                            StyleEncoder& encoder, const StyleCorpus& corpus,
                            double tau) {
  FilterResult out;
  if (pages.empty()) {
    out.empty_input = true;
    return out;
  }
  std::vector<std::vector<double>> thumbs;
  thumbs.reserve(pages.size());
  for (const Image& p : pages) thumbs.push_back(preprocess(p));
  std::vector<std::vector<double>> embeddings = embed_thumbs(encoder, thumbs);
  for (std::size_t i = 0; i < pages.size(); ++i) {
    ScoreReport r = assess_embedding(embeddings[i], corpus, tau);
    (r.accepted ? out.accepted : out.rejected).push_back(i);
    out.reports.push_back(r);
  }
  out.rate = static_cast<double>(out.accepted.size()) / pages.size();
  return out;
}

FilterResult cross_domain_select(const std::vector<Image>& pages,
                                 StyleEncoder& encoder,
                                 const std::vector<Image>& target_pages,
                                 const std::vector<Image>& neg_pages,
                                 double tau) {
  if (target_pages.empty()) {
    throw UsageError("cross_domain_select: empty target page set");
  }
  if (neg_pages.empty()) {
    throw UsageError("cross_domain_select: empty negative page set");
  }
  StyleCorpus corpus;
  std::vector<std::vector<double>> tt, nt;
  for (const Image& p : target_pages) tt.push_back(preprocess(p));
  for (const Image& p : neg_pages) nt.push_back(preprocess(p));
  corpus.positives = embed_thumbs(encoder, tt);
  corpus.negatives = embed_thumbs(encoder, nt);
  return quality_filter(pages, encoder, corpus, tau);
}

std::string score_reports_to_text(const std::vector<ScoreReport>& reports) {
  std::ostringstream os;
  os << "index\ts_plus\ts_minus\te_min\tmargin\taccepted\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const ScoreReport& r = reports[i];
    os << i << '\t' << r.s_plus << '\t' << r.s_minus << '\t' << r.e_min << '\t'
       << r.margin << '\t' << (r.accepted ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string TrainCurve::to_json() const {
  return nlohmann::json{{"seed", seed}, {"epoch_loss", epoch_loss}}.dump(2);
}

void StyleEncoder::save(const std::string& path) const {
  nlohmann::json doc{{"format_version", 1},
                     {"kind", "dsd-encoder"},
                     {"config",
                      {{"epochs", config.epochs},
                       {"batch", config.batch},
                       {"lr", config.lr},
                       {"temperature", config.temperature},
                       {"seed", config.seed},
                       {"clip_norm", config.clip_norm}}},
                     {"parameters", params_to_json(params)}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot write checkpoint '" + path + "'");
  f << doc.dump() << "\n";
}

StyleEncoder StyleEncoder::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("kind", "") != "dsd-encoder") {
    throw DataError("checkpoint '" + path + "' is not a style encoder checkpoint");
  }
  StyleEncoder enc;
  const nlohmann::json& c = doc["config"];
  enc.config.epochs = c["epochs"].get<int>();
  enc.config.batch = c["batch"].get<int>();
  enc.config.lr = c["lr"].get<double>();
  enc.config.temperature = c["temperature"].get<double>();
  enc.config.seed = c["seed"].get<std::uint64_t>();
  enc.config.clip_norm = c["clip_norm"].get<double>();
  params_from_json(enc.params, doc["parameters"]);
  return enc;
}

}  // namespace dlgdd::dsd
