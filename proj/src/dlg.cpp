#include "dlgdd/dlg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "dlgdd/common.hpp"
#include "json.hpp"

namespace dlgdd::dlg {

using diff::Tensor;

namespace {

void init_mlp(diff::ParameterStore& store, const std::string& prefix, int in,
              int hidden, int out, std::mt19937_64& rng) {
  auto init = [&rng](Tensor& t, int fan_in) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in),
                                                1.0 / std::sqrt(fan_in));
    for (double& v : t.values()) v = dist(rng);
  };
  init(store.create(prefix + ".w1", {in, hidden}), in);
  store.create(prefix + ".b1", {hidden});
  init(store.create(prefix + ".w2", {hidden, out}), hidden);
  store.create(prefix + ".b2", {out});
}

Tensor mlp(diff::ParameterStore& store, const std::string& prefix,
           const Tensor& x) {
  Tensor h = diff::relu(diff::affine(x, store.get(prefix + ".w1"),
                                     store.get(prefix + ".b1")));
  return diff::affine(h, store.get(prefix + ".w2"), store.get(prefix + ".b2"));
}

void element_features(const LayoutElement& e, double* out) {
  out[0] = out[1] = out[2] = 0.0;
  out[static_cast<int>(e.cls)] = 1.0;
  out[3] = e.x;
  out[4] = e.y;
  out[5] = e.w;
  out[6] = e.h;
}

// Padded feature batch [B,N,7] plus padding mask.
struct FeatureBatch {
  Tensor features;
  std::vector<std::uint8_t> row_mask;
  std::vector<int> counts;
};

FeatureBatch build_batch(const std::vector<const PageLayout*>& layouts) {
  int bs = static_cast<int>(layouts.size());
  int n = 1;
  for (const PageLayout* l : layouts)
    n = std::max(n, static_cast<int>(l->size()));
  std::vector<double> vals(static_cast<std::size_t>(bs) * n * kElementFeatures,
                           0.0);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(bs) * n, 1);
  std::vector<int> counts;
  for (int b = 0; b < bs; ++b) {
    const PageLayout& l = *layouts[static_cast<std::size_t>(b)];
    counts.push_back(static_cast<int>(l.size()));
    for (std::size_t i = 0; i < l.size(); ++i) {
      element_features(l.elements[i],
                       vals.data() +
                           (static_cast<std::size_t>(b) * n + i) *
                               kElementFeatures);
      mask[static_cast<std::size_t>(b) * n + i] = 0;
    }
  }
  FeatureBatch fb;
  fb.features = Tensor::from({bs, n, kElementFeatures}, std::move(vals));
  fb.row_mask = std::move(mask);
  fb.counts = std::move(counts);
  return fb;
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

nlohmann::json config_to_json(const DlgConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"heads", c.heads},
          {"hidden", c.hidden},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"lr", c.lr},
          {"clip_norm", c.clip_norm},
          {"overlap_penalty", c.overlap_penalty},
          {"seed", c.seed},
          {"validity_overlap_threshold", c.validity_overlap_threshold},
          {"validity_samples", c.validity_samples}};
}

DlgConfig config_from_json(const nlohmann::json& j) {
  DlgConfig c;
  c.embed_dim = j["embed_dim"].get<int>();
  c.heads = j["heads"].get<int>();
  c.hidden = j["hidden"].get<int>();
  c.epochs = j["epochs"].get<int>();
  c.batch = j["batch"].get<int>();
  c.lr = j["lr"].get<double>();
  c.clip_norm = j["clip_norm"].get<double>();
  c.seed = j["seed"].get<std::uint64_t>();
  c.overlap_penalty = j["overlap_penalty"].get<double>();
  c.validity_overlap_threshold = j["validity_overlap_threshold"].get<double>();
  c.validity_samples = j["validity_samples"].get<int>();
  return c;
}

}  // namespace

GeneratorModel make_generator(const DlgConfig& config) {
  if (config.embed_dim % config.heads != 0) {
    throw UsageError("dlg: embed_dim must be divisible by heads");
  }
  GeneratorModel m;
  m.config = config;
  std::mt19937_64 rng(derive_seed(config.seed, "dlg-generator-init"));
  init_mlp(m.params, "f", kElementFeatures, config.hidden, config.embed_dim,
           rng);
  diff::make_attention_params(m.params, "phi", config.embed_dim, config.hidden,
                              rng);
  init_mlp(m.params, "g", config.embed_dim, config.hidden, kElementFeatures,
           rng);
  m.n_dist.assign(kMaxElements + 1, 0.0);
  m.n_dist[4] = 1.0;
  return m;
}

CriticModel make_critic(const DlgConfig& config) {
  if (config.embed_dim % config.heads != 0) {
    throw UsageError("dlg: embed_dim must be divisible by heads");
  }
  CriticModel m;
  m.config = config;
  std::mt19937_64 rng(derive_seed(config.seed, "dlg-critic-init"));
  init_mlp(m.params, "enc", kElementFeatures, config.hidden, config.embed_dim,
           rng);
  diff::make_attention_params(m.params, "phi", config.embed_dim, config.hidden,
                              rng);
  init_mlp(m.params, "head", config.embed_dim, config.hidden, 1, rng);
  return m;
}

diff::Tensor element_encode(const LayoutElement& v, GeneratorModel& model) {
  std::vector<double> feats(kElementFeatures);
  element_features(v, feats.data());
  Tensor x = Tensor::from({1, kElementFeatures}, std::move(feats));
  Tensor e = mlp(model.params, "f", x);
  return diff::reshape(e, {model.config.embed_dim});
}

diff::Tensor generator_forward_batch(
    GeneratorModel& model, const diff::Tensor& latent,
    const std::vector<std::uint8_t>& row_mask) {
  Tensor e = mlp(model.params, "f", latent);
  diff::AttentionParams phi =
      diff::attention_params_from_store(model.params, "phi");
  Tensor e2 = diff::self_attention(e, phi, model.config.heads, row_mask);
  Tensor raw = mlp(model.params, "g", e2);

  Tensor logits = diff::slice_last(raw, 0, 3);
  // Squash map: x,y = sigmoid; w,h = w_min + (1-w_min) * sigmoid; then
  // clamp so that the box stays on the page.
  Tensor sx = diff::sigmoid(diff::slice_last(raw, 3, 4));
  Tensor sy = diff::sigmoid(diff::slice_last(raw, 4, 5));
  Tensor sw = diff::sigmoid(diff::slice_last(raw, 5, 6));
  Tensor sh = diff::sigmoid(diff::slice_last(raw, 6, 7));
  Tensor wmin = Tensor::full(sw.shape(), kMinBoxSize);
  Tensor ones = Tensor::full(sw.shape(), 1.0);
  Tensor w = diff::add(diff::scale(sw, 1.0 - kMinBoxSize), wmin);
  Tensor h = diff::add(diff::scale(sh, 1.0 - kMinBoxSize), wmin);
  Tensor x = diff::min_elem(sx, diff::sub(ones, w));
  Tensor y = diff::min_elem(sy, diff::sub(ones, h));
  return diff::concat_last({logits, x, y, w, h});
}

PageLayout generator_forward(const PageLayout& latent, GeneratorModel& model) {
  if (latent.size() > kMaxElements) {
    throw UsageError("generator_forward: layout exceeds " +
                     std::to_string(kMaxElements) + " elements");
  }
  if (latent.elements.empty()) {
    throw UsageError("generator_forward: empty layout");
  }
  std::vector<const PageLayout*> one{&latent};
  FeatureBatch fb = build_batch(one);
  Tensor out = generator_forward_batch(model, fb.features, fb.row_mask);
  PageLayout decoded;
  decoded.latent = false;
  int n = static_cast<int>(latent.size());
  const std::vector<double>& v = out.values();
  for (int i = 0; i < n; ++i) {
    const double* row = v.data() + static_cast<std::size_t>(i) * kElementFeatures;
    LayoutElement e;
    int best = 0;
    for (int c = 1; c < kNumElementClasses; ++c)
      if (row[c] > row[best]) best = c;
    e.cls = static_cast<ElementClass>(best);
    e.x = row[3];
    e.y = row[4];
    e.w = row[5];
    e.h = row[6];
    decoded.elements.push_back(e);
  }
  return decoded;
}

namespace {

// Per-layout pooled critic embedding [B,D]; the scoring head sits on top.
Tensor critic_pooled(CriticModel& model, const Tensor& x,
                     const std::vector<std::uint8_t>& row_mask) {
  Tensor e = mlp(model.params, "enc", x);
  diff::AttentionParams phi =
      diff::attention_params_from_store(model.params, "phi");
  Tensor e2 = diff::self_attention(e, phi, model.config.heads, row_mask);
  return diff::masked_mean_rows(e2, row_mask);
}

// Column means over the batch: [B,D] -> [1,D].
Tensor batch_mean(const Tensor& x) {
  int bs = x.shape()[0];
  Tensor ones = Tensor::full({1, bs}, 1.0 / bs);
  return diff::matmul(ones, x);
}

}  // namespace

diff::Tensor critic_forward_batch(CriticModel& model, const diff::Tensor& x,
                                  const std::vector<std::uint8_t>& row_mask) {
  return mlp(model.params, "head", critic_pooled(model, x, row_mask));
}

double critic_forward(const PageLayout& layout, CriticModel& model) {
  std::vector<const PageLayout*> one{&layout};
  FeatureBatch fb = build_batch(one);
  return critic_forward_batch(model, fb.features, fb.row_mask).values()[0];
}

std::vector<double> element_count_distribution(
    const std::vector<PageLayout>& corpus) {
  std::vector<double> dist(kMaxElements + 1, 0.0);
  for (const PageLayout& l : corpus) {
    std::size_t n = std::min<std::size_t>(l.size(), kMaxElements);
    dist[n] += 1.0;
  }
  double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  if (total > 0.0)
    for (double& d : dist) d /= total;
  return dist;
}

namespace {

int sample_count(const std::vector<double>& dist, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  double acc = 0.0;
  for (std::size_t k = 1; k < dist.size(); ++k) {
    acc += dist[k];
    if (r <= acc) return static_cast<int>(k);
  }
  for (std::size_t k = dist.size(); k-- > 1;) {
    if (dist[k] > 0.0) return static_cast<int>(k);
  }
  return 1;
}

// Latent feature batch: one-hot uniform class + N(0,1) geometry.
FeatureBatch build_latent_batch(const std::vector<double>& n_dist, int bs,
                                std::mt19937_64& rng) {
  std::vector<int> counts;
  int n = 1;
  for (int b = 0; b < bs; ++b) {
    counts.push_back(sample_count(n_dist, rng));
    n = std::max(n, counts.back());
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, kNumElementClasses - 1);
  std::vector<double> vals(static_cast<std::size_t>(bs) * n * kElementFeatures,
                           0.0);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(bs) * n, 1);
  for (int b = 0; b < bs; ++b) {
    for (int i = 0; i < counts[static_cast<std::size_t>(b)]; ++i) {
      double* row = vals.data() +
                    (static_cast<std::size_t>(b) * n + i) * kElementFeatures;
      row[cls(rng)] = 1.0;
      for (int k = 3; k < kElementFeatures; ++k) row[k] = gauss(rng);
      mask[static_cast<std::size_t>(b) * n + i] = 0;
    }
  }
  FeatureBatch fb;
  fb.features = Tensor::from({bs, n, kElementFeatures}, std::move(vals));
  fb.row_mask = std::move(mask);
  fb.counts = std::move(counts);
  return fb;
}

// Critic view of a generator output: class softmax + geometry.
Tensor critic_input_from_generator(const Tensor& gen_out) {
  Tensor soft = diff::softmax_last(diff::slice_last(gen_out, 0, 3));
  return diff::concat_last({soft, diff::slice_last(gen_out, 3, 7)});
}

// Geometry moments of a real batch, pooled like the fake side: per-layout
// mean over elements, then mean over layouts. Constant [1,4] tensors.
Tensor real_moment(const FeatureBatch& batch, bool second) {
  std::size_t bs = static_cast<std::size_t>(batch.features.shape()[0]);
  std::size_t rows = static_cast<std::size_t>(batch.features.shape()[1]);
  const std::vector<double>& v = batch.features.values();
  std::vector<double> out(4, 0.0);
  for (std::size_t b = 0; b < bs; ++b) {
    double layout[4] = {0, 0, 0, 0};
    int count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (batch.row_mask[b * rows + r]) continue;
      const double* g = v.data() + (b * rows + r) * kElementFeatures + 3;
      for (int k = 0; k < 4; ++k) layout[k] += second ? g[k] * g[k] : g[k];
      ++count;
    }
    for (int k = 0; k < 4; ++k) out[k] += layout[k] / count;
  }
  for (double& o : out) o /= static_cast<double>(bs);
  return Tensor::from({1, 4}, std::move(out));
}

Tensor real_moment1(const FeatureBatch& batch) {
  return real_moment(batch, false);
}
Tensor real_moment2(const FeatureBatch& batch) {
  return real_moment(batch, true);
}

double validity_rate(GeneratorModel& model, std::uint64_t seed) {
  int n = model.config.validity_samples;
  if (n <= 0) return 0.0;
  std::vector<PageLayout> samples =
      sample_layouts(model, n, model.n_dist, seed);
  int ok = 0;
  for (const PageLayout& l : samples)
    if (layout_is_valid(l, model.config.validity_overlap_threshold)) ++ok;
  return static_cast<double>(ok) / n;
}

}  // namespace

TrainedDlg train_adversarial(const std::vector<PageLayout>& corpus,
                             const DlgConfig& config) {
  if (corpus.size() < 200) {
    throw DataError("train_adversarial: corpus must hold >= 200 layouts, got " +
                    std::to_string(corpus.size()));
  }
  TrainedDlg out{make_generator(config), make_critic(config), {}};
  out.generator.n_dist = element_count_distribution(corpus);
  out.report.seed = config.seed;
  if (config.epochs == 0) return out;

  std::mt19937_64 rng(derive_seed(config.seed, "dlg-train"));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Instance noise on every critic input, annealed to zero: keeps the
  // critic from separating real and fake on brittle cues (e.g. exactly
  // one-hot class features) before the generator can catch up.
  auto noisy = [&](const Tensor& t, const std::vector<std::uint8_t>& row_mask,
                   double std_dev) {
    Tensor out = Tensor::from(t.shape(), t.values());
    std::vector<double>& v = out.values();
    std::size_t rows = row_mask.size();
    std::size_t width = v.size() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        double n = gauss(rng) * std_dev;
        if (!row_mask[r]) v[r * width + c] += n;
      }
    }
    return out;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double frac = static_cast<double>(epoch) / config.epochs;
    double noise_std = 0.1 * (1.0 - frac);
    // Linear learning-rate decay, and the adversarial term fades out over
    // the last third so training ends in a deterministic polish phase
    // (moments + overlap) instead of oscillating.
    double lr_t = config.lr * (1.0 - 0.9 * frac);
    double gan_w = frac <= 0.5 ? 1.0
                   : frac >= 0.7
                       ? 0.0
                       : (0.7 - frac) / 0.2;
    std::shuffle(order.begin(), order.end(), rng);
    double sum_c = 0.0, sum_g = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch)) {
      std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<const PageLayout*> chunk;
      for (std::size_t i = start; i < end; ++i)
        chunk.push_back(&corpus[order[i]]);
      int bs = static_cast<int>(chunk.size());
      if (bs < 2) continue;
      FeatureBatch real = build_batch(chunk);

      // Critic step on real vs detached fake.
      FeatureBatch latent_c = build_latent_batch(out.generator.n_dist, bs, rng);
      Tensor fake_graph = generator_forward_batch(
          out.generator, latent_c.features, latent_c.row_mask);
      Tensor fake_in_vals = critic_input_from_generator(fake_graph);
      Tensor fake_detached =
          noisy(fake_in_vals, latent_c.row_mask, noise_std);
      out.critic.params.zero_grads();
      Tensor d_real = critic_forward_batch(
          out.critic, noisy(real.features, real.row_mask, noise_std),
          real.row_mask);
      Tensor d_fake = critic_forward_batch(out.critic, fake_detached,
                                           latent_c.row_mask);
      Tensor loss_c = diff::add(diff::mean_all(diff::softplus(diff::scale(d_real, -1.0))),
                                diff::mean_all(diff::softplus(d_fake)));
      if (!std::isfinite(loss_c.item())) {
        throw NumericError("train_adversarial: non-finite critic loss at epoch " +
                           std::to_string(epoch));
      }
      loss_c.backward();
      out.critic.params.clip_grad_norm(config.clip_norm);
      // Slower critic keeps the pair in the useful regime instead of the
      // critic saturating within a few epochs.
      diff::adam_step(out.critic.params, lr_t * 0.25);

      // Generator step through the critic.
      FeatureBatch latent_g = build_latent_batch(out.generator.n_dist, bs, rng);
      out.generator.params.zero_grads();
      Tensor gen_out = generator_forward_batch(
          out.generator, latent_g.features, latent_g.row_mask);
      Tensor gen_in = critic_input_from_generator(gen_out);
      Tensor gen_noise = noisy(Tensor::zeros(gen_in.shape()),
                               latent_g.row_mask, noise_std);
      Tensor d_gen = critic_forward_batch(
          out.critic, diff::add(gen_in, gen_noise), latent_g.row_mask);
      // First and second geometry moments matched against the real batch
      // anchor the box-size distribution and counter mode collapse.
      Tensor fake_geom = diff::slice_last(gen_out, 3, 7);
      Tensor m1 = batch_mean(diff::masked_mean_rows(fake_geom,
                                                    latent_g.row_mask));
      Tensor m2 = batch_mean(diff::masked_mean_rows(
          diff::mul(fake_geom, fake_geom), latent_g.row_mask));
      Tensor md1 = diff::sub(m1, real_moment1(real));
      Tensor md2 = diff::sub(m2, real_moment2(real));
      Tensor moment_loss =
          diff::add(diff::mean_all(diff::mul(md1, md1)),
                    diff::mean_all(diff::mul(md2, md2)));
      // The overlap penalty ramps in so the geometry distribution settles
      // before non-overlap pressure dominates.
      double lambda = config.overlap_penalty *
                      std::min(1.0, (epoch + 1) /
                                        (0.3 * config.epochs + 1.0));
      // The polish phase leans harder on non-overlap once the
      // adversarial term has faded.
      if (gan_w == 0.0) lambda *= 3.0;
      Tensor pen = diff::overlap_area(fake_geom, latent_g.row_mask);
      Tensor gan_term = diff::scale(
          diff::mean_all(diff::softplus(diff::scale(d_gen, -1.0))), gan_w);
      Tensor loss_g =
          diff::add(diff::add(gan_term, diff::scale(moment_loss, 20.0)),
                    diff::scale(pen, lambda));
      if (!std::isfinite(loss_g.item())) {
        throw NumericError(
            "train_adversarial: non-finite generator loss at epoch " +
            std::to_string(epoch));
      }
      loss_g.backward();
      out.generator.params.clip_grad_norm(config.clip_norm);
      diff::adam_step(out.generator.params, lr_t);

      sum_c += loss_c.item();
      sum_g += loss_g.item();
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.critic_loss = batches ? sum_c / batches : 0.0;
    rec.generator_loss = batches ? sum_g / batches : 0.0;
    rec.validity_rate = validity_rate(
        out.generator, derive_seed(config.seed, "dlg-validity",
                                   static_cast<std::uint64_t>(epoch)));
    out.report.epochs.push_back(rec);
  }
  return out;
}

std::vector<PageLayout> sample_layouts(GeneratorModel& model, int count,
                                       const std::vector<double>& n_dist,
                                       std::uint64_t seed) {
  std::vector<PageLayout> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(seed, "dlg-sample",
                                    static_cast<std::uint64_t>(i)));
    int n = sample_count(n_dist, rng);
    PageLayout latent;
    latent.latent = true;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, kNumElementClasses - 1);
    for (int k = 0; k < n; ++k) {
      LayoutElement e;
      e.cls = static_cast<ElementClass>(cls(rng));
      e.x = gauss(rng);
      e.y = gauss(rng);
      e.w = gauss(rng);
      e.h = gauss(rng);
      latent.elements.push_back(e);
    }
    out.push_back(generator_forward(latent, model));
  }
  return out;
}

std::string TrainReport::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const EpochRecord& r : epochs) {
    recs.push_back({{"epoch", r.epoch},
                    {"generator_loss", r.generator_loss},
                    {"critic_loss", r.critic_loss},
                    {"validity_rate", r.validity_rate}});
  }
  return nlohmann::json{{"seed", seed}, {"epochs", recs}}.dump(2);
}

void GeneratorModel::save(const std::string& path) const {
  nlohmann::json doc{{"format_version", 1},
                     {"kind", "dlg-generator"},
                     {"config", config_to_json(config)},
                     {"n_dist", n_dist},
                     {"parameters", params_to_json(params)}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot write checkpoint '" + path + "'");
  f << doc.dump() << "\n";
}

GeneratorModel GeneratorModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("kind", "") != "dlg-generator") {
    throw DataError("checkpoint '" + path + "' is not a generator checkpoint");
  }
  GeneratorModel m;
  m.config = config_from_json(doc["config"]);
  m.n_dist = doc["n_dist"].get<std::vector<double>>();
  params_from_json(m.params, doc["parameters"]);
  return m;
}

void CriticModel::save(const std::string& path) const {
  nlohmann::json doc{{"format_version", 1},
                     {"kind", "dlg-critic"},
                     {"config", config_to_json(config)},
                     {"parameters", params_to_json(params)}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot write checkpoint '" + path + "'");
  f << doc.dump() << "\n";
}

CriticModel CriticModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("kind", "") != "dlg-critic") {
    throw DataError("checkpoint '" + path + "' is not a critic checkpoint");
  }
  CriticModel m;
  m.config = config_from_json(doc["config"]);
  params_from_json(m.params, doc["parameters"]);
  return m;
}

}  // namespace dlgdd::dlg
