// Acceptance gate: one pass/fail line per criterion, exit 0 only when
// every criterion holds. Each check is oracle-based and self-contained.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <vector>

#include "dlgdd/common.hpp"
#include "dlgdd/dlg.hpp"
#include "dlgdd/dsd.hpp"
#include "dlgdd/layout.hpp"
#include "dlgdd/metrics.hpp"
#include "dlgdd/nn.hpp"
#include "dlgdd/pipeline.hpp"
#include "dlgdd/render.hpp"
#include "dlgdd/tensor.hpp"

#include "support/stats.hpp"

using namespace dlgdd;
using diff::Tensor;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed,
                     double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> vals(n);
  for (double& v : vals) v = u(rng);
  return Tensor::from(std::move(shape), std::move(vals), true);
}

Tensor scalarize(const Tensor& t, std::uint64_t seed = 31337) {
  Tensor w = random_tensor(t.shape(), seed, 0.3, 1.7);
  Tensor wc = Tensor::from(w.shape(), w.values());
  return diff::sum_all(diff::mul(t, wc));
}

// ---------------------------------------------------------------- 1
Check check_autodiff() {
  Check c;
  const double tol = 1e-4;
  auto gc = [&](const std::function<Tensor(const Tensor&)>& fn,
                const Tensor& x, const char* name) {
    double err = diff::grad_check(fn, x);
    c.require(err < tol, std::string(name) + " grad error " +
                             std::to_string(err));
  };

  Tensor a = random_tensor({3, 4}, 1);
  Tensor b = random_tensor({3, 4}, 2);
  Tensor bias = random_tensor({4}, 3);
  gc([&](const Tensor& x) { return scalarize(diff::add(x, b)); }, a, "add");
  gc([&](const Tensor& x) { return scalarize(diff::sub(b, x)); }, a, "sub");
  gc([&](const Tensor& x) { return scalarize(diff::mul(x, b)); }, a, "mul");
  gc([&](const Tensor& x) { return scalarize(diff::scale(x, -1.7)); }, a,
     "scale");
  gc([&](const Tensor& x) { return scalarize(diff::add_bias(x, bias)); }, a,
     "add_bias");
  gc([&](const Tensor& x) { return scalarize(diff::min_elem(x, b)); }, a,
     "min_elem");
  gc([&](const Tensor& x) { return scalarize(diff::reshape(x, {4, 3})); }, a,
     "reshape");
  gc([&](const Tensor& x) { return scalarize(diff::slice_last(x, 1, 3)); }, a,
     "slice_last");
  gc([&](const Tensor& x) { return scalarize(diff::concat_last({x, b})); }, a,
     "concat_last");
  gc([&](const Tensor& x) { return scalarize(diff::transpose_last(x)); }, a,
     "transpose_last");

  Tensor off = random_tensor({3, 4}, 4, 0.2, 1.4);  // away from relu kink
  gc([&](const Tensor& x) { return scalarize(diff::relu(x)); }, off, "relu");
  gc([&](const Tensor& x) { return scalarize(diff::sigmoid(x)); }, a,
     "sigmoid");
  gc([&](const Tensor& x) { return scalarize(diff::softplus(x)); }, a,
     "softplus");
  gc([&](const Tensor& x) { return scalarize(diff::softmax_last(x)); }, a,
     "softmax_last");
  gc([&](const Tensor& x) { return scalarize(diff::row_l2_normalize(x)); }, a,
     "row_l2_normalize");

  std::vector<std::uint8_t> cmask = {0, 1, 0, 0, 0, 0, 1, 0};
  Tensor a3 = random_tensor({2, 3, 4}, 5);
  gc([&](const Tensor& x) {
    return scalarize(diff::softmax_last_masked(x, cmask));
  },
     a3, "softmax_last_masked");

  Tensor gamma = random_tensor({4}, 6, 0.5, 1.5);
  Tensor beta = random_tensor({4}, 7);
  gc([&](const Tensor& x) {
    return scalarize(diff::layer_norm_last(x, gamma, beta));
  },
     a, "layer_norm_last");

  Tensor m1 = random_tensor({3, 5}, 8);
  Tensor m2 = random_tensor({5, 4}, 9);
  gc([&](const Tensor& x) { return scalarize(diff::matmul(x, m2)); }, m1,
     "matmul_lhs");
  gc([&](const Tensor& x) { return scalarize(diff::matmul(m1, x)); }, m2,
     "matmul_rhs");
  Tensor b1 = random_tensor({2, 3, 4}, 10);
  Tensor b2 = random_tensor({2, 4, 2}, 11);
  gc([&](const Tensor& x) { return scalarize(diff::bmm(x, b2)); }, b1, "bmm");

  std::vector<std::uint8_t> rmask = {0, 1, 0, 0, 0, 1};
  gc([&](const Tensor& x) {
    return scalarize(diff::mask_rows_zero(x, rmask));
  },
     a3, "mask_rows_zero");
  gc([&](const Tensor& x) {
    return scalarize(diff::masked_mean_rows(x, rmask));
  },
     a3, "masked_mean_rows");

  Tensor ximg = random_tensor({2, 2, 6, 6}, 12);
  Tensor wconv = random_tensor({3, 2, 3, 3}, 13);
  Tensor bconv = random_tensor({3}, 14);
  gc([&](const Tensor& x) {
    return scalarize(diff::conv2d_s2(x, wconv, bconv));
  },
     ximg, "conv2d_s2_x");
  gc([&](const Tensor& w) {
    return scalarize(diff::conv2d_s2(ximg, w, bconv));
  },
     wconv, "conv2d_s2_w");

  Tensor wa = random_tensor({4, 5}, 15);
  Tensor ba = random_tensor({5}, 26);
  gc([&](const Tensor& x) { return scalarize(diff::affine(x, wa, ba)); },
     random_tensor({3, 4}, 16), "affine");

  diff::ParameterStore store;
  std::mt19937_64 arng(17);
  auto aparams = diff::make_attention_params(store, "blk", 8, 16, arng);
  std::vector<std::uint8_t> amask = {0, 0, 1, 0, 0, 0};
  gc([&](const Tensor& x) {
    return scalarize(diff::self_attention(x, aparams, 2, amask));
  },
     random_tensor({2, 3, 8}, 18), "self_attention");

  std::vector<double> targets = {0.0, 1.0, 0.3, 0.9};
  gc([&](const Tensor& x) { return diff::bce_with_logits(x, targets); },
     random_tensor({4}, 19, -2.0, 2.0), "bce_with_logits");

  // DSD loss: contrastive objective through the conv->affine->normalize
  // chain the style encoder uses.
  std::vector<int> labels = {0, 1, 0, 1};
  Tensor thumbs = random_tensor({4, 1, 8, 8}, 20);
  Tensor cw = random_tensor({2, 1, 3, 3}, 21, -0.4, 0.4);
  Tensor cb = random_tensor({2}, 22, -0.1, 0.1);
  Tensor pw = random_tensor({2 * 4 * 4, 6}, 23, -0.4, 0.4);
  Tensor pb = random_tensor({6}, 24, -0.1, 0.1);
  gc([&](const Tensor& x) {
    Tensor h = diff::relu(diff::conv2d_s2(x, cw, cb));
    Tensor flat = diff::reshape(h, {4, 2 * 4 * 4});
    Tensor z = diff::row_l2_normalize(diff::affine(flat, pw, pb));
    return diff::supcon_loss(z, labels, 0.2);
  },
     thumbs, "dsd_loss_chain");

  // DLG loss: generator decode -> critic score -> non-saturating GAN
  // objective plus the overlap penalty, differentiated back to the latent.
  dlg::DlgConfig tiny;
  tiny.embed_dim = 8;
  tiny.heads = 2;
  tiny.hidden = 16;
  tiny.seed = 77;
  auto gen = dlg::make_generator(tiny);
  auto critic = dlg::make_critic(tiny);
  std::vector<std::uint8_t> gmask = {0, 0, 0, 0, 1, 0};
  gc([&](const Tensor& latent) {
    Tensor fake = dlg::generator_forward_batch(gen, latent, gmask);
    Tensor score = dlg::critic_forward_batch(critic, fake, gmask);
    Tensor gan = diff::mean_all(diff::softplus(diff::scale(score, -1.0)));
    Tensor geom = diff::slice_last(fake, kNumElementClasses,
                                   dlg::kElementFeatures);
    return diff::add(gan, diff::overlap_area(geom, gmask));
  },
     random_tensor({2, 3, dlg::kElementFeatures}, 25), "dlg_loss_chain");

  return c;
}

// ---------------------------------------------------------------- 2
Check check_decoration_constraints() {
  Check c;
  auto assets = ded::AssetLibrary::builtin(0);
  std::vector<PageLayout> layouts =
      grammar_generate_corpus(GrammarStyle::academic, 500, 101);
  auto more = grammar_generate_corpus(GrammarStyle::magazine, 500, 102);
  layouts.insert(layouts.end(), more.begin(), more.end());

  auto pages = ded::decorate_batch(layouts, assets, 400, 520, 9000);

  long image_picks = 0, fallbacks = 0;
  for (const auto& page : pages) {
    for (const auto& entry : page.log) {
      const LayoutElement& e = page.layout.elements[entry.element_index];
      ded::PixelRect r = ded::element_pixel_rect(e, 400, 520);
      if (entry.is_text) {
        c.require(entry.style.size_px >= 8 &&
                      entry.style.size_px <= r.h() / 2,
                  "font size outside [8, h/2]");
        c.require(entry.style.precrop_w >= r.w() &&
                      entry.style.precrop_h >= r.h(),
                  "pre-crop extent does not cover the box");
      } else {
        ++image_picks;
        if (entry.crop.fallback) {
          ++fallbacks;
        } else {
          const Image& img = assets.images[entry.crop.image_index];
          bool band = img.width >= r.w() &&
                      img.width <= static_cast<int>(std::floor(1.5 * r.w())) &&
                      img.height >= r.h() && img.height <= 2 * r.h();
          c.require(band, "non-fallback selection outside the size band");
          c.require(entry.crop.src_x >= 0 &&
                        entry.crop.src_x + r.w() <= img.width &&
                        entry.crop.src_y >= 0 &&
                        entry.crop.src_y + r.h() <= img.height,
                    "crop escapes the source image");
        }
      }
    }
  }
  c.require(image_picks > 0, "no image selections exercised");
  double rate = static_cast<double>(fallbacks) / image_picks;
  c.require(rate < 0.2, "fallback rate " + std::to_string(rate));
  if (c.ok) {
    c.detail = "fallback rate " + std::to_string(rate) + " over " +
               std::to_string(image_picks) + " picks";
  }
  return c;
}

// ---------------------------------------------------------------- 3
Check check_mask_fidelity() {
  Check c;
  auto assets = ded::AssetLibrary::builtin(0);
  std::vector<PageLayout> pool =
      grammar_generate_corpus(GrammarStyle::academic, 200, 201);
  auto extra = grammar_generate_corpus(GrammarStyle::magazine, 200, 202);
  pool.insert(pool.end(), extra.begin(), extra.end());
  std::vector<PageLayout> chosen;
  for (const auto& l : pool) {
    if (!l.elements.empty() && validate_layout(l, 0.0).empty())
      chosen.push_back(l);
    if (chosen.size() == 200) break;
  }
  c.require(chosen.size() == 200, "could not assemble 200 disjoint layouts");
  if (!c.ok) return c;

  auto pages = ded::decorate_batch(chosen, assets, 400, 520, 3000);
  for (std::size_t p = 0; p < pages.size() && c.ok; ++p) {
    std::vector<int> expected(400 * 520, 0);
    for (const auto& e : chosen[p].elements) {
      ded::PixelRect r = ded::element_pixel_rect(e, 400, 520);
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
          expected[y * 400 + x] = ded::mask_code(e.cls);
    }
    const Image& mask = pages[p].mask;
    for (int y = 0; y < 520 && c.ok; ++y)
      for (int x = 0; x < 400; ++x)
        if (mask.at(x, y, 0) != expected[y * 400 + x]) {
          c.require(false, "mask mismatch on page " + std::to_string(p));
          break;
        }
  }
  return c;
}

// ---------------------------------------------------------------- 4
Check check_dlg_sanity() {
  Check c;
  auto corpus = grammar_generate_corpus(GrammarStyle::academic, 2000, 42);
  dlg::DlgConfig cfg;
  cfg.epochs = 140;
  cfg.seed = 2;
  cfg.validity_samples = 50;

  double t0 = now_seconds();
  auto trained = dlg::train_adversarial(corpus, cfg);
  double train_secs = now_seconds() - t0;
  c.require(train_secs < 900, "training took " + std::to_string(train_secs) +
                                  "s (limit 900)");

  auto samples =
      dlg::sample_layouts(trained.generator, 1000, trained.generator.n_dist,
                          derive_seed(cfg.seed, "acceptance-sample"));
  int valid = 0;
  for (const auto& l : samples)
    if (validate_layout(l, cfg.validity_overlap_threshold).empty()) ++valid;
  double validity = valid / 1000.0;
  c.require(validity >= 0.95, "validity " + std::to_string(validity));

  auto areas = [](const std::vector<PageLayout>& ls) {
    std::vector<double> out;
    for (const auto& l : ls)
      for (const auto& e : l.elements) out.push_back(e.w * e.h);
    return out;
  };
  // Uniform-random baseline with the same element-count profile.
  std::mt19937_64 urng(515151);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<PageLayout> uniform;
  for (const auto& s : samples) {
    PageLayout l;
    for (std::size_t k = 0; k < s.size(); ++k) {
      LayoutElement e;
      e.w = kMinBoxSize + (1.0 - kMinBoxSize) * u01(urng);
      e.h = kMinBoxSize + (1.0 - kMinBoxSize) * u01(urng);
      e.x = u01(urng) * (1.0 - e.w);
      e.y = u01(urng) * (1.0 - e.h);
      l.elements.push_back(e);
    }
    uniform.push_back(std::move(l));
  }
  double w_model = teststats::wasserstein1(areas(samples), areas(corpus));
  double w_uniform = teststats::wasserstein1(areas(uniform), areas(corpus));
  c.require(w_model < w_uniform,
            "area distance " + std::to_string(w_model) +
                " not below uniform baseline " + std::to_string(w_uniform));
  if (c.ok) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "validity %.3f, W1 %.4f vs uniform %.4f, %.0fs",
                  validity, w_model, w_uniform, train_secs);
    c.detail = buf;
  }
  return c;
}

// ---------------------------------------------------------------- 5 & 6
std::vector<Image> render_style(GrammarStyle style, int count,
                                std::uint64_t seed,
                                const ded::AssetLibrary& assets) {
  auto layouts = grammar_generate_corpus(style, count, seed);
  auto pages = ded::decorate_batch(layouts, assets, 256, 332,
                                   derive_seed(seed, "style-render"));
  std::vector<Image> out;
  out.reserve(pages.size());
  for (auto& p : pages) out.push_back(std::move(p.page));
  return out;
}

Check check_dsd_discrimination() {
  Check c;
  auto assets = ded::AssetLibrary::builtin(0);
  double t0 = now_seconds();
  auto pos = render_style(GrammarStyle::academic, 250, 601, assets);
  auto neg = render_style(GrammarStyle::magazine, 250, 602, assets);
  std::vector<Image> pos_train(pos.begin(), pos.begin() + 200);
  std::vector<Image> neg_train(neg.begin(), neg.begin() + 200);
  std::vector<Image> pos_hold(pos.begin() + 200, pos.end());
  std::vector<Image> neg_hold(neg.begin() + 200, neg.end());

  int passing = 0;
  std::string accs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    dsd::DsdConfig cfg;
    cfg.epochs = 10;
    cfg.seed = seed;
    auto trained = dsd::train_dsd(pos_train, neg_train, cfg);

    auto centroid = [&](const std::vector<Image>& pages) {
      std::vector<double> m(dsd::kEmbedDim, 0.0);
      for (const Image& p : pages) {
        auto e = dsd::embed(trained.encoder, p);
        for (int d = 0; d < dsd::kEmbedDim; ++d) m[d] += e[d] / pages.size();
      }
      return m;
    };
    auto cp = centroid(pos_train);
    auto cn = centroid(neg_train);
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    };
    int correct = 0;
    for (const Image& p : pos_hold) {
      auto e = dsd::embed(trained.encoder, p);
      if (dot(e, cp) > dot(e, cn)) ++correct;
    }
    for (const Image& p : neg_hold) {
      auto e = dsd::embed(trained.encoder, p);
      if (dot(e, cn) > dot(e, cp)) ++correct;
    }
    double acc = static_cast<double>(correct) /
                 (pos_hold.size() + neg_hold.size());
    if (acc >= 0.90) ++passing;
    char buf[16];
    std::snprintf(buf, sizeof(buf), " %.2f", acc);
    accs += buf;
  }
  double secs = now_seconds() - t0;
  c.require(passing >= 4, "only " + std::to_string(passing) +
                              " of 5 seeds reached 0.90 (accs:" + accs + ")");
  c.require(secs < 600, "took " + std::to_string(secs) + "s (limit 600)");
  if (c.ok)
    c.detail = std::to_string(passing) + "/5 seeds, accs:" + accs + ", " +
               std::to_string(static_cast<int>(secs)) + "s";
  return c;
}

Check check_cross_domain_direction() {
  Check c;
  auto assets = ded::AssetLibrary::builtin(0);
  auto target_train = render_style(GrammarStyle::academic, 100, 701, assets);
  auto other_train = render_style(GrammarStyle::magazine, 100, 702, assets);
  dsd::DsdConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 7;
  auto trained = dsd::train_dsd(target_train, other_train, cfg);

  auto target_corpus = render_style(GrammarStyle::academic, 50, 703, assets);
  auto neg_corpus = render_style(GrammarStyle::magazine, 50, 704, assets);
  auto eval_a = render_style(GrammarStyle::academic, 160, 705, assets);
  auto eval_b = render_style(GrammarStyle::magazine, 160, 706, assets);
  std::vector<Image> mixed;
  for (auto& im : eval_a) mixed.push_back(std::move(im));
  for (auto& im : eval_b) mixed.push_back(std::move(im));

  auto result = dsd::cross_domain_select(mixed, trained.encoder,
                                         target_corpus, neg_corpus, 0.0);
  c.require(!result.accepted.empty() && !result.rejected.empty(),
            "selection did not split the pool");
  if (!c.ok) return c;

  std::vector<double> acc_sim, rej_sim;
  for (std::size_t i : result.accepted)
    acc_sim.push_back(result.reports[i].s_plus);
  for (std::size_t i : result.rejected)
    rej_sim.push_back(result.reports[i].s_plus);
  double mean_acc = 0.0, mean_rej = 0.0;
  for (double v : acc_sim) mean_acc += v / acc_sim.size();
  for (double v : rej_sim) mean_rej += v / rej_sim.size();
  c.require(mean_acc > mean_rej, "accepted mean not above rejected mean");
  double p = teststats::permutation_pvalue(acc_sim, rej_sim, 20000);
  c.require(p < 0.01, "p-value " + std::to_string(p));
  if (c.ok) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "%zu accepted / %zu rejected, mean sim %.3f vs %.3f, p %.5f",
                  acc_sim.size(), rej_sim.size(), mean_acc, mean_rej, p);
    c.detail = buf;
  }
  return c;
}

// ---------------------------------------------------------------- 7
Check check_pipeline_protocol() {
  Check c;
  pipeline::PipelineConfig cfg;
  cfg.corpus_size = 500;
  cfg.dlg.epochs = 120;
  cfg.dlg.validity_samples = 50;
  cfg.dsd_quality.epochs = 20;
  cfg.dsd_cross.epochs = 20;
  cfg.style_pages = 60;
  cfg.round_batch = 200;
  cfg.quota = 100;
  cfg.round_cap = 10;
  cfg.master_seed = 2026;

  namespace fs = std::filesystem;
  std::string out1 = (fs::temp_directory_path() / "acc_pipe1").string();
  std::string out2 = (fs::temp_directory_path() / "acc_pipe2").string();
  fs::remove_all(out1);
  fs::remove_all(out2);

  cfg.out_dir = out1;
  pipeline::RunManifest m1 = pipeline::run_pipeline(cfg);
  cfg.out_dir = out2;
  pipeline::RunManifest m2 = pipeline::run_pipeline(cfg);

  c.require(m1.to_json() == m2.to_json(), "manifests differ between runs");
  auto slurp = [](const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  c.require(slurp(out1 + "/manifest.json") == slurp(out2 + "/manifest.json"),
            "manifest files differ byte-wise");
  c.require(m1.quota_met, "quota not met");
  c.require(m1.total_selected >= cfg.quota, "selected below quota");
  double rate =
      static_cast<double>(m1.total_accepted_quality) / m1.total_decorated;
  c.require(rate > 0.0 && rate < 1.0,
            "quality rate " + std::to_string(rate) + " not in (0,1)");
  c.require(ded::verify_dataset(out1 + "/dataset").empty(),
            "exported dataset fails verification");
  if (c.ok) {
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "%zu rounds, quality rate %.3f, %d selected",
                  m1.rounds.size(), rate, m1.total_selected);
    c.detail = buf;
  }
  fs::remove_all(out1);
  fs::remove_all(out2);
  return c;
}

// ---------------------------------------------------------------- 8
Check check_metrics_oracle() {
  Check c;
  Image truth = Image::make(2, 2, 1);
  truth.data = {0, 0, 1, 1};
  Image pred = Image::make(2, 2, 1);
  pred.data = {0, 1, 1, 1};
  SegMetrics hand = compute_metrics(pred, truth, 2);
  c.require(std::abs(hand.accuracy - 0.75) < 1e-12, "hand case accuracy");
  c.require(std::abs(hand.per_class[1].f1 - 0.8) < 1e-12, "hand case F1");

  std::mt19937_64 rng(515);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int t = 0; t < 100 && c.ok; ++t) {
    Image p = Image::make(8, 8, 1);
    Image g = Image::make(8, 8, 1);
    for (int i = 0; i < 64; ++i) {
      p.data[i] = static_cast<std::uint8_t>(cls(rng));
      g.data[i] = static_cast<std::uint8_t>(cls(rng));
    }
    SegMetrics s = compute_metrics(p, g, 4);
    // Brute-force confusion counts.
    int match = 0;
    double macro_p = 0, macro_r = 0, macro_f = 0;
    int present = 0;
    for (int i = 0; i < 64; ++i) match += p.data[i] == g.data[i];
    for (int k = 0; k < 4; ++k) {
      int tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < 64; ++i) {
        tp += p.data[i] == k && g.data[i] == k;
        fp += p.data[i] == k && g.data[i] != k;
        fn += p.data[i] != k && g.data[i] == k;
      }
      if (tp + fp + fn == 0) {
        c.require(!s.per_class[k].present, "absent class marked present");
        continue;
      }
      ++present;
      double prec = tp + fp ? double(tp) / (tp + fp) : 0.0;
      double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
      double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      c.require(std::abs(s.per_class[k].precision - prec) < 1e-12 &&
                    std::abs(s.per_class[k].recall - rec) < 1e-12 &&
                    std::abs(s.per_class[k].f1 - f1) < 1e-12,
                "per-class divergence in trial " + std::to_string(t));
      macro_p += prec;
      macro_r += rec;
      macro_f += f1;
    }
    c.require(std::abs(s.accuracy - match / 64.0) < 1e-12, "accuracy");
    c.require(std::abs(s.macro_precision - macro_p / present) < 1e-12 &&
                  std::abs(s.macro_recall - macro_r / present) < 1e-12 &&
                  std::abs(s.macro_f1 - macro_f / present) < 1e-12,
              "macro divergence in trial " + std::to_string(t));
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional substring filter over criterion names, for focused reruns.
  std::string filter = argc > 1 ? argv[1] : "";
  struct Criterion {
    const char* name;
    std::function<Check()> fn;
    double limit_secs;  // 0 = no limit on the criterion as a whole
  };
  std::vector<Criterion> criteria = {
      {"autodiff-grad-check", check_autodiff, 60},
      {"decoration-constraints", check_decoration_constraints, 300},
      {"mask-fidelity", check_mask_fidelity, 0},
      {"layout-generator-sanity", check_dlg_sanity, 0},
      {"style-discrimination", check_dsd_discrimination, 0},
      {"cross-domain-direction", check_cross_domain_direction, 0},
      {"pipeline-protocol", check_pipeline_protocol, 0},
      {"metrics-oracle", check_metrics_oracle, 0},
  };

  bool all_ok = true;
  for (const auto& cr : criteria) {
    if (!filter.empty() && std::string(cr.name).find(filter) ==
                               std::string::npos) {
      continue;
    }
    double t0 = now_seconds();
    Check c;
    try {
      c = cr.fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    double secs = now_seconds() - t0;
    if (cr.limit_secs > 0 && secs > cr.limit_secs) {
      c.ok = false;
      c.detail = "took " + std::to_string(secs) + "s (limit " +
                 std::to_string(cr.limit_secs) + "s)";
    }
    std::printf("%s %-24s (%.1fs)%s%s\n", c.ok ? "PASS" : "FAIL", cr.name,
                secs, c.detail.empty() ? "" : " ", c.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && c.ok;
  }
  return all_ok ? 0 : 1;
}
