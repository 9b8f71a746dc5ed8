#include "dlgdd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

namespace dlgdd::pipeline {

namespace fs = std::filesystem;

namespace {

nlohmann::json require_key(const nlohmann::json& j, const std::string& key,
                           const std::string& where) {
  if (!j.contains(key)) {
    throw UsageError("config: missing key '" + where + key + "'");
  }
  return j.at(key);
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& known,
                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw UsageError("config: unknown key '" + where + key + "'");
    }
  }
}

dlg::DlgConfig parse_dlg(const nlohmann::json& j) {
  check_keys(j,
             {"epochs", "batch", "lr", "embed_dim", "heads", "hidden",
              "clip_norm", "overlap_penalty", "validity_overlap_threshold",
              "validity_samples"},
             "dlg.");
  dlg::DlgConfig c;
  c.epochs = require_key(j, "epochs", "dlg.").get<int>();
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.overlap_penalty = j.value("overlap_penalty", c.overlap_penalty);
  c.validity_overlap_threshold =
      j.value("validity_overlap_threshold", c.validity_overlap_threshold);
  c.validity_samples = j.value("validity_samples", c.validity_samples);
  return c;
}

dsd::DsdConfig parse_dsd(const nlohmann::json& j, const std::string& where) {
  check_keys(j, {"epochs", "batch", "lr", "temperature", "clip_norm"}, where);
  dsd::DsdConfig c;
  c.epochs = require_key(j, "epochs", where).get<int>();
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.temperature = j.value("temperature", c.temperature);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  return c;
}

std::string style_name(GrammarStyle s) {
  return s == GrammarStyle::academic ? "academic" : "magazine";
}

std::vector<Image> page_images(const std::vector<ded::RenderedPage>& pages) {
  std::vector<Image> out;
  out.reserve(pages.size());
  for (const auto& p : pages) out.push_back(p.page);
  return out;
}

// Style-family pages for discriminator training: first half of each
// decorated family trains, second half becomes the scoring corpus.
struct StyleFamily {
  std::vector<Image> train;
  std::vector<Image> corpus;
};

StyleFamily decorate_family(const std::vector<PageLayout>& layouts,
                            const ded::AssetLibrary& assets,
                            const PipelineConfig& cfg, std::uint64_t seed) {
  std::vector<ded::RenderedPage> pages = ded::decorate_batch(
      layouts, assets, cfg.page_width, cfg.page_height, seed);
  StyleFamily fam;
  std::size_t half = pages.size() / 2;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    (i < half ? fam.train : fam.corpus).push_back(std::move(pages[i].page));
  }
  return fam;
}

struct QualityModel {
  dsd::StyleEncoder encoder;
  dsd::StyleCorpus corpus;
};

QualityModel build_quality_model(const PipelineConfig& cfg,
                                 const ded::AssetLibrary& assets) {
  int n = cfg.style_pages * 2;
  std::vector<PageLayout> clean = grammar_generate_corpus(
      cfg.corpus_style, n, derive_seed(cfg.master_seed, "quality-pos"));
  std::vector<PageLayout> messy =
      messy_layouts(n, derive_seed(cfg.master_seed, "quality-neg"));
  StyleFamily pos = decorate_family(clean, assets, cfg,
                                    derive_seed(cfg.master_seed, "quality-pos-render"));
  StyleFamily neg = decorate_family(messy, assets, cfg,
                                    derive_seed(cfg.master_seed, "quality-neg-render"));
  dsd::DsdConfig dc = cfg.dsd_quality;
  dc.seed = derive_seed(cfg.master_seed, "dsd-quality");
  QualityModel qm{dsd::train_dsd(pos.train, neg.train, dc).encoder, {}};
  std::vector<std::vector<double>> pt, nt;
  for (const Image& im : pos.corpus) pt.push_back(dsd::preprocess(im));
  for (const Image& im : neg.corpus) nt.push_back(dsd::preprocess(im));
  qm.corpus.positives = dsd::embed_thumbs(qm.encoder, pt);
  qm.corpus.negatives = dsd::embed_thumbs(qm.encoder, nt);
  return qm;
}

struct CrossModel {
  dsd::StyleEncoder encoder;
  std::vector<Image> target_pages;
  std::vector<Image> neg_pages;
};

CrossModel build_cross_model(const PipelineConfig& cfg,
                             const ded::AssetLibrary& assets) {
  GrammarStyle other = cfg.target_style == GrammarStyle::academic
                           ? GrammarStyle::magazine
                           : GrammarStyle::academic;
  int n = cfg.style_pages * 2;
  std::vector<PageLayout> target_layouts = grammar_generate_corpus(
      cfg.target_style, n, derive_seed(cfg.master_seed, "cross-target"));
  std::vector<PageLayout> other_layouts = grammar_generate_corpus(
      other, n, derive_seed(cfg.master_seed, "cross-neg"));
  StyleFamily tgt = decorate_family(target_layouts, assets, cfg,
                                    derive_seed(cfg.master_seed, "cross-target-render"));
  StyleFamily oth = decorate_family(other_layouts, assets, cfg,
                                    derive_seed(cfg.master_seed, "cross-neg-render"));
  dsd::DsdConfig dc = cfg.dsd_cross;
  dc.seed = derive_seed(cfg.master_seed, "dsd-cross");
  CrossModel cm{dsd::train_dsd(tgt.train, oth.train, dc).encoder,
                std::move(tgt.corpus), std::move(oth.corpus)};
  return cm;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

nlohmann::json corpus_to_json(const dsd::StyleCorpus& corpus) {
  return {{"positives", corpus.positives}, {"negatives", corpus.negatives}};
}

dsd::StyleCorpus corpus_from_json(const nlohmann::json& j) {
  dsd::StyleCorpus c;
  c.positives = j.at("positives").get<std::vector<std::vector<double>>>();
  c.negatives = j.at("negatives").get<std::vector<std::vector<double>>>();
  return c;
}

std::vector<Image> read_decorated_pages(const fs::path& dataset_dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(
        read_text(dataset_dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("manifest '" + (dataset_dir / "manifest.json").string() +
                    "': " + e.what());
  }
  std::vector<Image> out;
  for (const auto& entry : manifest.at("pages")) {
    out.push_back(
        read_png((dataset_dir / entry.at("page").get<std::string>()).string()));
  }
  return out;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("config '" + path + "': " + e.what());
  }
  check_keys(j,
             {"format_version", "corpus", "dlg", "assets_dir", "page",
              "dsd_quality", "dsd_cross", "tau_quality", "tau_cross",
              "round_batch", "quota", "round_cap", "style_pages",
              "target_style", "master_seed", "out_dir"},
             "");
  if (require_key(j, "format_version", "").get<int>() != 1) {
    throw UsageError("config: unsupported format_version");
  }
  PipelineConfig cfg;
  nlohmann::json corpus = require_key(j, "corpus", "");
  check_keys(corpus, {"style", "size"}, "corpus.");
  cfg.corpus_style = grammar_style_from_name(
      require_key(corpus, "style", "corpus.").get<std::string>());
  cfg.corpus_size = require_key(corpus, "size", "corpus.").get<int>();
  cfg.dlg = parse_dlg(require_key(j, "dlg", ""));
  cfg.assets_dir = j.value("assets_dir", std::string());
  nlohmann::json page = require_key(j, "page", "");
  check_keys(page, {"width", "height"}, "page.");
  cfg.page_width = require_key(page, "width", "page.").get<int>();
  cfg.page_height = require_key(page, "height", "page.").get<int>();
  cfg.dsd_quality = parse_dsd(require_key(j, "dsd_quality", ""), "dsd_quality.");
  cfg.dsd_cross = parse_dsd(require_key(j, "dsd_cross", ""), "dsd_cross.");
  cfg.tau_quality = require_key(j, "tau_quality", "").get<double>();
  cfg.tau_cross = require_key(j, "tau_cross", "").get<double>();
  cfg.round_batch = require_key(j, "round_batch", "").get<int>();
  cfg.quota = require_key(j, "quota", "").get<int>();
  cfg.round_cap = j.value("round_cap", cfg.round_cap);
  cfg.style_pages = j.value("style_pages", cfg.style_pages);
  cfg.target_style =
      j.contains("target_style")
          ? grammar_style_from_name(j.at("target_style").get<std::string>())
          : cfg.corpus_style;
  cfg.master_seed = require_key(j, "master_seed", "").get<std::uint64_t>();
  cfg.out_dir = require_key(j, "out_dir", "").get<std::string>();

  if (cfg.quota < 1) throw UsageError("config: quota must be >= 1");
  if (cfg.round_batch < 1) throw UsageError("config: round_batch must be >= 1");
  if (cfg.round_cap < 1) throw UsageError("config: round_cap must be >= 1");
  if (cfg.page_width < 256 || cfg.page_height < 256) {
    throw UsageError("config: page size must be at least 256x256");
  }
  if (cfg.style_pages < 50) {
    throw UsageError("config: style_pages must be >= 50");
  }
  if (!cfg.assets_dir.empty() && !fs::exists(cfg.assets_dir)) {
    throw DataError("config: assets_dir '" + cfg.assets_dir + "' does not exist");
  }
  return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j{
      {"format_version", 1},
      {"corpus",
       {{"style", style_name(cfg.corpus_style)}, {"size", cfg.corpus_size}}},
      {"dlg",
       {{"epochs", cfg.dlg.epochs},
        {"batch", cfg.dlg.batch},
        {"lr", cfg.dlg.lr},
        {"embed_dim", cfg.dlg.embed_dim},
        {"heads", cfg.dlg.heads},
        {"hidden", cfg.dlg.hidden},
        {"clip_norm", cfg.dlg.clip_norm},
        {"overlap_penalty", cfg.dlg.overlap_penalty},
        {"validity_overlap_threshold", cfg.dlg.validity_overlap_threshold},
        {"validity_samples", cfg.dlg.validity_samples}}},
      {"assets_dir", cfg.assets_dir},
      {"page", {{"width", cfg.page_width}, {"height", cfg.page_height}}},
      {"dsd_quality",
       {{"epochs", cfg.dsd_quality.epochs},
        {"batch", cfg.dsd_quality.batch},
        {"lr", cfg.dsd_quality.lr},
        {"temperature", cfg.dsd_quality.temperature},
        {"clip_norm", cfg.dsd_quality.clip_norm}}},
      {"dsd_cross",
       {{"epochs", cfg.dsd_cross.epochs},
        {"batch", cfg.dsd_cross.batch},
        {"lr", cfg.dsd_cross.lr},
        {"temperature", cfg.dsd_cross.temperature},
        {"clip_norm", cfg.dsd_cross.clip_norm}}},
      {"tau_quality", cfg.tau_quality},
      {"tau_cross", cfg.tau_cross},
      {"round_batch", cfg.round_batch},
      {"quota", cfg.quota},
      {"round_cap", cfg.round_cap},
      {"style_pages", cfg.style_pages},
      {"target_style", style_name(cfg.target_style)},
      {"master_seed", cfg.master_seed},
      {"out_dir", cfg.out_dir}};
  return j.dump(2);
}

ded::AssetLibrary load_assets(const PipelineConfig& cfg) {
  std::uint64_t seed = derive_seed(cfg.master_seed, "assets");
  return cfg.assets_dir.empty() ? ded::AssetLibrary::builtin(seed)
                                : ded::AssetLibrary::load_dir(cfg.assets_dir, seed);
}

std::vector<PageLayout> messy_layouts(int count, std::uint64_t seed) {
  std::vector<PageLayout> out;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(seed, "messy", static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<int> nd(4, 10);
    std::uniform_int_distribution<int> cd(0, kNumElementClasses - 1);
    std::uniform_real_distribution<double> size(0.25, 0.5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    PageLayout l;
    int n = nd(rng);
    for (int k = 0; k < n; ++k) {
      LayoutElement e;
      e.cls = static_cast<ElementClass>(cd(rng));
      e.w = size(rng);
      e.h = size(rng);
      e.x = u01(rng) * (1.0 - e.w);
      e.y = u01(rng) * (1.0 - e.h);
      l.elements.push_back(e);
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<PageLayout> sample_renderable(dlg::GeneratorModel& model,
                                          int count, int page_w, int page_h,
                                          std::uint64_t seed) {
  std::vector<PageLayout> out;
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts && static_cast<int>(out.size()) < count;
       ++attempt) {
    int need = count - static_cast<int>(out.size());
    std::vector<PageLayout> batch =
        dlg::sample_layouts(model, need, model.n_dist,
                            derive_seed(seed, "attempt",
                                        static_cast<std::uint64_t>(attempt)));
    for (PageLayout& l : batch) {
      if (ded::layout_renderable(l, page_w, page_h)) {
        out.push_back(std::move(l));
        if (static_cast<int>(out.size()) == count) break;
      }
    }
  }
  if (static_cast<int>(out.size()) < count) {
    throw DataError("sample_renderable: generator produced too few layouts "
                    "renderable at " +
                    std::to_string(page_w) + "x" + std::to_string(page_h));
  }
  return out;
}

std::string RunManifest::to_json() const {
  nlohmann::json rounds_json = nlohmann::json::array();
  for (const RoundRecord& r : rounds) {
    rounds_json.push_back({{"round", r.round},
                           {"generated", r.generated},
                           {"decorated", r.decorated},
                           {"accepted_quality", r.accepted_quality},
                           {"accepted_crossdomain", r.accepted_crossdomain}});
  }
  nlohmann::json j{{"format_version", 1},
                   {"master_seed", master_seed},
                   {"rounds", rounds_json},
                   {"total_generated", total_generated},
                   {"total_decorated", total_decorated},
                   {"total_accepted_quality", total_accepted_quality},
                   {"total_selected", total_selected},
                   {"quota", quota},
                   {"quota_met", quota_met}};
  if (!dataset_manifest.empty()) {
    j["dataset_manifest"] = nlohmann::json::parse(dataset_manifest);
  }
  return j.dump(2);
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ded::AssetLibrary assets = load_assets(cfg);

  std::vector<PageLayout> corpus = grammar_generate_corpus(
      cfg.corpus_style, cfg.corpus_size, derive_seed(cfg.master_seed, "corpus"));
  dlg::DlgConfig dlg_cfg = cfg.dlg;
  dlg_cfg.seed = derive_seed(cfg.master_seed, "dlg-train");
  dlg::TrainedDlg trained = dlg::train_adversarial(corpus, dlg_cfg);

  QualityModel quality = build_quality_model(cfg, assets);
  CrossModel cross = build_cross_model(cfg, assets);

  RunManifest manifest;
  manifest.master_seed = cfg.master_seed;
  manifest.quota = cfg.quota;
  std::vector<ded::RenderedPage> selected;

  for (int round = 0; round < cfg.round_cap; ++round) {
    std::vector<PageLayout> layouts = sample_renderable(
        trained.generator, cfg.round_batch, cfg.page_width, cfg.page_height,
        derive_seed(cfg.master_seed, "round-sample",
                    static_cast<std::uint64_t>(round)));
    std::vector<ded::RenderedPage> pages = ded::decorate_batch(
        layouts, assets, cfg.page_width, cfg.page_height,
        derive_seed(cfg.master_seed, "round-render",
                    static_cast<std::uint64_t>(round)));

    dsd::FilterResult qf = dsd::quality_filter(
        page_images(pages), quality.encoder, quality.corpus, cfg.tau_quality);
    std::vector<ded::RenderedPage> quality_pages;
    for (std::size_t idx : qf.accepted)
      quality_pages.push_back(std::move(pages[idx]));

    dsd::FilterResult cs = dsd::cross_domain_select(
        page_images(quality_pages), cross.encoder, cross.target_pages,
        cross.neg_pages, cfg.tau_cross);
    for (std::size_t idx : cs.accepted)
      selected.push_back(std::move(quality_pages[idx]));

    RoundRecord rec;
    rec.round = round;
    rec.generated = static_cast<int>(layouts.size());
    rec.decorated = rec.generated;
    rec.accepted_quality = static_cast<int>(qf.accepted.size());
    rec.accepted_crossdomain = static_cast<int>(cs.accepted.size());
    manifest.rounds.push_back(rec);
    manifest.total_generated += rec.generated;
    manifest.total_decorated += rec.decorated;
    manifest.total_accepted_quality += rec.accepted_quality;
    manifest.total_selected += rec.accepted_crossdomain;
    if (manifest.total_selected >= cfg.quota) {
      manifest.quota_met = true;
      break;
    }
  }
  if (!manifest.quota_met) {
    throw QuotaShortfallError(
        "run_pipeline: round cap " + std::to_string(cfg.round_cap) +
            " reached with " + std::to_string(manifest.total_selected) +
            " of " + std::to_string(cfg.quota) + " selected pages",
        manifest);
  }

  fs::create_directories(cfg.out_dir);
  ded::ExportManifest ds =
      ded::export_dataset(selected, (fs::path(cfg.out_dir) / "dataset").string());
  manifest.dataset_manifest = ds.json;
  write_text(fs::path(cfg.out_dir) / "manifest.json", manifest.to_json() + "\n");
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  // Wall time lives in a sidecar so manifest bytes stay reproducible.
  write_text(fs::path(cfg.out_dir) / "run.log",
             "wall_time_seconds\t" + std::to_string(secs) + "\n");
  return manifest;
}

void corpus_gen_stage(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::vector<PageLayout> corpus = grammar_generate_corpus(
      cfg.corpus_style, cfg.corpus_size, derive_seed(cfg.master_seed, "corpus"));
  write_layouts(corpus, (fs::path(cfg.out_dir) / "corpus.json").string());
}

void train_dlg_stage(const PipelineConfig& cfg) {
  std::vector<PageLayout> corpus =
      read_layouts((fs::path(cfg.out_dir) / "corpus.json").string());
  dlg::DlgConfig dlg_cfg = cfg.dlg;
  dlg_cfg.seed = derive_seed(cfg.master_seed, "dlg-train");
  dlg::TrainedDlg trained = dlg::train_adversarial(corpus, dlg_cfg);
  trained.generator.save((fs::path(cfg.out_dir) / "generator.json").string());
  trained.critic.save((fs::path(cfg.out_dir) / "critic.json").string());
  write_text(fs::path(cfg.out_dir) / "dlg_report.json",
             trained.report.to_json() + "\n");
}

void sample_stage(const PipelineConfig& cfg, int count) {
  if (count < 1) throw UsageError("sample: count must be >= 1");
  dlg::GeneratorModel model = dlg::GeneratorModel::load(
      (fs::path(cfg.out_dir) / "generator.json").string());
  std::vector<PageLayout> layouts =
      sample_renderable(model, count, cfg.page_width, cfg.page_height,
                        derive_seed(cfg.master_seed, "sample-stage"));
  write_layouts(layouts, (fs::path(cfg.out_dir) / "samples.json").string());
}

void decorate_stage(const PipelineConfig& cfg) {
  std::vector<PageLayout> layouts =
      read_layouts((fs::path(cfg.out_dir) / "samples.json").string());
  ded::AssetLibrary assets = load_assets(cfg);
  std::vector<ded::RenderedPage> pages = ded::decorate_batch(
      layouts, assets, cfg.page_width, cfg.page_height,
      derive_seed(cfg.master_seed, "decorate-stage"));
  ded::export_dataset(pages, (fs::path(cfg.out_dir) / "decorated").string());
}

void train_dsd_stage(const PipelineConfig& cfg, const std::string& mode) {
  ded::AssetLibrary assets = load_assets(cfg);
  if (mode == "quality") {
    QualityModel qm = build_quality_model(cfg, assets);
    qm.encoder.save((fs::path(cfg.out_dir) / "dsd_quality.json").string());
    write_text(fs::path(cfg.out_dir) / "style_corpus_quality.json",
               corpus_to_json(qm.corpus).dump() + "\n");
  } else if (mode == "cross") {
    CrossModel cm = build_cross_model(cfg, assets);
    cm.encoder.save((fs::path(cfg.out_dir) / "dsd_cross.json").string());
    dsd::StyleCorpus corpus;
    std::vector<std::vector<double>> tt, nt;
    for (const Image& im : cm.target_pages) tt.push_back(dsd::preprocess(im));
    for (const Image& im : cm.neg_pages) nt.push_back(dsd::preprocess(im));
    corpus.positives = dsd::embed_thumbs(cm.encoder, tt);
    corpus.negatives = dsd::embed_thumbs(cm.encoder, nt);
    write_text(fs::path(cfg.out_dir) / "style_corpus_cross.json",
               corpus_to_json(corpus).dump() + "\n");
  } else {
    throw UsageError("train-dsd: mode must be 'quality' or 'cross'");
  }
}

void filter_stage(const PipelineConfig& cfg) {
  dsd::StyleEncoder encoder = dsd::StyleEncoder::load(
      (fs::path(cfg.out_dir) / "dsd_quality.json").string());
  dsd::StyleCorpus corpus = corpus_from_json(nlohmann::json::parse(
      read_text(fs::path(cfg.out_dir) / "style_corpus_quality.json")));
  std::vector<Image> pages =
      read_decorated_pages(fs::path(cfg.out_dir) / "decorated");
  dsd::FilterResult res =
      dsd::quality_filter(pages, encoder, corpus, cfg.tau_quality);
  write_text(fs::path(cfg.out_dir) / "filter_report.tsv",
             dsd::score_reports_to_text(res.reports));
  write_text(fs::path(cfg.out_dir) / "filter_accepted.json",
             nlohmann::json{{"accepted", res.accepted},
                            {"rate", res.rate}}
                     .dump() +
                 "\n");
}

void select_stage(const PipelineConfig& cfg) {
  dsd::StyleEncoder encoder = dsd::StyleEncoder::load(
      (fs::path(cfg.out_dir) / "dsd_cross.json").string());
  dsd::StyleCorpus corpus = corpus_from_json(nlohmann::json::parse(
      read_text(fs::path(cfg.out_dir) / "style_corpus_cross.json")));
  std::vector<Image> pages =
      read_decorated_pages(fs::path(cfg.out_dir) / "decorated");
  nlohmann::json accepted_doc = nlohmann::json::parse(
      read_text(fs::path(cfg.out_dir) / "filter_accepted.json"));
  std::vector<std::size_t> quality_idx =
      accepted_doc.at("accepted").get<std::vector<std::size_t>>();
  std::vector<Image> quality_pages;
  for (std::size_t i : quality_idx) {
    if (i >= pages.size()) {
      throw DataError("select: accepted index out of range");
    }
    quality_pages.push_back(pages[i]);
  }
  dsd::FilterResult res = dsd::quality_filter(quality_pages, encoder, corpus,
                                              cfg.tau_cross);
  std::vector<std::size_t> selected;
  for (std::size_t i : res.accepted) selected.push_back(quality_idx[i]);
  write_text(fs::path(cfg.out_dir) / "select_report.tsv",
             dsd::score_reports_to_text(res.reports));
  write_text(fs::path(cfg.out_dir) / "selected.json",
             nlohmann::json{{"selected", selected}}.dump() + "\n");
}

}  // namespace dlgdd::pipeline
