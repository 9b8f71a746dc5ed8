#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlgdd/common.hpp"
#include "dlgdd/dlg.hpp"
#include "dlgdd/dsd.hpp"
#include "dlgdd/render.hpp"

namespace dlgdd::pipeline {

struct PipelineConfig {
  GrammarStyle corpus_style = GrammarStyle::academic;
  int corpus_size = 2000;
  dlg::DlgConfig dlg;           // seed filled from master_seed at run time
  std::string assets_dir;       // empty = built-in asset library
  int page_width = 400;
  int page_height = 520;
  dsd::DsdConfig dsd_quality;
  dsd::DsdConfig dsd_cross;
  double tau_quality = 0.0;
  double tau_cross = 0.0;
  int round_batch = 200;        // layouts sampled per generation round
  int quota = 300;              // cumulative selected pages to reach
  int round_cap = 50;
  int style_pages = 60;         // decorated pages per style family for DSD
  GrammarStyle target_style = GrammarStyle::academic;
  std::uint64_t master_seed = 0;
  std::string out_dir = "out";
};

// Structured JSON config file, format_version 1. Unknown or missing keys
// raise a usage error naming the key.
PipelineConfig load_config(const std::string& path);
std::string config_to_json(const PipelineConfig& cfg);

struct RoundRecord {
  int round = 0;
  int generated = 0;
  int decorated = 0;
  int accepted_quality = 0;
  int accepted_crossdomain = 0;
};

struct RunManifest {
  std::uint64_t master_seed = 0;
  std::vector<RoundRecord> rounds;
  int total_generated = 0;
  int total_decorated = 0;
  int total_accepted_quality = 0;
  int total_selected = 0;
  int quota = 0;
  bool quota_met = false;
  std::string dataset_manifest;  // export manifest of the selected pages

  std::string to_json() const;  // byte-stable for a fixed run
};

// Raised when the round cap is hit before the quota; carries the manifest.
struct QuotaShortfallError : Error {
  QuotaShortfallError(const std::string& msg, RunManifest m)
      : Error(ErrorCode::quota_shortfall, msg), manifest(std::move(m)) {}
  RunManifest manifest;
};

ded::AssetLibrary load_assets(const PipelineConfig& cfg);

// Deliberately overlap-heavy random layouts; serve as the low-quality
// style family when training the quality discriminator.
std::vector<PageLayout> messy_layouts(int count, std::uint64_t seed);

// Samples generator layouts, dropping ones too small to decorate on the
// configured pixel grid and resampling until count renderable layouts
// are collected (data error if the generator cannot supply them).
std::vector<PageLayout> sample_renderable(dlg::GeneratorModel& model,
                                          int count, int page_w, int page_h,
                                          std::uint64_t seed);

// Full flow: grammar corpus -> adversarial training -> per-round
// {sample, decorate, quality filter, cross-domain select} until the quota
// is met; exports the selected pages and the run manifest under
// cfg.out_dir. Deterministic per master seed.
RunManifest run_pipeline(const PipelineConfig& cfg);

// Stage entry points used by the CLI; all paths live under cfg.out_dir.
void corpus_gen_stage(const PipelineConfig& cfg);
void train_dlg_stage(const PipelineConfig& cfg);
void sample_stage(const PipelineConfig& cfg, int count);
void decorate_stage(const PipelineConfig& cfg);
void train_dsd_stage(const PipelineConfig& cfg, const std::string& mode);
void filter_stage(const PipelineConfig& cfg);
void select_stage(const PipelineConfig& cfg);

}  // namespace dlgdd::pipeline
