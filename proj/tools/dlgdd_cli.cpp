#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dlgdd/metrics.hpp"
#include "dlgdd/pipeline.hpp"
#include "json.hpp"

namespace {

using namespace dlgdd;

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path,
                            "pipeline configuration file (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "override the configured master seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
}

pipeline::PipelineConfig load(const CommonOpts& opts) {
  pipeline::PipelineConfig cfg = pipeline::load_config(opts.config_path);
  if (opts.seed_set) cfg.master_seed = opts.seed;
  return cfg;
}

void print_error(ErrorCode code, const std::string& message) {
  std::cerr << nlohmann::json{{"error",
                               {{"code", static_cast<int>(code)},
                                {"message", message}}}}
                   .dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document layout generation and decoration pipeline"};
  app.require_subcommand(1);

  CommonOpts corpus_opts, dlg_opts, sample_opts, decorate_opts, dsd_opts,
      filter_opts, select_opts, run_opts;
  int sample_count = 100;
  std::string dsd_mode = "quality";
  std::string pred_path, truth_path, verify_dir;

  add_common(app.add_subcommand("corpus-gen", "generate a grammar layout corpus"),
             corpus_opts);
  add_common(app.add_subcommand("train-dlg",
                                "train the adversarial layout generator"),
             dlg_opts);
  auto* sample_cmd =
      app.add_subcommand("sample", "sample layouts from a trained generator");
  add_common(sample_cmd, sample_opts);
  sample_cmd->add_option("--count", sample_count, "layouts to sample");
  add_common(app.add_subcommand("decorate", "render sampled layouts to pages"),
             decorate_opts);
  auto* dsd_cmd =
      app.add_subcommand("train-dsd", "train a style discriminator");
  add_common(dsd_cmd, dsd_opts);
  dsd_cmd->add_option("--mode", dsd_mode, "'quality' or 'cross'");
  add_common(app.add_subcommand("filter", "quality-filter decorated pages"),
             filter_opts);
  add_common(app.add_subcommand("select", "cross-domain page selection"),
             select_opts);
  add_common(app.add_subcommand("run", "run the full generation pipeline"),
             run_opts);

  auto* metrics_cmd =
      app.add_subcommand("metrics", "segmentation metrics for two masks");
  metrics_cmd->add_option("--pred", pred_path, "predicted mask PNG")->required();
  metrics_cmd->add_option("--truth", truth_path, "ground-truth mask PNG")
      ->required();

  auto* verify_cmd =
      app.add_subcommand("verify", "check dataset checksums against manifest");
  verify_cmd->add_option("--dir", verify_dir, "exported dataset directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(ErrorCode::usage, e.what());
    return static_cast<int>(ErrorCode::usage);
  }

  try {
    if (app.got_subcommand("corpus-gen")) {
      pipeline::corpus_gen_stage(load(corpus_opts));
    } else if (app.got_subcommand("train-dlg")) {
      pipeline::train_dlg_stage(load(dlg_opts));
    } else if (app.got_subcommand("sample")) {
      pipeline::sample_stage(load(sample_opts), sample_count);
    } else if (app.got_subcommand("decorate")) {
      pipeline::decorate_stage(load(decorate_opts));
    } else if (app.got_subcommand("train-dsd")) {
      pipeline::train_dsd_stage(load(dsd_opts), dsd_mode);
    } else if (app.got_subcommand("filter")) {
      pipeline::filter_stage(load(filter_opts));
    } else if (app.got_subcommand("select")) {
      pipeline::select_stage(load(select_opts));
    } else if (app.got_subcommand("run")) {
      pipeline::RunManifest manifest = pipeline::run_pipeline(load(run_opts));
      std::cout << manifest.to_json() << "\n";
    } else if (app.got_subcommand("metrics")) {
      SegMetrics m = compute_metrics(read_png(pred_path), read_png(truth_path));
      std::cout << m.to_json() << "\n";
    } else if (app.got_subcommand("verify")) {
      std::vector<std::string> bad = ded::verify_dataset(verify_dir);
      if (!bad.empty()) {
        nlohmann::json j{{"mismatched", bad}};
        std::cerr << j.dump() << "\n";
        print_error(ErrorCode::data, "dataset checksum mismatch");
        return static_cast<int>(ErrorCode::data);
      }
      std::cout << "{\"verified\":true}\n";
    }
  } catch (const pipeline::QuotaShortfallError& e) {
    std::cout << e.manifest.to_json() << "\n";
    print_error(e.code(), e.what());
    return static_cast<int>(e.code());
  } catch (const Error& e) {
    print_error(e.code(), e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    print_error(ErrorCode::data, e.what());
    return static_cast<int>(ErrorCode::data);
  }
  return 0;
}
