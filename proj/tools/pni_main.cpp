#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pni/commands.hpp"
#include "pni/config.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Position and neighborhood informed anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string workdir = ".";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--workdir", workdir, "root for all relative paths");
  app.add_option("--seed", seed, "overrides the config seed");

  // Every config key is also a flag; flags win over the file.
  std::map<std::string, std::string> overrides;
  std::vector<std::string> keys = pni::config_keys();
  for (const auto& key : keys) {
    if (key == "seed") continue;
    app.add_option_function<std::string>(
           "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "config override")
        ->group("Config overrides");
  }

  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  std::string synth_out = "data";
  synth->add_option("--out", synth_out, "dataset directory");

  auto* fit = app.add_subcommand("fit", "fit coresets, histogram and MLP");
  std::string fit_train = "data", fit_model = "model";
  fit->add_option("--train", fit_train, "directory with training images or features");
  fit->add_option("--model", fit_model, "output model directory");

  auto* score = app.add_subcommand("score", "score inputs with a fitted model");
  std::string score_model = "model", score_input = "data", score_out = "scores", score_split = "test";
  score->add_option("--model", score_model, "model directory");
  score->add_option("--input", score_input, "dataset directory or directory of images/features");
  score->add_option("--out", score_out, "output directory");
  score->add_option("--split", score_split, "manifest split to score");

  auto* eval = app.add_subcommand("eval", "compute detection and localization metrics");
  std::string eval_scores = "scores", eval_data = "data", eval_out = "";
  eval->add_option("--scores", eval_scores, "directory written by score");
  eval->add_option("--data", eval_data, "dataset directory with manifest.tsv");
  eval->add_option("--out", eval_out, "report directory (default: the scores directory)");

  auto* ensemble = app.add_subcommand("ensemble", "average normalized maps of several models");
  std::vector<std::string> ens_maps;
  std::string ens_out = "ensemble";
  ensemble->add_option("--maps", ens_maps, "score directories")->required();
  ensemble->add_option("--out", ens_out, "output directory");

  auto* refine = app.add_subcommand("refine-data", "write synthetic defect samples for refiner training");
  std::string ref_model = "model", ref_data = "data", ref_out = "refine_samples";
  std::size_t ref_count = 100;
  refine->add_option("--model", ref_model, "model directory");
  refine->add_option("--data", ref_data, "dataset directory");
  refine->add_option("--out", ref_out, "output directory");
  refine->add_option("--count", ref_count, "number of samples");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(workdir);
    auto at = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };
    pni::PipelineConfig cfg;
    if (!config_path.empty()) cfg = pni::load_config(at(config_path));
    for (const auto& [k, v] : overrides) pni::set_config_value(cfg, k, v);
    if (seed) cfg.seed = *seed;
    cfg.validate();

    if (*synth) {
      pni::cmd_synth(cfg, at(synth_out), std::cout);
    } else if (*fit) {
      pni::cmd_fit(cfg, at(fit_train), at(fit_model), std::cout);
    } else if (*score) {
      pni::cmd_score(cfg, at(score_model), at(score_input), at(score_out), score_split, std::cout);
    } else if (*eval) {
      pni::cmd_eval(cfg, at(eval_scores), at(eval_data), at(eval_out.empty() ? eval_scores : eval_out), std::cout);
    } else if (*ensemble) {
      std::vector<fs::path> dirs;
      for (const auto& d : ens_maps) dirs.push_back(at(d));
      pni::cmd_ensemble(cfg, dirs, at(ens_out), std::cout);
    } else if (*refine) {
      pni::cmd_refine_data(cfg, at(ref_model), at(ref_data), at(ref_out), ref_count, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
