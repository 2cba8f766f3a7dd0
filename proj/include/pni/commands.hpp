#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pni/config.hpp"

namespace pni {

// Subcommands behind the `pni` executable. Each throws on failure; paths are
// used as given (the CLI resolves them against --workdir).

// Generate the synthetic benchmark into `out_dir`.
void cmd_synth(const PipelineConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

// Fit coresets, histogram and MLP on the train split (or every input) of
// `train_dir`; writes everything into `model_dir`.
void cmd_fit(const PipelineConfig& cfg, const std::filesystem::path& train_dir,
             const std::filesystem::path& model_dir, std::ostream& log);

/**
 * Score the `split` entries of `input_dir`. Writes NAME.pnit (smoothed map at
 * image resolution), NAME_heat.ppm, scores.tsv and score_manifest.txt into
 * `out_dir`. With PNI_BRIDGE_CMD set, maps are normalized, refined through
 * the bridge and fused before writing.
 */
void cmd_score(const PipelineConfig& cfg, const std::filesystem::path& model_dir,
               const std::filesystem::path& input_dir, const std::filesystem::path& out_dir,
               const std::string& split, std::ostream& log);

// Metrics of the maps in `scores_dir` against the test split of `data_dir`;
// writes metrics.txt (key = value) and score_histogram.tsv into `out_dir`.
void cmd_eval(const PipelineConfig& cfg, const std::filesystem::path& scores_dir,
              const std::filesystem::path& data_dir, const std::filesystem::path& out_dir, std::ostream& log);

// Normalize each directory's maps with its own range, average, write to out_dir.
void cmd_ensemble(const PipelineConfig& cfg, const std::vector<std::filesystem::path>& map_dirs,
                  const std::filesystem::path& out_dir, std::ostream& log);

// Write `count` (image, estimated map, mask) triples for refiner training.
void cmd_refine_data(const PipelineConfig& cfg, const std::filesystem::path& model_dir,
                     const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                     std::size_t count, std::ostream& log);

}  // namespace pni
