#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pni/benchmark.hpp"
#include "pni/coreset.hpp"
#include "pni/distmodel.hpp"
#include "pni/scoring.hpp"

namespace pni {

// Every tunable of the pipeline. Defaults are the full-size settings; the
// desk-scale benchmark overrides several of them (configs/desk.conf).
struct PipelineConfig {
  // Features.
  std::size_t resize_to = 512;
  std::size_t crop_to = 480;
  std::size_t agg_patch = 5;
  std::size_t d = 1024;
  std::size_t toy_channels = 16;

  // Coresets.
  double emb_fraction = 0.01;
  std::size_t dist_size = 2048;
  std::size_t projection_dim = 0;  // 0: distances in feature space

  // Conditional prior.
  std::size_t p = 9;
  double temperature = 2.0;
  std::size_t mlp_layers = 10;
  std::size_t mlp_width = 2048;
  std::size_t epochs = 15;
  double lr = 1e-3;
  std::size_t batch = 2048;
  double sched_gamma = 0.1;
  std::size_t sched_step = 5;
  bool use_position = true;
  bool use_neighbor = true;

  // Scoring.
  double lambda = 1.0;
  double tau = 0.0;  // 0: 1 / (2 dist_size)
  double sigma = 8.0;
  std::string representative_mode = "voronoi";

  // Refinement.
  double fuse_ratio = 0.1;
  std::size_t defect_patterns_min = 1;
  std::size_t defect_patterns_max = 3;
  double defect_scale_min = 0.1;
  double defect_scale_max = 0.4;

  // Synthetic benchmark.
  std::size_t bench_grid = 8;
  std::size_t bench_cell_px = 8;
  std::size_t bench_tokens = 4;
  double bench_noise = 0.04;
  std::size_t bench_train = 60;
  std::size_t bench_test_normal = 16;
  std::size_t bench_test_permute = 12;
  std::size_t bench_test_blob = 12;

  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending key.
  void validate() const;

  BenchSpec bench_spec() const;
  CoresetOptions coreset_options() const;
  MlpTrainConfig mlp_config() const;
  ScoreParams score_params() const;
  PriorSwitches switches() const;
};

// Names of all keys, in declaration order.
std::vector<std::string> config_keys();

// Set one key from its textual value; unknown keys and unparsable values throw.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& cfg, const std::string& key);

// Flat `key = value` text, '#' starts a comment. Unknown keys are rejected.
void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

// All keys as `key = value` lines.
std::string dump_config(const PipelineConfig& cfg);

// Shortest text that parses back to the same double.
std::string format_number(double v);

// Simple key = value files used for manifests and reports.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace pni
