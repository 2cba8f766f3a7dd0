#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pni/config.hpp"
#include "pni/coreset.hpp"
#include "pni/distmodel.hpp"
#include "pni/features.hpp"
#include "pni/refine.hpp"
#include "pni/scoring.hpp"

namespace pni {

// Keys fixed at fit time. Scoring always uses the model's values for these.
const std::vector<std::string>& model_config_keys();

// Image -> preprocess -> toy hierarchy -> merge levels 2,3 -> aggregate.
FeatureMap image_features(const PipelineConfig& cfg, const Image& image);

// Externally extracted levels (C, H, W) -> merge -> aggregate.
FeatureMap hierarchy_features(const PipelineConfig& cfg, const FeatureHierarchy& hierarchy);

// "test/0003.ppm" -> "test_0003".
std::string input_name(const std::filesystem::path& relative);

// One scoring input: an image, or a pair of exported feature levels.
struct InputItem {
  std::string name;  // flat identifier used for output files
  std::filesystem::path image;
  std::filesystem::path level2;
  std::filesystem::path level3;
  bool is_features() const { return !level2.empty(); }
};

/**
 * Inputs found under `dir`: the entries of manifest.tsv with the given split
 * if a manifest exists, otherwise every .ppm/.pgm file, otherwise every
 * NAME_l2.pnit / NAME_l3.pnit pair. Sorted by name.
 */
std::vector<InputItem> list_inputs(const std::filesystem::path& dir, const std::string& split);

FeatureMap load_features(const PipelineConfig& cfg, const InputItem& item);

// Output resolution of an input's anomaly map.
std::pair<std::size_t, std::size_t> map_resolution(const PipelineConfig& cfg, const InputItem& item);

struct TrainedModels {
  Coresets coresets;
  std::optional<PositionHistogram> histogram;
  std::optional<NeighborhoodMlp> mlp;
  std::size_t height = 0;  // feature grid
  std::size_t width = 0;
  double norm_min = 0.0;
  double norm_max = 1.0;
  double train_score_p99 = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

// Coresets, histogram (if use_position) and MLP (if use_neighbor).
TrainedModels fit_models(const PipelineConfig& cfg, std::span<const FeatureMap> train, const LogFn& log = {});

struct ScoredMap {
  Map2D map;  // out_h x out_w, smoothed
  double image_score = 0.0;
};

// score_map, upsample to (out_h, out_w), Gaussian smoothing; the image score
// is the maximum of the final map.
ScoredMap score_features(const PipelineConfig& cfg, const TrainedModels& models, const FeatureMap& features,
                         std::size_t out_h, std::size_t out_w);

// Fill norm_min / norm_max / train_score_p99 from the training maps.
void calibrate(const PipelineConfig& cfg, TrainedModels& models, std::span<const FeatureMap> train,
               std::size_t out_h, std::size_t out_w);

void save_models(const std::filesystem::path& dir, const PipelineConfig& cfg, const TrainedModels& models);
TrainedModels load_models(const std::filesystem::path& dir);

// Config stored next to a fitted model.
PipelineConfig load_model_config(const std::filesystem::path& dir);

// `user` with every model key replaced by the value from `model`.
PipelineConfig merge_scoring_config(const PipelineConfig& model, const PipelineConfig& user);

double percentile(std::vector<double> values, double q);

}  // namespace pni
