#include "pni/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pni/benchmark.hpp"
#include "pni/image.hpp"
#include "pni/tensorio.hpp"

namespace pni {

namespace fs = std::filesystem;

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys = {
      "resize_to", "crop_to",     "agg_patch",  "d",      "toy_channels", "emb_fraction",
      "dist_size", "projection_dim", "p",       "mlp_layers", "mlp_width", "epochs",
      "lr",        "batch",       "sched_gamma", "sched_step", "seed",
  };
  return keys;
}

FeatureMap hierarchy_features(const PipelineConfig& cfg, const FeatureHierarchy& hierarchy) {
  return aggregate_patches(merge_hierarchy(hierarchy), cfg.agg_patch, cfg.d);
}

FeatureMap image_features(const PipelineConfig& cfg, const Image& image) {
  const Image prepared = preprocess(image, cfg.resize_to, cfg.crop_to);
  const ToyExtractor extractor(derive_seed(cfg.seed, 4), {cfg.toy_channels, cfg.toy_channels});
  return hierarchy_features(cfg, extractor.extract(prepared));
}

std::string input_name(const fs::path& relative) {
  std::string s = relative.parent_path().empty() ? relative.stem().string()
                                                 : (relative.parent_path() / relative.stem()).generic_string();
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<InputItem> list_inputs(const fs::path& dir, const std::string& split) {
  if (!fs::is_directory(dir)) throw std::runtime_error("input directory " + dir.string() + " does not exist");
  std::vector<InputItem> items;
  if (fs::exists(dir / "manifest.tsv")) {
    for (const auto& e : read_manifest(dir)) {
      if (e.split != split) continue;
      items.push_back({input_name(e.image), dir / e.image, {}, {}});
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto ext = f.extension().string();
      if (ext == ".ppm" || ext == ".pgm") items.push_back({f.stem().string(), f, {}, {}});
    }
    if (items.empty()) {
      for (const auto& f : files) {
        const std::string name = f.filename().string();
        if (!has_suffix(name, "_l2.pnit")) continue;
        const std::string stem = name.substr(0, name.size() - 8);
        const fs::path l3 = dir / (stem + "_l3.pnit");
        if (!fs::exists(l3)) throw std::runtime_error("missing level-3 features for " + stem);
        items.push_back({stem, {}, f, l3});
      }
    }
  }
  std::sort(items.begin(), items.end(), [](const InputItem& a, const InputItem& b) { return a.name < b.name; });
  return items;
}

FeatureMap load_features(const PipelineConfig& cfg, const InputItem& item) {
  if (!item.is_features()) return image_features(cfg, read_pnm(item.image));
  FeatureHierarchy h;
  h.levels.push_back({2, feature_map_from_tensor(read_tensor(item.level2, {.strict = true}))});
  h.levels.push_back({3, feature_map_from_tensor(read_tensor(item.level3, {.strict = true}))});
  return hierarchy_features(cfg, h);
}

std::pair<std::size_t, std::size_t> map_resolution(const PipelineConfig& cfg, const InputItem&) {
  return {cfg.crop_to, cfg.crop_to};
}

TrainedModels fit_models(const PipelineConfig& cfg, std::span<const FeatureMap> train, const LogFn& log) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("empty training set");
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  TrainedModels m;
  m.height = train.front().height();
  m.width = train.front().width();
  const MemoryBank bank = build_memory_bank(train);
  say("memory bank: " + std::to_string(bank.vectors.rows()) + " x " + std::to_string(bank.vectors.cols()));
  m.coresets = build_coresets(bank, cfg.coreset_options());
  say("coresets: |C_emb| = " + std::to_string(m.coresets.emb.rows()) +
      ", |C_dist| = " + std::to_string(m.coresets.dist.rows()));
  if (cfg.use_position) {
    m.histogram = build_position_histogram(train, m.coresets.dist, cfg.p);
    say("position histogram: " + std::to_string(m.height) + " x " + std::to_string(m.width));
  }
  if (cfg.use_neighbor) {
    m.mlp = train_neighborhood_mlp(train, m.coresets.dist, cfg.p, cfg.mlp_config(), [&](const EpochStats& s) {
      say("mlp epoch " + std::to_string(s.epoch + 1) + ": loss " + std::to_string(s.mean_loss) + ", accuracy " +
          std::to_string(s.accuracy));
    });
    m.mlp->temperature = static_cast<float>(cfg.temperature);
  } else {
    say("neighborhood MLP skipped (use_neighbor = false)");
  }
  return m;
}

ScoredMap score_features(const PipelineConfig& cfg, const TrainedModels& models, const FeatureMap& features,
                         std::size_t out_h, std::size_t out_w) {
  if (features.height() != models.height || features.width() != models.width ||
      features.channels() != models.coresets.dim()) {
    throw std::invalid_argument("feature map " + std::to_string(features.channels()) + "x" +
                                std::to_string(features.height()) + "x" + std::to_string(features.width()) +
                                " does not match the fitted models (" + std::to_string(models.coresets.dim()) +
                                "x" + std::to_string(models.height) + "x" + std::to_string(models.width) + ")");
  }
  PriorModels priors;
  priors.switches = cfg.switches();
  if (priors.switches.use_position) {
    if (!models.histogram) throw std::invalid_argument("use_position is set but the model has no histogram");
    priors.histogram = &*models.histogram;
  }
  NeighborhoodMlp mlp_copy;
  if (priors.switches.use_neighbor) {
    if (!models.mlp) throw std::invalid_argument("use_neighbor is set but the model has no MLP");
    priors.mlp = &*models.mlp;
    if (static_cast<double>(models.mlp->temperature) != cfg.temperature) {
      mlp_copy = *models.mlp;
      mlp_copy.temperature = static_cast<float>(cfg.temperature);
      priors.mlp = &mlp_copy;
    }
  }
  const AnomalyMap raw = score_map(features, priors, models.coresets, cfg.score_params());
  ScoredMap out;
  out.map = gaussian_smooth(upsample_bilinear(raw.scores, out_h, out_w), cfg.sigma);
  out.image_score = map_max(out.map);
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void calibrate(const PipelineConfig& cfg, TrainedModels& models, std::span<const FeatureMap> train,
               std::size_t out_h, std::size_t out_w) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> image_scores;
  for (const auto& f : train) {
    const auto s = score_features(cfg, models, f, out_h, out_w);
    const auto [mn, mx] = std::minmax_element(s.map.values().begin(), s.map.values().end());
    lo = std::min(lo, static_cast<double>(*mn));
    hi = std::max(hi, static_cast<double>(*mx));
    image_scores.push_back(s.image_score);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  models.norm_min = lo;
  models.norm_max = hi;
  models.train_score_p99 = percentile(image_scores, 99.0);
}

void save_models(const fs::path& dir, const PipelineConfig& cfg, const TrainedModels& models) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.txt", std::ios::trunc);
    out << dump_config(cfg);
    if (!out) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
  }
  save_coresets(dir, models.coresets);
  if (models.histogram) save_histogram(dir / "histogram.pnit", *models.histogram);
  if (models.mlp) save_mlp(dir / "mlp", *models.mlp);
  write_key_values(dir / "fit_manifest.txt",
                   {{"seed", std::to_string(cfg.seed)},
                    {"feature_height", std::to_string(models.height)},
                    {"feature_width", std::to_string(models.width)},
                    {"feature_dim", std::to_string(models.coresets.dim())},
                    {"emb_size", std::to_string(models.coresets.emb.rows())},
                    {"dist_size", std::to_string(models.coresets.dist.rows())},
                    {"histogram", models.histogram ? "true" : "false"},
                    {"mlp_trained", models.mlp ? "true" : "false"},
                    {"norm_min", format_number(models.norm_min)},
                    {"norm_max", format_number(models.norm_max)},
                    {"train_score_p99", format_number(models.train_score_p99)}});
}

namespace {

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing model file " + path.string());
}

}  // namespace

TrainedModels load_models(const fs::path& dir) {
  for (const char* f : {"fit_manifest.txt", "c_emb.pnit", "emb_index.pnix", "dist_index.pnix", "voronoi.pnix"}) {
    require_file(dir / f);
  }
  const auto kv = read_key_values(dir / "fit_manifest.txt");
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("fit manifest lacks '" + key + "'");
    return it->second;
  };
  TrainedModels m;
  m.height = std::stoul(get("feature_height"));
  m.width = std::stoul(get("feature_width"));
  m.norm_min = std::stod(get("norm_min"));
  m.norm_max = std::stod(get("norm_max"));
  m.train_score_p99 = std::stod(get("train_score_p99"));
  m.coresets = load_coresets(dir);
  if (get("histogram") == "true") require_file(dir / "histogram.pnit");
  if (get("mlp_trained") == "true") require_file(dir / "mlp" / "header.txt");
  if (get("histogram") == "true") m.histogram = load_histogram(dir / "histogram.pnit", m.height, m.width);
  if (get("mlp_trained") == "true") m.mlp = load_mlp(dir / "mlp");
  return m;
}

PipelineConfig load_model_config(const fs::path& dir) {
  if (!fs::exists(dir / "config.txt")) {
    throw std::runtime_error("missing model file " + (dir / "config.txt").string());
  }
  return load_config(dir / "config.txt");
}

PipelineConfig merge_scoring_config(const PipelineConfig& model, const PipelineConfig& user) {
  PipelineConfig out = user;
  for (const auto& key : model_config_keys()) set_config_value(out, key, get_config_value(model, key));
  return out;
}

}  // namespace pni
