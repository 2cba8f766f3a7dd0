#include "pni/commands.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pni/benchmark.hpp"
#include "pni/eval.hpp"
#include "pni/image.hpp"
#include "pni/pipeline.hpp"
#include "pni/refine.hpp"
#include "pni/tensorio.hpp"

namespace pni {

namespace fs = std::filesystem;

namespace {

struct ScoreRow {
  std::string name;
  double image_score = 0.0;
};

void write_scores(const fs::path& path, const std::vector<ScoreRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  out << "name\timage_score\n";
  for (const auto& r : rows) out << r.name << "\t" << format_number(r.image_score) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<ScoreRow> read_scores(const fs::path& dir) {
  std::ifstream in(dir / "scores.tsv");
  if (!in) throw std::runtime_error("missing " + (dir / "scores.tsv").string());
  std::vector<ScoreRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("malformed line in scores.tsv: " + line);
    rows.push_back({line.substr(0, tab), std::stod(line.substr(tab + 1))});
  }
  return rows;
}

Map2D read_map(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing map " + path.string());
  return map_from_tensor(read_tensor(path, {.strict = true}));
}

Map2D read_mask(const fs::path& path) {
  const Image m = read_pnm(path);
  Map2D out(m.height(), m.width());
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) out(y, x) = m(y, x, 0) >= 0.5f ? 1.0f : 0.0f;
  }
  return out;
}

std::string sample_name(std::size_t i) {
  std::ostringstream s;
  s << "sample_" << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

// Mirror left-right and rotate color channels, so pasted content never
// matches the clean image at the same location.
Image defect_source(const Image& src) {
  Image out(src.height(), src.width(), src.channels());
  for (std::size_t y = 0; y < src.height(); ++y) {
    for (std::size_t x = 0; x < src.width(); ++x) {
      for (std::size_t c = 0; c < src.channels(); ++c) {
        out(y, x, c) = src(y, src.width() - 1 - x, (c + 1) % src.channels());
      }
    }
  }
  return out;
}

}  // namespace

void cmd_synth(const PipelineConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const Benchmark bench = generate_benchmark(cfg.bench_spec());
  write_benchmark(out_dir, bench);
  const BenchSpec& s = bench.spec;
  write_key_values(out_dir / "synth_manifest.txt",
                   {{"seed", std::to_string(cfg.seed)},
                    {"grid", std::to_string(s.grid)},
                    {"cell_px", std::to_string(s.cell_px)},
                    {"tokens", std::to_string(s.tokens)},
                    {"noise", format_number(s.noise)},
                    {"train", std::to_string(bench.train.size())},
                    {"test", std::to_string(bench.test.size())}});
  log << "wrote " << bench.train.size() << " train and " << bench.test.size() << " test images to "
      << out_dir.string() << "\n";
}

void cmd_fit(const PipelineConfig& cfg, const fs::path& train_dir, const fs::path& model_dir, std::ostream& log) {
  cfg.validate();
  const auto items = list_inputs(train_dir, "train");
  if (items.empty()) throw std::runtime_error("empty training set in " + train_dir.string());
  std::vector<FeatureMap> train;
  for (const auto& item : items) train.push_back(load_features(cfg, item));
  log << "extracted features of " << train.size() << " training inputs ("
      << train.front().channels() << " x " << train.front().height() << " x " << train.front().width() << ")\n";
  TrainedModels models = fit_models(cfg, train, [&](const std::string& s) { log << s << "\n"; });
  const auto [h, w] = map_resolution(cfg, items.front());
  calibrate(cfg, models, train, h, w);
  save_models(model_dir, cfg, models);
  log << "normalization range [" << models.norm_min << ", " << models.norm_max << "], train p99 image score "
      << models.train_score_p99 << "\n"
      << "models written to " << model_dir.string() << "\n";
}

void cmd_score(const PipelineConfig& user_cfg, const fs::path& model_dir, const fs::path& input_dir,
               const fs::path& out_dir, const std::string& split, std::ostream& log) {
  const PipelineConfig cfg = merge_scoring_config(load_model_config(model_dir), user_cfg);
  cfg.validate();
  const TrainedModels models = load_models(model_dir);
  const auto items = list_inputs(input_dir, split);
  if (items.empty()) throw std::runtime_error("no inputs found in " + input_dir.string());
  fs::create_directories(out_dir);
  auto refiner = refiner_from_env(out_dir / "bridge");
  std::vector<ScoreRow> rows;
  for (const auto& item : items) {
    const auto [h, w] = map_resolution(cfg, item);
    ScoredMap scored = score_features(cfg, models, load_features(cfg, item), h, w);
    if (refiner) {
      if (item.is_features()) throw std::runtime_error("refinement needs images, got features for " + item.name);
      const Image image = preprocess(read_pnm(item.image), cfg.resize_to, cfg.crop_to);
      const Map2D a_hat = normalize_map(scored.map, models.norm_min, models.norm_max);
      const Map2D a_tilde = apply_refiner(*refiner, image, a_hat);
      scored.map = fuse_refined(a_hat, a_tilde, cfg.fuse_ratio);
      scored.image_score = map_max(scored.map);
    }
    write_tensor(out_dir / (item.name + ".pnit"), to_tensor(scored.map));
    const float lo = refiner ? 0.0f : static_cast<float>(models.norm_min);
    const float hi = refiner ? 1.0f : static_cast<float>(models.norm_max);
    write_map_image(out_dir / (item.name + "_heat.ppm"), scored.map, lo, hi, MapStyle::kColorRamp);
    rows.push_back({item.name, scored.image_score});
  }
  write_scores(out_dir / "scores.tsv", rows);
  write_key_values(out_dir / "score_manifest.txt",
                   {{"seed", std::to_string(cfg.seed)},
                    {"count", std::to_string(rows.size())},
                    {"use_position", cfg.use_position ? "true" : "false"},
                    {"use_neighbor", cfg.use_neighbor ? "true" : "false"},
                    {"representative_mode", cfg.representative_mode},
                    {"sigma", format_number(cfg.sigma)},
                    {"refiner", refiner ? refiner->name() : "none"},
                    {"norm_min", refiner ? "0" : format_number(models.norm_min)},
                    {"norm_max", refiner ? "1" : format_number(models.norm_max)}});
  log << "scored " << rows.size() << " inputs into " << out_dir.string() << "\n";
}

void cmd_eval(const PipelineConfig& cfg, const fs::path& scores_dir, const fs::path& data_dir,
              const fs::path& out_dir, std::ostream& log) {
  std::map<std::string, double> image_scores;
  for (const auto& r : read_scores(scores_dir)) image_scores[r.name] = r.image_score;

  LabeledScores image_all, pixel_all;
  std::map<AnomalyKind, LabeledScores> image_kind, pixel_kind;
  LabeledScores image_normal, pixel_normal;
  std::size_t count = 0;
  for (const auto& e : read_manifest(data_dir)) {
    if (e.split != "test") continue;
    const std::string name = input_name(e.image);
    const auto it = image_scores.find(name);
    if (it == image_scores.end()) throw std::runtime_error("no score for test input " + name);
    const bool anomalous = e.kind != AnomalyKind::kNormal;
    const Map2D map = read_map(scores_dir / (name + ".pnit"));
    const Map2D mask = e.mask == "-" ? Map2D(map.height(), map.width()) : read_mask(data_dir / e.mask);
    if (!mask.same_shape(map)) {
      throw std::runtime_error("map and mask of " + name + " differ in size");
    }
    image_all.add(it->second, anomalous);
    (anomalous ? image_kind[e.kind] : image_normal).add(it->second, anomalous);
    LabeledScores& px = anomalous ? pixel_kind[e.kind] : pixel_normal;
    for (std::size_t i = 0; i < map.size(); ++i) {
      const bool positive = mask.values()[i] > 0.5f;
      pixel_all.add(map.values()[i], positive);
      px.add(map.values()[i], positive);
    }
    ++count;
  }
  if (count == 0) throw std::runtime_error("no test entries in " + data_dir.string());

  std::vector<std::pair<std::string, std::string>> report = {{"seed", std::to_string(cfg.seed)},
                                                             {"test_images", std::to_string(count)}};
  const double image_auc = auroc(image_all);
  const double pixel_auc = auroc(pixel_all);
  const F1Threshold f1 = f1_optimal_threshold(pixel_all);
  const ErrorRates rates = error_rates(pixel_all, f1.threshold);
  const F1Threshold image_f1 = f1_optimal_threshold(image_all);
  const ErrorRates image_rates = error_rates(image_all, image_f1.threshold);
  report.insert(report.end(), {{"image_auroc", format_number(image_auc)},
                               {"pixel_auroc", format_number(pixel_auc)},
                               {"pixel_f1_threshold", format_number(f1.threshold)},
                               {"pixel_f1", format_number(f1.f1)},
                               {"pixel_fpr", format_number(rates.fpr)},
                               {"pixel_fnr", format_number(rates.fnr)},
                               {"image_f1_threshold", format_number(image_f1.threshold)},
                               {"image_fpr", format_number(image_rates.fpr)},
                               {"image_fnr", format_number(image_rates.fnr)}});
  // Per anomaly kind, pooled with the normal test images.
  for (auto& [kind, scores] : pixel_kind) {
    LabeledScores px = pixel_normal, im = image_normal;
    px.scores.insert(px.scores.end(), scores.scores.begin(), scores.scores.end());
    px.labels.insert(px.labels.end(), scores.labels.begin(), scores.labels.end());
    const auto& ik = image_kind[kind];
    im.scores.insert(im.scores.end(), ik.scores.begin(), ik.scores.end());
    im.labels.insert(im.labels.end(), ik.labels.begin(), ik.labels.end());
    if (im.labels.size() > ik.labels.size()) report.emplace_back("image_auroc_" + to_string(kind), format_number(auroc(im)));
    report.emplace_back("pixel_auroc_" + to_string(kind), format_number(auroc(px)));
  }
  fs::create_directories(out_dir);
  write_key_values(out_dir / "metrics.txt", report);

  const ScoreHistogram hist = score_histogram(image_all, 20);
  std::ofstream h(out_dir / "score_histogram.tsv", std::ios::trunc);
  h << "lo\thi\tnormal\tanomalous\n";
  for (std::size_t b = 0; b < hist.normal.size(); ++b) {
    h << format_number(hist.edges[b]) << "\t" << format_number(hist.edges[b + 1]) << "\t" << hist.normal[b] << "\t"
      << hist.anomalous[b] << "\n";
  }
  for (const auto& [k, v] : report) log << k << " = " << v << "\n";
}

void cmd_ensemble(const PipelineConfig& cfg, const std::vector<fs::path>& map_dirs, const fs::path& out_dir,
                  std::ostream& log) {
  if (map_dirs.empty()) throw std::invalid_argument("ensemble needs at least one map directory");
  struct Source {
    std::vector<ScoreRow> rows;
    double lo, hi;
  };
  std::vector<Source> sources;
  for (const auto& dir : map_dirs) {
    const auto kv = read_key_values(dir / "score_manifest.txt");
    const double lo = std::stod(kv.at("norm_min")), hi = std::stod(kv.at("norm_max"));
    if (!(lo < hi)) throw std::runtime_error(dir.string() + ": invalid normalization range");
    sources.push_back({read_scores(dir), lo, hi});
  }
  fs::create_directories(out_dir);
  std::vector<ScoreRow> rows;
  for (const auto& row : sources.front().rows) {
    std::vector<Map2D> maps;
    for (std::size_t k = 0; k < sources.size(); ++k) {
      Map2D m = read_map(map_dirs[k] / (row.name + ".pnit"));
      // Affine rescaling without clamping keeps the ordering above the
      // training range.
      for (float& v : m.values()) {
        v = static_cast<float>((v - sources[k].lo) / (sources[k].hi - sources[k].lo));
      }
      maps.push_back(std::move(m));
    }
    const Map2D avg = ensemble_average(maps);
    write_tensor(out_dir / (row.name + ".pnit"), to_tensor(avg));
    write_map_image(out_dir / (row.name + "_heat.ppm"), avg, 0.0f, 1.0f, MapStyle::kColorRamp);
    rows.push_back({row.name, map_max(avg)});
  }
  write_scores(out_dir / "scores.tsv", rows);
  write_key_values(out_dir / "score_manifest.txt", {{"seed", std::to_string(cfg.seed)},
                                                    {"count", std::to_string(rows.size())},
                                                    {"members", std::to_string(map_dirs.size())},
                                                    {"norm_min", "0"},
                                                    {"norm_max", "1"}});
  log << "averaged " << map_dirs.size() << " map sets over " << rows.size() << " inputs\n";
}

void cmd_refine_data(const PipelineConfig& user_cfg, const fs::path& model_dir, const fs::path& data_dir,
                     const fs::path& out_dir, std::size_t count, std::ostream& log) {
  const PipelineConfig cfg = merge_scoring_config(load_model_config(model_dir), user_cfg);
  cfg.validate();
  const TrainedModels models = load_models(model_dir);
  const auto items = list_inputs(data_dir, "train");
  std::vector<Image> clean;
  for (const auto& item : items) {
    if (item.is_features()) throw std::runtime_error("refine-data needs images");
    clean.push_back(preprocess(read_pnm(item.image), cfg.resize_to, cfg.crop_to));
  }
  if (clean.size() < 2) throw std::runtime_error("refine-data needs at least two training images");
  fs::create_directories(out_dir);
  std::ofstream index(out_dir / "samples.tsv", std::ios::trunc);
  index << "sample\tclean\tdefect\n";
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(cfg.seed, 500000 + i));
    const std::size_t a = rng.below(clean.size());
    std::size_t b = rng.below(clean.size() - 1);
    if (b >= a) ++b;
    const Image& base = clean[a];
    const Map2D mask = generate_defect_mask(rng, base.height(), base.width(),
                                            {cfg.defect_patterns_min, cfg.defect_patterns_max},
                                            {cfg.defect_scale_min, cfg.defect_scale_max});
    const Image composite = composite_anomaly(base, defect_source(clean[b]), mask);
    const auto scored = score_features(cfg, models, image_features(cfg, composite), base.height(), base.width());
    const Map2D a_hat = normalize_map(scored.map, models.norm_min, models.norm_max);
    const fs::path dir = out_dir / sample_name(i);
    fs::create_directories(dir);
    write_tensor(dir / "image.pnit", to_tensor(composite));
    write_tensor(dir / "map.pnit", to_tensor(a_hat));
    write_tensor(dir / "mask.pnit", to_tensor(mask));
    index << sample_name(i) << "\t" << items[a].name << "\t" << items[b].name << "\n";
  }
  write_key_values(out_dir / "refine_manifest.txt",
                   {{"seed", std::to_string(cfg.seed)}, {"count", std::to_string(count)}});
  log << "wrote " << count << " refinement samples to " << out_dir.string() << "\n";
}

}  // namespace pni
