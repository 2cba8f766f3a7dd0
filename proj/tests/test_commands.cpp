#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "pni/benchmark.hpp"
#include "pni/commands.hpp"
#include "pni/eval.hpp"
#include "pni/image.hpp"
#include "pni/pipeline.hpp"
#include "pni/random.hpp"
#include "pni/tensorio.hpp"

using namespace pni;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pni_test_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

PipelineConfig tiny_config() {
  PipelineConfig cfg;
  apply_config_text(cfg,
                    "resize_to = 64\ncrop_to = 64\nagg_patch = 3\nd = 16\n"
                    "emb_fraction = 0.1\ndist_size = 16\np = 3\n"
                    "mlp_layers = 2\nmlp_width = 16\nepochs = 2\nbatch = 128\nsigma = 1\n"
                    "bench_train = 6\nbench_test_normal = 4\nbench_test_permute = 2\nbench_test_blob = 2\n");
  return cfg;
}

// Fixture shared by the end-to-end cases: one dataset and one fitted model.
struct Fitted {
  fs::path root;
  PipelineConfig cfg;
  Fitted() : root(fresh_dir("e2e")), cfg(tiny_config()) {
    std::ostringstream log;
    cmd_synth(cfg, root / "data", log);
    cmd_fit(cfg, root / "data", root / "model", log);
  }
};

const Fitted& fitted() {
  static const Fitted f;
  return f;
}

void write_score_dir(const fs::path& dir, const std::vector<std::pair<std::string, Map2D>>& maps, double lo,
                     double hi) {
  fs::create_directories(dir);
  std::ofstream s(dir / "scores.tsv");
  s << "name\timage_score\n";
  for (const auto& [name, m] : maps) {
    write_tensor(dir / (name + ".pnit"), to_tensor(m));
    s << name << "\t" << format_number(map_max(m)) << "\n";
  }
  write_key_values(dir / "score_manifest.txt", {{"norm_min", format_number(lo)}, {"norm_max", format_number(hi)}});
}

std::map<std::string, double> read_scores_tsv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    out[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  PipelineConfig cfg;
  apply_config_text(cfg, "# comment\n\nd = 64\nuse_neighbor = false\nrepresentative_mode = literal\nlambda = 0.5\n");
  CHECK(cfg.d == 64);
  CHECK_FALSE(cfg.use_neighbor);
  CHECK(cfg.representative_mode == "literal");
  CHECK(cfg.lambda == 0.5);
  CHECK_THROWS_AS(apply_config_text(cfg, "bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS(apply_config_text(cfg, "d = abc\n"));
  CHECK_THROWS(apply_config_text(cfg, "no equals sign\n"));
  try {
    apply_config_text(cfg, "d = 1\nbogus = 2\n", "file.conf");
    FAIL("no error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("file.conf:2") != std::string::npos);
  }

  // Round trip through the dump.
  PipelineConfig back;
  apply_config_text(back, dump_config(cfg));
  for (const auto& k : config_keys()) CHECK(get_config_value(back, k) == get_config_value(cfg, k));

  const PipelineConfig defaults;
  CHECK(defaults.agg_patch == 5);
  CHECK(defaults.d == 1024);
  CHECK(defaults.p == 9);
  CHECK(defaults.score_params().tau_for(defaults.dist_size) == doctest::Approx(1.0 / 4096.0));
  CHECK_NOTHROW(defaults.validate());
  PipelineConfig bad;
  bad.p = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = PipelineConfig{};
  bad.crop_to = 600;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  PipelineConfig model = tiny_config(), user;
  user.sigma = 3;
  user.d = 999;
  const PipelineConfig merged = merge_scoring_config(model, user);
  CHECK(merged.d == 16);
  CHECK(merged.sigma == 3);
}

TEST_CASE("synth writes the default benchmark deterministically") {
  const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  PipelineConfig cfg;
  std::ostringstream log;
  cmd_synth(cfg, a, log);
  cmd_synth(cfg, b, log);
  const auto entries = read_manifest(a);
  CHECK(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.split == "train"; }) == 60);
  CHECK(entries.size() == 100);
  for (const auto& e : entries) CHECK(slurp(a / e.image) == slurp(b / e.image));
  CHECK(slurp(a / "manifest.tsv") == slurp(b / "manifest.tsv"));
  CHECK(read_key_values(a / "synth_manifest.txt").at("seed") == "0");
  cfg.bench_tokens = 1;
  CHECK_THROWS_AS(cmd_synth(cfg, fresh_dir("synth_bad"), log), std::invalid_argument);
}

TEST_CASE("fit writes models that load back") {
  const auto& f = fitted();
  const auto fm = read_key_values(f.root / "model" / "fit_manifest.txt");
  CHECK(fm.at("mlp_trained") == "true");
  CHECK(fm.at("histogram") == "true");
  CHECK(fm.at("seed") == "0");
  CHECK(fm.at("dist_size") == "16");
  const TrainedModels m = load_models(f.root / "model");
  CHECK(m.coresets.dist.rows() == 16);
  CHECK(m.coresets.emb.cols() == 16);
  CHECK(m.histogram.has_value());
  CHECK(m.mlp.has_value());
  CHECK(m.norm_min < m.norm_max);
  CHECK(load_model_config(f.root / "model").d == 16);

  std::ostringstream log;
  const fs::path again = f.root / "model_again";
  cmd_fit(f.cfg, f.root / "data", again, log);
  for (const auto& entry : fs::recursive_directory_iterator(f.root / "model")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), f.root / "model");
    CAPTURE(rel.string());
    CHECK(slurp(entry.path()) == slurp(again / rel));
  }

  PipelineConfig no_nbr = f.cfg;
  no_nbr.use_neighbor = false;
  cmd_fit(no_nbr, f.root / "data", f.root / "model_nonbr", log);
  CHECK(read_key_values(f.root / "model_nonbr" / "fit_manifest.txt").at("mlp_trained") == "false");
  CHECK_FALSE(fs::exists(f.root / "model_nonbr" / "mlp"));
  CHECK_FALSE(load_models(f.root / "model_nonbr").mlp.has_value());

  fs::copy(f.root / "model", f.root / "model_broken", fs::copy_options::recursive);
  fs::remove(f.root / "model_broken" / "histogram.pnit");
  try {
    load_models(f.root / "model_broken");
    FAIL("no error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("missing model file") != std::string::npos);
  }
  CHECK_THROWS(cmd_fit(f.cfg, fresh_dir("empty_train"), f.root / "model_x", log));
}

TEST_CASE("score and eval end to end") {
  const auto& f = fitted();
  std::ostringstream log;
  cmd_score(f.cfg, f.root / "model", f.root / "data", f.root / "scores", "test", log);
  const auto scores = read_scores_tsv(f.root / "scores" / "scores.tsv");
  CHECK(scores.size() == 8);
  const Map2D m = map_from_tensor(read_tensor(f.root / "scores" / "test_0000.pnit"));
  CHECK(m.height() == 64);
  CHECK(m.width() == 64);
  CHECK(scores.at("test_0000") == doctest::Approx(map_max(m)));
  CHECK(fs::exists(f.root / "scores" / "test_0000_heat.ppm"));
  const auto sm = read_key_values(f.root / "scores" / "score_manifest.txt");
  CHECK(sm.at("seed") == "0");
  CHECK(sm.at("refiner") == "none");

  cmd_eval(f.cfg, f.root / "scores", f.root / "data", f.root / "report", log);
  const auto metrics = read_key_values(f.root / "report" / "metrics.txt");
  for (const char* k : {"image_auroc", "pixel_auroc", "pixel_f1_threshold", "pixel_f1", "pixel_fpr", "pixel_fnr",
                        "pixel_auroc_permute", "pixel_auroc_blob"}) {
    CAPTURE(k);
    REQUIRE(metrics.count(k) == 1);
    const double v = std::stod(metrics.at(k));
    CHECK(std::isfinite(v));
  }
  CHECK(std::stod(metrics.at("pixel_auroc")) >= 0.0);
  CHECK(std::stod(metrics.at("pixel_auroc")) <= 1.0);
  CHECK(fs::exists(f.root / "report" / "score_histogram.tsv"));

  // Train images score at or below the recorded 99th percentile, except possibly the top one.
  cmd_score(f.cfg, f.root / "model", f.root / "data", f.root / "scores_train", "train", log);
  const auto train_scores = read_scores_tsv(f.root / "scores_train" / "scores.tsv");
  const double p99 = std::stod(read_key_values(f.root / "model" / "fit_manifest.txt").at("train_score_p99"));
  std::vector<double> ts;
  for (const auto& [k, v] : train_scores) ts.push_back(v);
  CHECK(percentile(ts, 99.0) == doctest::Approx(p99).epsilon(1e-6));
  std::sort(ts.begin(), ts.end());
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) CHECK(ts[i] <= p99 + 1e-9);

  CHECK_THROWS(cmd_score(f.cfg, f.root / "no_model", f.root / "data", f.root / "s_x", "test", log));
}

TEST_CASE("baseline scoring ranks like nearest-neighbor distance") {
  const auto& f = fitted();
  std::ostringstream log;
  PipelineConfig off = f.cfg;
  off.use_position = false;
  off.use_neighbor = false;
  cmd_score(off, f.root / "model", f.root / "data", f.root / "scores_base", "test", log);
  const auto got = read_scores_tsv(f.root / "scores_base" / "scores.tsv");
  const TrainedModels models = load_models(f.root / "model");
  std::vector<std::pair<double, std::string>> mine, theirs;
  for (const auto& item : list_inputs(f.root / "data", "test")) {
    const FeatureMap feat = load_features(f.cfg, item);
    Map2D nn(feat.height(), feat.width());
    for (std::size_t y = 0; y < feat.height(); ++y) {
      for (std::size_t x = 0; x < feat.width(); ++x) nn(y, x) = nearest(feat.vector_at(y, x), models.coresets.emb).distance;
    }
    const Map2D up = gaussian_smooth(upsample_bilinear(nn, 64, 64), f.cfg.sigma);
    mine.push_back({map_max(up), item.name});
    theirs.push_back({got.at(item.name), item.name});
    CHECK(got.at(item.name) == doctest::Approx(map_max(up)).epsilon(1e-5));
  }
  std::sort(mine.begin(), mine.end());
  std::sort(theirs.begin(), theirs.end());
  for (std::size_t i = 0; i < mine.size(); ++i) CHECK(mine[i].second == theirs[i].second);
}

TEST_CASE("eval with oracle and random maps") {
  const fs::path root = fresh_dir("eval");
  PipelineConfig cfg = tiny_config();
  std::ostringstream log;
  cmd_synth(cfg, root / "data", log);
  const auto entries = read_manifest(root / "data");
  std::vector<std::pair<std::string, Map2D>> oracle_maps;
  for (const auto& e : entries) {
    if (e.split != "test") continue;
    const Image mask = read_pnm(root / "data" / e.mask);
    Map2D m(mask.height(), mask.width());
    m.values() = mask.values();
    oracle_maps.push_back({input_name(e.image), m});
  }
  write_score_dir(root / "oracle", oracle_maps, 0, 1);
  cmd_eval(cfg, root / "oracle", root / "data", root / "oracle", log);
  const auto perfect = read_key_values(root / "oracle" / "metrics.txt");
  CHECK(std::stod(perfect.at("image_auroc")) == 1.0);
  CHECK(std::stod(perfect.at("pixel_auroc")) == 1.0);
  CHECK(std::stod(perfect.at("pixel_fpr")) == 0.0);
  CHECK(std::stod(perfect.at("pixel_fnr")) == 0.0);

  Rng rng(17);
  double image_sum = 0;
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    auto random_maps = oracle_maps;
    for (auto& [name, m] : random_maps) {
      for (auto& v : m.values()) v = static_cast<float>(rng.uniform());
    }
    const fs::path dir = root / ("random" + std::to_string(t));
    write_score_dir(dir, random_maps, 0, 1);
    cmd_eval(cfg, dir, root / "data", dir, log);
    const auto r = read_key_values(dir / "metrics.txt");
    CHECK(std::abs(std::stod(r.at("pixel_auroc")) - 0.5) <= 0.05);
    image_sum += std::stod(r.at("image_auroc"));
  }
  CHECK(std::abs(image_sum / trials - 0.5) <= 0.05);
}

TEST_CASE("ensemble") {
  const fs::path root = fresh_dir("ensemble");
  Rng rng(5);
  auto random_map = [&] {
    Map2D m(3, 4);
    for (auto& v : m.values()) v = static_cast<float>(rng.uniform() * 5.0);
    return m;
  };
  std::vector<std::vector<std::pair<std::string, Map2D>>> sets(3);
  const double lo[] = {0.0, 1.0, -2.0}, hi[] = {1.0, 3.0, 6.0};
  for (auto& s : sets) {
    for (const char* name : {"a", "b"}) s.push_back({name, random_map()});
  }
  for (std::size_t k = 0; k < 3; ++k) write_score_dir(root / ("in" + std::to_string(k)), sets[k], lo[k], hi[k]);
  PipelineConfig cfg;
  std::ostringstream log;

  cmd_ensemble(cfg, {root / "in0"}, root / "one", log);
  CHECK(map_from_tensor(read_tensor(root / "one" / "a.pnit")) == sets[0][0].second);

  // Complementary maps blend to 0.5.
  Map2D ones(3, 4, 1.0f), zeros(3, 4, 0.0f);
  write_score_dir(root / "c1", {{"a", ones}}, 0, 1);
  write_score_dir(root / "c2", {{"a", zeros}}, 0, 1);
  cmd_ensemble(cfg, {root / "c1", root / "c2"}, root / "blend", log);
  const Map2D blend = map_from_tensor(read_tensor(root / "blend" / "a.pnit"));
  for (float v : blend.values()) CHECK(v == 0.5f);

  cmd_ensemble(cfg, {root / "in0", root / "in1", root / "in2"}, root / "three", log);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<Map2D> normed;
    for (std::size_t k = 0; k < 3; ++k) {
      Map2D m = sets[k][j].second;
      for (auto& v : m.values()) v = static_cast<float>((v - lo[k]) / (hi[k] - lo[k]));
      normed.push_back(m);
    }
    const Map2D want = ensemble_average(normed);
    const Map2D got = map_from_tensor(read_tensor(root / "three" / (sets[0][j].first + ".pnit")));
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.values()[i] == doctest::Approx(want.values()[i]));
  }
  CHECK_THROWS(cmd_ensemble(cfg, {}, root / "none", log));
}

TEST_CASE("refinement samples") {
  const auto& f = fitted();
  std::ostringstream log;
  cmd_refine_data(f.cfg, f.root / "model", f.root / "data", f.root / "refine", 3, log);
  for (int i = 0; i < 3; ++i) {
    const fs::path dir = f.root / "refine" / ("sample_000" + std::to_string(i));
    const Tensor image = read_tensor(dir / "image.pnit");
    const Map2D map = map_from_tensor(read_tensor(dir / "map.pnit"));
    const Map2D mask = map_from_tensor(read_tensor(dir / "mask.pnit"));
    CHECK(image.dims == std::vector<std::uint32_t>{3, 64, 64});
    CHECK(map.same_shape(mask));
    for (float v : map.values()) CHECK((v >= 0.0f && v <= 1.0f));
    for (float v : mask.values()) CHECK((v == 0.0f || v == 1.0f));
  }
  CHECK(fs::exists(f.root / "refine" / "samples.tsv"));
}
