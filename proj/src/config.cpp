#include "pni/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "pni/random.hpp"

namespace pni {

namespace {

using Field = std::variant<std::size_t PipelineConfig::*, double PipelineConfig::*, bool PipelineConfig::*,
                           std::string PipelineConfig::*>;
static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed is parsed as std::size_t");

struct Entry {
  const char* key;
  Field field;
};

#define PNI_FIELD(name) Entry{#name, &PipelineConfig::name}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      PNI_FIELD(resize_to),          PNI_FIELD(crop_to),
      PNI_FIELD(agg_patch),          PNI_FIELD(d),
      PNI_FIELD(toy_channels),       PNI_FIELD(emb_fraction),
      PNI_FIELD(dist_size),          PNI_FIELD(projection_dim),
      PNI_FIELD(p),                  PNI_FIELD(temperature),
      PNI_FIELD(mlp_layers),         PNI_FIELD(mlp_width),
      PNI_FIELD(epochs),             PNI_FIELD(lr),
      PNI_FIELD(batch),              PNI_FIELD(sched_gamma),
      PNI_FIELD(sched_step),         PNI_FIELD(use_position),
      PNI_FIELD(use_neighbor),       PNI_FIELD(lambda),
      PNI_FIELD(tau),                PNI_FIELD(sigma),
      PNI_FIELD(representative_mode),           PNI_FIELD(fuse_ratio),
      PNI_FIELD(defect_patterns_min), PNI_FIELD(defect_patterns_max),
      PNI_FIELD(defect_scale_min),   PNI_FIELD(defect_scale_max),
      PNI_FIELD(bench_grid),         PNI_FIELD(bench_cell_px),
      PNI_FIELD(bench_tokens),       PNI_FIELD(bench_noise),
      PNI_FIELD(bench_train),        PNI_FIELD(bench_test_normal),
      PNI_FIELD(bench_test_permute), PNI_FIELD(bench_test_blob),
      PNI_FIELD(seed),
  };
  return table;
}

#undef PNI_FIELD

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (key == e.key) return e;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument("config key '" + key + "' " + what);
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.emplace_back(e.key);
  return out;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const Entry& e = find_entry(key);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") {
            cfg.*member = true;
          } else if (value == "false" || value == "0") {
            cfg.*member = false;
          } else {
            throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + value + "'");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          cfg.*member = value;
        } else {
          cfg.*member = parse_number<T>(key, value);
        }
      },
      e.field);
}

std::string get_config_value(const PipelineConfig& cfg, const std::string& key) {
  const Entry& e = find_entry(key);
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, bool>) {
          return cfg.*member ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return cfg.*member;
        } else if constexpr (std::is_same_v<T, double>) {
          return format_number(cfg.*member);
        } else {
          return std::to_string(cfg.*member);
        }
      },
      e.field);
}

void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  PipelineConfig cfg;
  apply_config_text(cfg, buf.str(), path.string());
  return cfg;
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + get_config_value(cfg, key) + "\n";
  return out;
}

void PipelineConfig::validate() const {
  require(crop_to >= 1 && crop_to <= resize_to, "crop_to", "must lie in [1, resize_to]");
  require(agg_patch % 2 == 1, "agg_patch", "must be odd");
  require(d >= 1, "d", "must be positive");
  require(toy_channels >= 1, "toy_channels", "must be positive");
  require(emb_fraction > 0.0 && emb_fraction <= 1.0, "emb_fraction", "must lie in (0, 1]");
  require(dist_size >= 1, "dist_size", "must be positive");
  require(p % 2 == 1 && p >= 3, "p", "must be odd and at least 3");
  require(temperature > 0.0, "temperature", "must be positive");
  require(mlp_layers >= 2, "mlp_layers", "must be at least 2");
  require(mlp_width >= 1, "mlp_width", "must be positive");
  require(epochs >= 1, "epochs", "must be positive");
  require(lr > 0.0, "lr", "must be positive");
  require(batch >= 2, "batch", "must be at least 2");
  require(sched_gamma > 0.0, "sched_gamma", "must be positive");
  require(sched_step >= 1, "sched_step", "must be positive");
  require(lambda > 0.0, "lambda", "must be positive");
  require(tau >= 0.0, "tau", "must be nonnegative (0 selects 1/(2 dist_size))");
  require(sigma >= 0.0, "sigma", "must be nonnegative");
  require(representative_mode == "voronoi" || representative_mode == "literal", "representative_mode", "must be voronoi or literal");
  require(fuse_ratio >= 0.0 && fuse_ratio <= 1.0, "fuse_ratio", "must lie in [0, 1]");
  require(defect_patterns_min >= 1 && defect_patterns_max >= defect_patterns_min, "defect_patterns_max",
          "must be >= defect_patterns_min >= 1");
  require(defect_scale_min > 0.0 && defect_scale_max >= defect_scale_min, "defect_scale_max",
          "must be >= defect_scale_min > 0");
}

BenchSpec PipelineConfig::bench_spec() const {
  BenchSpec s;
  s.grid = bench_grid;
  s.cell_px = bench_cell_px;
  s.tokens = bench_tokens;
  s.noise = bench_noise;
  s.train_count = bench_train;
  s.test_normal = bench_test_normal;
  s.test_permute = bench_test_permute;
  s.test_blob = bench_test_blob;
  s.seed = seed;
  return s;
}

CoresetOptions PipelineConfig::coreset_options() const {
  CoresetOptions o;
  o.emb_fraction = emb_fraction;
  o.dist_size = dist_size;
  o.seed = seed;
  if (projection_dim > 0) o.projection_dim = projection_dim;
  return o;
}

MlpTrainConfig PipelineConfig::mlp_config() const {
  MlpTrainConfig m;
  m.epochs = epochs;
  m.learning_rate = lr;
  m.batch_size = batch;
  m.scheduler_gamma = sched_gamma;
  m.scheduler_step = sched_step;
  m.seed = derive_seed(seed, 3);
  m.num_layers = mlp_layers;
  m.hidden_width = mlp_width;
  return m;
}

ScoreParams PipelineConfig::score_params() const {
  ScoreParams s;
  s.lambda = lambda;
  s.tau = tau;
  s.sigma = sigma;
  s.representative_mode = parse_representative_mode(representative_mode);
  return s;
}

PriorSwitches PipelineConfig::switches() const { return {use_position, use_neighbor}; }

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void write_key_values(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace pni
