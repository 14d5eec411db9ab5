#pragma once

#include "mimex/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimex {

// Config errors carry the offending field so the CLI can print it and exit 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  TrainerConfig trainer;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6};

  void validate() const {
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed required");
    if (trainer.env.name != "chain" && trainer.env.name != "keydoor" &&
        trainer.env.name != "point")
      throw ConfigError("env.name", "unknown env name: " + trainer.env.name);
    try {
      trainer.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("(trainer)", e.what());
    }
  }
};

// --- key=value config file ----------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline long parse_long(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (...) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key, "trailing characters in '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (...) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key, "trailing characters in '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& key,
                                                  const std::string& v) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    seeds.push_back(static_cast<std::uint64_t>(parse_long(key, item)));
  }
  if (seeds.empty()) throw ConfigError(key, "empty seed list");
  return seeds;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Applies one key=value pair; unknown keys are hard errors.
inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_long;
  TrainerConfig& t = cfg.trainer;
  auto to_int = [&](const std::string& v) { return static_cast<int>(parse_long(key, v)); };

  if (key == "env.name") t.env.name = value;
  else if (key == "env.level") {
    try {
      t.env.level = sparsity_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  } else if (key == "env.chain_n") t.env.chain_n = to_int(value);
  else if (key == "env.grid_width") t.env.grid_width = to_int(value);
  else if (key == "env.grid_height") t.env.grid_height = to_int(value);
  else if (key == "env.horizon") t.env.horizon = to_int(value);
  else if (key == "env.lift_dim") t.env.lift_dim = to_int(value);
  else if (key == "env.lift_seed")
    t.env.lift_seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "explorer") t.explorer = value;
  else if (key == "seeds") cfg.seeds = detail::parse_seed_list(key, value);
  else if (key == "total_steps") t.total_steps = parse_long(key, value);
  else if (key == "eval_every") t.eval_every = to_int(value);
  else if (key == "eval_episodes") t.eval_episodes = to_int(value);
  else if (key == "warmup_steps") t.warmup_steps = to_int(value);
  else if (key == "encoder_dim") t.encoder_dim = to_int(value);
  else if (key == "policy_hidden") t.policy_hidden = to_int(value);
  else if (key == "noise_scale") t.noise_scale = parse_double(key, value);
  else if (key == "ppo.rollout_horizon") t.ppo.rollout_horizon = to_int(value);
  else if (key == "ppo.epochs") t.ppo.epochs = to_int(value);
  else if (key == "ppo.minibatch_size") t.ppo.minibatch_size = to_int(value);
  else if (key == "ppo.clip_eps") t.ppo.clip_eps = parse_double(key, value);
  else if (key == "ppo.gamma") t.ppo.gamma = parse_double(key, value);
  else if (key == "ppo.lambda") t.ppo.lambda = parse_double(key, value);
  else if (key == "ppo.value_coef") t.ppo.value_coef = parse_double(key, value);
  else if (key == "ppo.entropy_coef") t.ppo.entropy_coef = parse_double(key, value);
  else if (key == "ppo.learning_rate") t.ppo.learning_rate = parse_double(key, value);
  else if (key == "mimex.window_length") t.mimex.window_length = to_int(value);
  else if (key == "mimex.beta") t.mimex.beta = parse_double(key, value);
  else if (key == "mimex.learning_rate") t.mimex.learning_rate = parse_double(key, value);
  else if (key == "mimex.batch_size") t.mimex.batch_size = to_int(value);
  else if (key == "mimex.normalize_reward")
    t.mimex.normalize_reward = parse_bool(key, value);
  else if (key == "mimex.mask.kind") {
    try {
      t.mimex.mask_spec.kind = mask_kind_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  } else if (key == "mimex.mask.ratio")
    t.mimex.mask_spec.ratio = parse_double(key, value);
  else if (key == "mimex.mask.num_samples")
    t.mimex.mask_spec.num_samples = to_int(value);
  else if (key == "transformer.encoder_dim") t.transformer.encoder_dim = to_int(value);
  else if (key == "transformer.encoder_blocks")
    t.transformer.encoder_blocks = to_int(value);
  else if (key == "transformer.encoder_heads")
    t.transformer.encoder_heads = to_int(value);
  else if (key == "transformer.decoder_dim") t.transformer.decoder_dim = to_int(value);
  else if (key == "transformer.decoder_blocks")
    t.transformer.decoder_blocks = to_int(value);
  else if (key == "transformer.decoder_heads")
    t.transformer.decoder_heads = to_int(value);
  else if (key == "transformer.mlp_ratio")
    t.transformer.mlp_ratio = parse_double(key, value);
  else if (key == "transformer.max_len") t.transformer.max_len = to_int(value);
  else if (key == "rnd.feature_dim") t.rnd_feature_dim = to_int(value);
  else if (key == "rnd.hidden") t.rnd_hidden = to_int(value);
  else if (key == "rnd.learning_rate") t.rnd_lr = parse_double(key, value);
  else if (key == "icm.feature_dim") t.icm_feature_dim = to_int(value);
  else if (key == "icm.hidden") t.icm_hidden = to_int(value);
  else if (key == "icm.learning_rate") t.icm_lr = parse_double(key, value);
  else throw ConfigError(key, "unknown key");
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("(line " + std::to_string(lineno) + ")",
                        "expected key = value, got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    apply_config_key(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(config)", "cannot open file: " + path);
  return parse_config(in);
}

// Canonical echo; parse(print_config(x)) reproduces x exactly.
inline void print_config(const ExperimentConfig& cfg, std::ostream& os) {
  using detail::format_double;
  const TrainerConfig& t = cfg.trainer;
  os << "env.name = " << t.env.name << '\n';
  os << "env.level = " << to_string(t.env.level) << '\n';
  os << "env.chain_n = " << t.env.chain_n << '\n';
  os << "env.grid_width = " << t.env.grid_width << '\n';
  os << "env.grid_height = " << t.env.grid_height << '\n';
  os << "env.horizon = " << t.env.horizon << '\n';
  os << "env.lift_dim = " << t.env.lift_dim << '\n';
  os << "env.lift_seed = " << t.env.lift_seed << '\n';
  os << "explorer = " << t.explorer << '\n';
  os << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    os << (i ? "," : "") << cfg.seeds[i];
  os << '\n';
  os << "total_steps = " << t.total_steps << '\n';
  os << "eval_every = " << t.eval_every << '\n';
  os << "eval_episodes = " << t.eval_episodes << '\n';
  os << "warmup_steps = " << t.warmup_steps << '\n';
  os << "encoder_dim = " << t.encoder_dim << '\n';
  os << "policy_hidden = " << t.policy_hidden << '\n';
  os << "noise_scale = " << format_double(t.noise_scale) << '\n';
  os << "ppo.rollout_horizon = " << t.ppo.rollout_horizon << '\n';
  os << "ppo.epochs = " << t.ppo.epochs << '\n';
  os << "ppo.minibatch_size = " << t.ppo.minibatch_size << '\n';
  os << "ppo.clip_eps = " << format_double(t.ppo.clip_eps) << '\n';
  os << "ppo.gamma = " << format_double(t.ppo.gamma) << '\n';
  os << "ppo.lambda = " << format_double(t.ppo.lambda) << '\n';
  os << "ppo.value_coef = " << format_double(t.ppo.value_coef) << '\n';
  os << "ppo.entropy_coef = " << format_double(t.ppo.entropy_coef) << '\n';
  os << "ppo.learning_rate = " << format_double(t.ppo.learning_rate) << '\n';
  os << "mimex.window_length = " << t.mimex.window_length << '\n';
  os << "mimex.beta = " << format_double(t.mimex.beta) << '\n';
  os << "mimex.learning_rate = " << format_double(t.mimex.learning_rate) << '\n';
  os << "mimex.batch_size = " << t.mimex.batch_size << '\n';
  os << "mimex.normalize_reward = "
     << (t.mimex.normalize_reward ? "true" : "false") << '\n';
  os << "mimex.mask.kind = " << to_string(t.mimex.mask_spec.kind) << '\n';
  os << "mimex.mask.ratio = " << format_double(t.mimex.mask_spec.ratio) << '\n';
  os << "mimex.mask.num_samples = " << t.mimex.mask_spec.num_samples << '\n';
  os << "transformer.encoder_dim = " << t.transformer.encoder_dim << '\n';
  os << "transformer.encoder_blocks = " << t.transformer.encoder_blocks << '\n';
  os << "transformer.encoder_heads = " << t.transformer.encoder_heads << '\n';
  os << "transformer.decoder_dim = " << t.transformer.decoder_dim << '\n';
  os << "transformer.decoder_blocks = " << t.transformer.decoder_blocks << '\n';
  os << "transformer.decoder_heads = " << t.transformer.decoder_heads << '\n';
  os << "transformer.mlp_ratio = " << format_double(t.transformer.mlp_ratio) << '\n';
  os << "transformer.max_len = " << t.transformer.max_len << '\n';
  os << "rnd.feature_dim = " << t.rnd_feature_dim << '\n';
  os << "rnd.hidden = " << t.rnd_hidden << '\n';
  os << "rnd.learning_rate = " << format_double(t.rnd_lr) << '\n';
  os << "icm.feature_dim = " << t.icm_feature_dim << '\n';
  os << "icm.hidden = " << t.icm_hidden << '\n';
  os << "icm.learning_rate = " << format_double(t.icm_lr) << '\n';
}

// --- curve tables and CSV ------------------------------------------------------

struct CurveRow {
  std::uint64_t seed = 0;
  long env_steps = 0;
  double success_rate = 0;
  double mean_intrinsic = 0;
  double mimex_loss = 0;
};

struct CurveTable {
  std::vector<CurveRow> rows;  // sorted by (seed, env_steps)

  void sort() {
    std::sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
      return a.seed != b.seed ? a.seed < b.seed : a.env_steps < b.env_steps;
    });
  }
};

inline const char* kCurveCsvHeader = "seed,env_steps,success_rate,mean_intrinsic,mimex_loss";

inline void write_curve_csv(const CurveTable& table, std::ostream& os) {
  os << kCurveCsvHeader << '\n';
  for (const auto& r : table.rows)
    os << r.seed << ',' << r.env_steps << ',' << detail::format_double(r.success_rate)
       << ',' << detail::format_double(r.mean_intrinsic) << ','
       << detail::format_double(r.mimex_loss) << '\n';
}

inline CurveTable read_curve_csv(std::istream& is) {
  CurveTable table;
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kCurveCsvHeader)
    throw std::invalid_argument("curve csv: bad or missing header");
  while (std::getline(is, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    CurveRow r;
    std::getline(ss, f, ',');
    r.seed = static_cast<std::uint64_t>(std::stoull(f));
    std::getline(ss, f, ',');
    r.env_steps = std::stol(f);
    std::getline(ss, f, ',');
    r.success_rate = std::stod(f);
    std::getline(ss, f, ',');
    r.mean_intrinsic = std::stod(f);
    std::getline(ss, f, ',');
    r.mimex_loss = std::stod(f);
    table.rows.push_back(r);
  }
  return table;
}

// Seed shift for CI sharding, from the environment.
inline std::uint64_t seed_offset_from_env() {
  const char* v = std::getenv("MIMEX_SEED_OFFSET");
  if (!v || !*v) return 0;
  return static_cast<std::uint64_t>(std::strtoull(v, nullptr, 10));
}

// Runs train() per seed and writes one CSV per seed plus merged.csv.
inline CurveTable run_experiment(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const std::uint64_t offset = seed_offset_from_env();
  CurveTable merged;
  for (std::uint64_t seed : cfg.seeds) {
    TrainerConfig tc = cfg.trainer;
    tc.seed = seed + offset;
    auto curve = train(tc);
    CurveTable per_seed;
    for (const auto& p : curve)
      per_seed.rows.push_back(
          {tc.seed, p.env_steps, p.success_rate, p.mean_intrinsic, p.model_loss});
    std::ofstream os(out_dir / ("seed_" + std::to_string(tc.seed) + ".csv"));
    write_curve_csv(per_seed, os);
    merged.rows.insert(merged.rows.end(), per_seed.rows.begin(), per_seed.rows.end());
  }
  merged.sort();
  std::ofstream os(out_dir / "merged.csv");
  write_curve_csv(merged, os);
  return merged;
}

// --- aggregation: per-step mean and 95% t-interval ------------------------------

// Two-tailed 97.5% Student-t quantiles for 1..30 degrees of freedom; the
// normal quantile is used beyond that.
inline double t_quantile_975(int dof) {
  static const double table[30] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) throw std::invalid_argument("t quantile: dof must be >= 1");
  return dof <= 30 ? table[dof - 1] : 1.96;
}

struct AggregateRow {
  long env_steps = 0;
  double mean = 0;
  double ci_halfwidth = 0;
};

struct AggregateTable {
  std::vector<AggregateRow> rows;
};

// Aggregates the success_rate column across seeds on an aligned step grid.
inline AggregateTable aggregate(const CurveTable& table) {
  std::map<std::uint64_t, std::vector<CurveRow>> by_seed;
  for (const auto& r : table.rows) by_seed[r.seed].push_back(r);
  const int n = static_cast<int>(by_seed.size());
  if (n < 2) throw std::invalid_argument("aggregate: need at least 2 seeds");

  const auto& first = by_seed.begin()->second;
  for (const auto& [seed, rows] : by_seed) {
    if (rows.size() != first.size())
      throw std::invalid_argument("aggregate: step grids differ in length");
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].env_steps != first[i].env_steps)
        throw std::invalid_argument("aggregate: step grids misaligned at seed " +
                                    std::to_string(seed));
  }

  AggregateTable out;
  const double t = t_quantile_975(n - 1);
  for (std::size_t i = 0; i < first.size(); ++i) {
    double mean = 0;
    for (const auto& [seed, rows] : by_seed) mean += rows[i].success_rate;
    mean /= n;
    double var = 0;
    for (const auto& [seed, rows] : by_seed) {
      const double d = rows[i].success_rate - mean;
      var += d * d;
    }
    var /= (n - 1);  // sample variance
    out.rows.push_back({first[i].env_steps, mean, t * std::sqrt(var / n)});
  }
  return out;
}

inline const char* kAggregateCsvHeader = "env_steps,mean_success,ci95_halfwidth";

inline void write_aggregate_csv(const AggregateTable& table, std::ostream& os) {
  os << kAggregateCsvHeader << '\n';
  for (const auto& r : table.rows)
    os << r.env_steps << ',' << detail::format_double(r.mean) << ','
       << detail::format_double(r.ci_halfwidth) << '\n';
}

inline AggregateTable read_aggregate_csv(std::istream& is) {
  AggregateTable table;
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kAggregateCsvHeader)
    throw std::invalid_argument("aggregate csv: bad or missing header");
  while (std::getline(is, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    AggregateRow r;
    std::getline(ss, f, ',');
    r.env_steps = std::stol(f);
    std::getline(ss, f, ',');
    r.mean = std::stod(f);
    std::getline(ss, f, ',');
    r.ci_halfwidth = std::stod(f);
    table.rows.push_back(r);
  }
  return table;
}

// --- SVG learning curves --------------------------------------------------------

struct LabeledAggregate {
  std::string label;
  AggregateTable table;
};

// Self-contained deterministic SVG: one mean polyline plus a translucent CI
// band per series, fixed axes for env_steps vs success_rate.
inline std::string emit_plot(const std::vector<LabeledAggregate>& series) {
  if (series.empty()) throw std::invalid_argument("emit_plot: no series");
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const double W = 640, H = 420;
  const double L = 70, R = 20, T = 20, B = 50;  // margins
  long max_x = 1;
  double max_y = 1.0;
  for (const auto& s : series)
    for (const auto& r : s.table.rows) {
      max_x = std::max(max_x, r.env_steps);
      max_y = std::max(max_y, r.mean + r.ci_halfwidth);
    }
  auto sx = [&](double x) { return L + (W - L - R) * x / static_cast<double>(max_x); };
  auto sy = [&](double y) { return H - B - (H - T - B) * y / max_y; };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
     << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  // axes
  os << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(H - B) << "\" x2=\""
     << fmt(W - R) << "\" y2=\"" << fmt(H - B)
     << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  os << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(T) << "\" x2=\"" << fmt(L)
     << "\" y2=\"" << fmt(H - B) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  os << "<text x=\"" << fmt((L + W - R) / 2) << "\" y=\"" << fmt(H - 12)
     << "\" text-anchor=\"middle\" font-size=\"14\">env_steps</text>\n";
  os << "<text x=\"18\" y=\"" << fmt((T + H - B) / 2)
     << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
     << fmt((T + H - B) / 2) << ")\">success_rate</text>\n";
  // tick labels at the extremes
  os << "<text x=\"" << fmt(L) << "\" y=\"" << fmt(H - B + 18)
     << "\" text-anchor=\"middle\" font-size=\"12\">0</text>\n";
  os << "<text x=\"" << fmt(W - R) << "\" y=\"" << fmt(H - B + 18)
     << "\" text-anchor=\"middle\" font-size=\"12\">" << max_x << "</text>\n";
  os << "<text x=\"" << fmt(L - 8) << "\" y=\"" << fmt(H - B + 4)
     << "\" text-anchor=\"end\" font-size=\"12\">0</text>\n";
  os << "<text x=\"" << fmt(L - 8) << "\" y=\"" << fmt(T + 4)
     << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(max_y) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& rows = series[k].table.rows;
    if (rows.empty()) throw std::invalid_argument("emit_plot: empty series");
    const char* color = kColors[k % 6];
    // CI band
    os << "<path d=\"M";
    for (const auto& r : rows)
      os << ' ' << fmt(sx(static_cast<double>(r.env_steps))) << ' '
         << fmt(sy(std::min(max_y, r.mean + r.ci_halfwidth)));
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
      os << " L " << fmt(sx(static_cast<double>(it->env_steps))) << ' '
         << fmt(sy(std::max(0.0, it->mean - it->ci_halfwidth)));
    os << " Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    // mean line
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows)
      os << fmt(sx(static_cast<double>(r.env_steps))) << ','
         << fmt(sy(r.mean)) << ' ';
    os << "\"/>\n";
    // legend entry
    const double ly = T + 18 + 18 * static_cast<double>(k);
    os << "<line x1=\"" << fmt(L + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\""
       << fmt(L + 40) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt(L + 46) << "\" y=\"" << fmt(ly + 4)
       << "\" font-size=\"12\">" << series[k].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// --- ablation presets -----------------------------------------------------------

struct Preset {
  std::string group;    // ablation axis
  std::string variant;  // point on the axis
  ExperimentConfig config;
};

// Desk-scale smoke base: single-seed MIMEx run on KeyDoorGrid(7x7, sparse).
inline ExperimentConfig preset_base() {
  ExperimentConfig cfg;
  cfg.seeds = {0};
  TrainerConfig& t = cfg.trainer;
  t.env.name = "keydoor";
  t.env.grid_width = 7;
  t.env.grid_height = 7;
  t.env.level = SparsityLevel::kSparse;
  t.explorer = "mimex";
  t.total_steps = 4096;
  t.eval_every = 2048;
  t.eval_episodes = 4;
  t.warmup_steps = 1000;
  t.encoder_dim = 16;
  t.policy_hidden = 32;
  t.ppo.rollout_horizon = 256;
  t.mimex.window_length = 5;
  t.mimex.batch_size = 32;
  t.mimex.mask_spec.num_samples = 5;
  t.transformer = TransformerConfig{16, 1, 2, 8, 1, 2, 2.0, 0, 8};
  return cfg;
}

inline std::vector<Preset> ablation_presets() {
  std::vector<Preset> out;
  for (int T = 2; T <= 6; ++T) {
    Preset p{"seq_len", "T" + std::to_string(T), preset_base()};
    p.config.trainer.mimex.window_length = T;
    out.push_back(std::move(p));
  }
  for (int M : {1, 5}) {
    Preset p{"num_masks", "nm" + std::to_string(M), preset_base()};
    p.config.trainer.mimex.mask_spec.num_samples = M;
    out.push_back(std::move(p));
  }
  for (const char* scale : {"smaller", "larger"}) {
    Preset p{"decoder_scale", scale, preset_base()};
    if (std::string(scale) == "larger")
      p.config.trainer.transformer = p.config.trainer.transformer.larger_decoder();
    out.push_back(std::move(p));
  }
  for (double r : {0.2, 0.5, 0.7}) {
    Preset p{"mask_ratio", detail::format_double(r), preset_base()};
    p.config.trainer.mimex.mask_spec.ratio = r;
    out.push_back(std::move(p));
  }
  for (double r : {0.8, 0.9, 0.95}) {
    Preset p{"feature_mask", detail::format_double(r), preset_base()};
    p.config.trainer.mimex.mask_spec.kind = MaskKind::kUniformFeature;
    p.config.trainer.mimex.mask_spec.ratio = r;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mimex
