// Experiment runner CLI: multi-seed runs, CSV aggregation with 95% CIs, and
// SVG learning-curve emission.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid config/usage.

#include "mimex/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& config_path, const std::string& seeds_csv,
            const std::string& out_dir, bool print_only) {
  mimex::ExperimentConfig cfg = mimex::parse_config_file(config_path);
  if (!seeds_csv.empty())
    cfg.seeds = mimex::detail::parse_seed_list("--seeds", seeds_csv);
  cfg.validate();
  if (print_only) {
    mimex::print_config(cfg, std::cout);
    return 0;
  }
  mimex::CurveTable merged = mimex::run_experiment(cfg, out_dir);
  std::cout << "wrote " << cfg.seeds.size() << " per-seed CSVs and merged.csv ("
            << merged.rows.size() << " rows) to " << out_dir << "\n";
  return 0;
}

int cmd_aggregate(const std::string& in_dir, const std::string& out_file) {
  const fs::path merged = fs::path(in_dir) / "merged.csv";
  std::ifstream is(merged);
  if (!is) throw std::runtime_error("cannot open " + merged.string());
  mimex::CurveTable table = mimex::read_curve_csv(is);
  mimex::AggregateTable agg = mimex::aggregate(table);
  std::ofstream os(out_file);
  if (!os) throw std::runtime_error("cannot write " + out_file);
  mimex::write_aggregate_csv(agg, os);
  std::cout << "wrote " << agg.rows.size() << " aggregated rows to " << out_file
            << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& in_files, const std::string& out_file) {
  std::vector<mimex::LabeledAggregate> series;
  for (const auto& f : in_files) {
    std::ifstream is(f);
    if (!is) throw std::runtime_error("cannot open " + f);
    series.push_back({fs::path(f).stem().string(), mimex::read_aggregate_csv(is)});
  }
  std::ofstream os(out_file);
  if (!os) throw std::runtime_error("cannot write " + out_file);
  os << mimex::emit_plot(series);
  std::cout << "wrote " << out_file << "\n";
  return 0;
}

int cmd_presets(bool list) {
  auto presets = mimex::ablation_presets();
  if (list) {
    for (const auto& p : presets)
      std::cout << p.group << "/" << p.variant << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mimex experiment harness"};
  app.require_subcommand(1);

  std::string config_path, seeds_csv, out_dir = "out";
  bool print_config = false;
  auto* run = app.add_subcommand("run", "run a multi-seed experiment");
  run->add_option("--config", config_path, "config file path")->required();
  run->add_option("--seeds", seeds_csv, "comma-separated seed override");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--print-config", print_config,
                "echo the effective config and exit");

  std::string agg_in, agg_out;
  auto* agg = app.add_subcommand("aggregate", "aggregate merged.csv into mean/CI");
  agg->add_option("--in", agg_in, "directory containing merged.csv")->required();
  agg->add_option("--out", agg_out, "output CSV file")->required();

  std::vector<std::string> plot_in;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "emit an SVG learning curve");
  plot->add_option("--in", plot_in, "aggregate CSV file(s)")->required();
  plot->add_option("--out", plot_out, "output SVG file")->required();

  bool list_presets = false;
  auto* presets = app.add_subcommand("presets", "ablation preset registry");
  presets->add_flag("--list", list_presets, "list preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seeds_csv, out_dir, print_config);
    if (agg->parsed()) return cmd_aggregate(agg_in, agg_out);
    if (plot->parsed()) return cmd_plot(plot_in, plot_out);
    if (presets->parsed()) return cmd_presets(list_presets);
  } catch (const mimex::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
