// fglab command-line entry point: run, sweep and plot.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fglab/error.hpp"
#include "fglab/experiment.hpp"
#include "fglab/parallel.hpp"

namespace {

fglab::RawConfig parse_sets(const std::vector<std::string>& sets) {
  fglab::RawConfig out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw fglab::ConfigError("--set expects key=value, got '" + s + "'");
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  fglab::configure_threads_from_env();
  CLI::App app{"Clustered federated learning laboratory"};
  app.require_subcommand(1);

  std::string config_path, output_dir, framework, measure, ablation, plot_input, vary;
  std::vector<std::string> sets;
  long long seed = -1;
  bool verify = false;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Seed override")->check(CLI::NonNegativeNumber);
  run->add_option("--output-dir", output_dir, "Output directory override");
  run->add_option("--framework", framework, "fedavg|fedprox|fedgroup|fedgrouprox|fesem|ifca");
  run->add_option("--measure", measure, "edc|madc|l2|cosine");
  run->add_option("--ablation", ablation, "none|rcc|rac");
  run->add_flag("--verify-bounds", verify, "Run the convergence-bound harness");
  run->add_option("--set", sets, "Extra key=value overrides");

  auto* sweep = app.add_subcommand("sweep", "Run variants of one config concurrently");
  sweep->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--vary", vary, "key=v1,v2,... ; each value gets <output_dir>/<key>-<value>")->required();
  sweep->add_option("--output-dir", output_dir, "Output directory override");
  sweep->add_option("--set", sets, "Extra key=value overrides");

  auto* plot = app.add_subcommand("plot", "Emit plot-ready series from run directories");
  plot->add_option("--input", plot_input, "Run directory or directory of runs")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    fglab::RawConfig overrides = parse_sets(sets);
    if (seed >= 0) overrides["seed"] = std::to_string(seed);
    if (!output_dir.empty()) overrides["output_dir"] = output_dir;
    if (!framework.empty()) overrides["framework"] = framework;
    if (!measure.empty()) overrides["measure"] = measure;
    if (!ablation.empty()) overrides["ablation"] = ablation;
    if (verify) overrides["verify_bounds"] = "true";

    if (*run) {
      const auto cfg = fglab::load_config(config_path, overrides);
      return fglab::run_experiment(cfg, std::cout);
    }
    if (*sweep) {
      const auto eq = vary.find('=');
      if (eq == std::string::npos) throw fglab::ConfigError("--vary expects key=v1,v2,...");
      const std::string key = vary.substr(0, eq);
      std::vector<fglab::ExperimentConfig> cfgs;
      for (const auto& value : split(vary.substr(eq + 1), ',')) {
        fglab::RawConfig o = overrides;
        o[key] = value;
        auto cfg = fglab::load_config(config_path, o);
        cfg.output_dir /= key + "-" + value;
        cfgs.push_back(cfg);
      }
      return fglab::run_sweep(cfgs, std::cout);
    }
    if (*plot) {
      const auto p = fglab::emit_plot_data(plot_input);
      std::cout << "series rows: " << p.series_rows << ", scatter pairs: " << p.scatter_rows;
      if (p.pearson_r) std::cout << ", pearson r: " << *p.pearson_r;
      std::cout << "\n";
      return 0;
    }
  } catch (const fglab::ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}, {"exit_code", 2}}.dump() << "\n";
    return 2;
  } catch (const fglab::Error& e) {
    std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}, {"exit_code", 1}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}, {"exit_code", 1}}.dump() << "\n";
    return 1;
  }
  return 0;
}
