#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fglab/bounds.hpp"
#include "fglab/config.hpp"

namespace fglab {

// Builds (or loads from dataset_cache) the federated dataset a config describes.
FederatedDataset build_dataset(const ExperimentConfig& cfg);

RunOptions run_options(const ExperimentConfig& cfg, const FederatedDataset& data);
GroupingConfig grouping_config(const ExperimentConfig& cfg);

struct ExperimentOutcome {
  ExperimentConfig config;  // with eta resolved when eta = auto
  RunResult result;
  std::optional<ColdStartResult> cold_start;
  std::vector<std::size_t> group_sizes;
  std::optional<BoundReport> bounds;
  double wall_seconds = 0.0;
};

// Runs the configured framework in memory.
ExperimentOutcome execute(const ExperimentConfig& cfg, bool record_trajectory = false);

std::string metrics_csv(const RunResult& r);
nlohmann::json summary_json(const ExperimentOutcome& o);
nlohmann::json audit_json(const ExperimentOutcome& o);
nlohmann::json bound_report_json(const BoundReport& r);
// i,j,client_i,client_j,edc,madc over the pre-trained clients (i < j).
std::string cold_start_pairs_csv(const ColdStartResult& cs);

// Writes metrics.csv, summary.json, timing.json, config.resolved.json and,
// when applicable, grouping_audit.json, cold_start_pairs.csv, bound_report.json.
void write_artifacts(const ExperimentOutcome& o, const std::filesystem::path& dir);

// Full run with artifact output. On failure writes error.json and returns
// nonzero: 2 for configuration errors, 3 for bound violations, 1 otherwise.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

// Runs the configs concurrently, each into its own output directory.
// Returns the largest exit code.
int run_sweep(const std::vector<ExperimentConfig>& cfgs, std::ostream& log);

struct PlotData {
  std::size_t series_rows = 0;
  std::size_t scatter_rows = 0;
  std::optional<double> pearson_r;
};

// Reads metrics.csv (and cold_start_pairs.csv) in `input` or its immediate
// subdirectories and writes plot_series.csv, plot_scatter_edc_madc.csv and
// plot_scatter_stats.json into `input`.
PlotData emit_plot_data(const std::filesystem::path& input);

}  // namespace fglab
