#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "fglab/fedgroup.hpp"
#include "fglab/models.hpp"

namespace fglab {

enum class Framework { FedAvg, FedProx, FedGroup, FedGrouProx, FeSEM, IFCA };
std::string to_string(Framework f);
Framework parse_framework(const std::string& s);
bool is_grouped(Framework f);

struct ExperimentConfig {
  Framework framework = Framework::FedAvg;
  std::string dataset;  // synthetic | digits | idx:<images>,<labels>
  ModelKind model = ModelKind::MCLR;
  std::size_t hidden_units = 128;
  int T = 0;
  std::size_t K = 20;
  int E = 20;
  std::size_t B = 10;  // 0 = full shard
  double eta = 0.03;
  bool eta_auto = false;  // 0.5 / L_hat, MCLR only
  double mu = 0.0;
  std::size_t m = 3;
  std::size_t alpha = 20;
  double eta_g = 0.0;
  Measure measure = Measure::EDC;
  Ablation ablation = Ablation::None;
  std::size_t classes_per_client = 2;  // 0 = all classes
  std::size_t n_clients = 100;
  std::size_t populations = 0;  // 0 = no planted populations
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/out";
  double synthetic_alpha = 1.0;
  double synthetic_beta = 1.0;
  std::size_t samples_per_class = 300;
  std::optional<std::filesystem::path> dataset_cache;
  bool verify_bounds = false;
};

using RawConfig = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment. Duplicate keys are rejected.
RawConfig read_raw_config(const std::filesystem::path& path);
RawConfig parse_raw_config(const std::string& text);

// Applies defaults, types and range checks. Unknown keys are rejected.
ExperimentConfig resolve_config(const RawConfig& raw);

// Reads the file, lets `overrides` replace keys, resolves.
ExperimentConfig load_config(const std::filesystem::path& path, const RawConfig& overrides = {});

nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace fglab
