#include "fglab/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fglab/error.hpp"

namespace fglab {

std::string to_string(Framework f) {
  switch (f) {
    case Framework::FedAvg: return "fedavg";
    case Framework::FedProx: return "fedprox";
    case Framework::FedGroup: return "fedgroup";
    case Framework::FedGrouProx: return "fedgrouprox";
    case Framework::FeSEM: return "fesem";
    case Framework::IFCA: return "ifca";
  }
  return "unknown";
}

Framework parse_framework(const std::string& s) {
  for (Framework f : {Framework::FedAvg, Framework::FedProx, Framework::FedGroup, Framework::FedGrouProx,
                      Framework::FeSEM, Framework::IFCA})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown framework '" + s + "'");
}

bool is_grouped(Framework f) { return f != Framework::FedAvg && f != Framework::FedProx; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::set<std::string> kKnownKeys = {
    "framework", "dataset", "model", "hidden_units", "T", "K", "E", "B", "eta", "mu", "m", "alpha",
    "eta_g", "measure", "ablation", "classes_per_client", "n_clients", "populations", "seed",
    "output_dir", "synthetic_alpha", "synthetic_beta", "samples_per_class", "dataset_cache",
    "verify_bounds"};

double as_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno != 0 || !std::isfinite(d))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

long long as_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

std::size_t as_count(const std::string& key, const std::string& v, long long lo) {
  const long long x = as_int(key, v);
  if (x < lo) throw ConfigError(key + ": must be >= " + std::to_string(lo));
  return static_cast<std::size_t>(x);
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace

RawConfig parse_raw_config(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!raw.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  return raw;
}

RawConfig read_raw_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_raw_config(ss.str());
}

ExperimentConfig resolve_config(const RawConfig& raw) {
  for (const auto& [k, v] : raw)
    if (!kKnownKeys.count(k)) throw ConfigError("unknown key '" + k + "'");
  for (const char* req : {"framework", "dataset", "T"})
    if (!raw.count(req)) throw ConfigError(std::string("missing required key '") + req + "'");
  auto get = [&](const std::string& k) -> const std::string* {
    auto it = raw.find(k);
    return it == raw.end() ? nullptr : &it->second;
  };

  ExperimentConfig c;
  c.framework = parse_framework(*get("framework"));
  c.dataset = *get("dataset");
  const bool synthetic = c.dataset == "synthetic";
  if (!synthetic && c.dataset != "digits" && c.dataset.rfind("idx:", 0) != 0)
    throw ConfigError("unknown dataset '" + c.dataset + "'");
  if (c.dataset.rfind("idx:", 0) == 0 && c.dataset.find(',') == std::string::npos)
    throw ConfigError("dataset idx:<images>,<labels> needs two paths");

  c.T = static_cast<int>(as_count("T", *get("T"), 1));
  if (auto v = get("model")) c.model = parse_model_kind(*v);
  if (auto v = get("hidden_units")) c.hidden_units = as_count("hidden_units", *v, 1);
  if (auto v = get("K")) c.K = as_count("K", *v, 1);
  if (auto v = get("E")) c.E = static_cast<int>(as_count("E", *v, 1));
  if (auto v = get("B")) c.B = as_count("B", *v, 0);

  c.eta = synthetic ? 0.01 : 0.03;
  if (auto v = get("eta")) {
    if (*v == "auto") {
      c.eta_auto = true;
      if (c.model != ModelKind::MCLR) throw ConfigError("eta = auto needs the mclr model");
    } else {
      c.eta = as_double("eta", *v);
      if (!(c.eta > 0.0)) throw ConfigError("eta: must be positive");
    }
  }

  const bool prox = c.framework == Framework::FedProx || c.framework == Framework::FedGrouProx;
  c.mu = prox ? 1.0 : 0.0;
  if (auto v = get("mu")) {
    c.mu = as_double("mu", *v);
    if (c.mu < 0.0) throw ConfigError("mu: must be nonnegative");
  }

  c.m = synthetic ? 5 : 3;
  if (auto v = get("m")) c.m = as_count("m", *v, 0);
  if (is_grouped(c.framework) && c.m < 1) throw ConfigError("m: must be >= 1 for grouped frameworks");
  if (auto v = get("alpha")) c.alpha = as_count("alpha", *v, 1);
  if (auto v = get("eta_g")) {
    c.eta_g = as_double("eta_g", *v);
    if (c.eta_g < 0.0) throw ConfigError("eta_g: must be nonnegative");
  }
  if (auto v = get("measure")) c.measure = parse_measure(*v);
  if (auto v = get("ablation")) c.ablation = parse_ablation(*v);

  if (auto v = get("classes_per_client")) c.classes_per_client = *v == "all" ? 0 : as_count("classes_per_client", *v, 1);
  if (auto v = get("n_clients")) c.n_clients = as_count("n_clients", *v, 1);
  if (auto v = get("populations")) c.populations = as_count("populations", *v, 0);
  if (auto v = get("seed")) c.seed = static_cast<std::uint64_t>(as_count("seed", *v, 0));
  if (auto v = get("output_dir")) c.output_dir = *v;
  if (auto v = get("synthetic_alpha")) c.synthetic_alpha = as_double("synthetic_alpha", *v);
  if (auto v = get("synthetic_beta")) c.synthetic_beta = as_double("synthetic_beta", *v);
  if (c.synthetic_alpha < 0.0 || c.synthetic_beta < 0.0) throw ConfigError("synthetic_alpha/beta: must be nonnegative");
  if (auto v = get("samples_per_class")) c.samples_per_class = as_count("samples_per_class", *v, 1);
  if (auto v = get("dataset_cache"); v && !v->empty()) c.dataset_cache = *v;
  if (auto v = get("verify_bounds")) c.verify_bounds = as_bool("verify_bounds", *v);

  if (c.K > c.n_clients) throw ConfigError("K: exceeds n_clients");
  if (is_grouped(c.framework) && c.framework != Framework::FeSEM && c.framework != Framework::IFCA &&
      c.alpha * c.m > c.n_clients)
    throw ConfigError("alpha * m exceeds n_clients");
  if (c.verify_bounds) {
    if (c.model != ModelKind::MCLR) throw ConfigError("verify_bounds needs the mclr model");
    if (c.B != 0) throw ConfigError("verify_bounds needs B = 0 (full-gradient local steps)");
    if (c.mu != 0.0) throw ConfigError("verify_bounds needs mu = 0");
    if (c.framework != Framework::FedGroup) throw ConfigError("verify_bounds needs framework = fedgroup");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const RawConfig& overrides) {
  RawConfig raw = read_raw_config(path);
  for (const auto& [k, v] : overrides) raw[k] = v;
  return resolve_config(raw);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["framework"] = to_string(c.framework);
  j["dataset"] = c.dataset;
  j["model"] = to_string(c.model);
  j["hidden_units"] = c.hidden_units;
  j["T"] = c.T;
  j["K"] = c.K;
  j["E"] = c.E;
  j["B"] = c.B;
  j["eta"] = c.eta;
  j["eta_auto"] = c.eta_auto;
  j["mu"] = c.mu;
  j["m"] = c.m;
  j["alpha"] = c.alpha;
  j["eta_g"] = c.eta_g;
  j["measure"] = to_string(c.measure);
  j["ablation"] = to_string(c.ablation);
  j["classes_per_client"] = c.classes_per_client;
  j["n_clients"] = c.n_clients;
  j["populations"] = c.populations;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["synthetic_alpha"] = c.synthetic_alpha;
  j["synthetic_beta"] = c.synthetic_beta;
  j["samples_per_class"] = c.samples_per_class;
  j["dataset_cache"] = c.dataset_cache ? nlohmann::json(c.dataset_cache->string()) : nlohmann::json(nullptr);
  j["verify_bounds"] = c.verify_bounds;
  return j;
}

}  // namespace fglab
