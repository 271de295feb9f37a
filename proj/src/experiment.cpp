#include "fglab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fglab/error.hpp"

namespace fglab {

namespace fs = std::filesystem;

FederatedDataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_cache && fs::exists(*cfg.dataset_cache)) return read_dataset_jsonl(*cfg.dataset_cache);

  RngStream rng(cfg.seed, stream_tag("data"));
  FederatedDataset data;
  if (cfg.dataset == "synthetic") {
    data = generate_synthetic(cfg.synthetic_alpha, cfg.synthetic_beta, cfg.n_clients, rng);
  } else {
    LabeledPool pool;
    std::size_t classes = 10;
    if (cfg.dataset == "digits") {
      pool = generate_digits(cfg.samples_per_class, rng);
    } else {
      const std::string paths = cfg.dataset.substr(4);
      const auto comma = paths.find(',');
      pool = load_idx(paths.substr(0, comma), paths.substr(comma + 1));
      classes = static_cast<std::size_t>(*std::max_element(pool.labels.begin(), pool.labels.end()) + 1);
    }
    const std::size_t cpc = cfg.classes_per_client == 0 ? classes : cfg.classes_per_client;
    data = partition_noniid(pool.features, pool.labels, cfg.n_clients, cpc, rng);
  }
  if (cfg.populations > 0) plant_populations(data, cfg.populations);
  if (cfg.dataset_cache) write_dataset_jsonl(data, *cfg.dataset_cache);
  return data;
}

RunOptions run_options(const ExperimentConfig& cfg, const FederatedDataset& data) {
  RunOptions o;
  o.spec = ModelSpec{cfg.model, data.input_dim, data.num_classes, cfg.hidden_units};
  o.rounds = cfg.T;
  o.clients_per_round = cfg.K;
  o.train = TrainParams{cfg.E, cfg.B, cfg.eta, cfg.mu};
  o.seed = cfg.seed;
  return o;
}

GroupingConfig grouping_config(const ExperimentConfig& cfg) {
  return GroupingConfig{cfg.m, cfg.alpha, cfg.measure, cfg.eta_g, cfg.ablation};
}

ExperimentOutcome execute(const ExperimentConfig& cfg_in, bool record_trajectory) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  out.config = cfg_in;
  const FederatedDataset data = build_dataset(cfg_in);
  if (cfg_in.K > data.num_clients()) throw ConfigError("K exceeds the number of clients");
  if (out.config.eta_auto) out.config.eta = 0.5 / mclr_smoothness(data);
  const ExperimentConfig& cfg = out.config;

  RunOptions opts = run_options(cfg, data);
  opts.record_trajectory = record_trajectory;
  switch (cfg.framework) {
    case Framework::FedAvg:
    case Framework::FedProx:
      out.result = run_fedavg(data, opts);
      out.result.framework = to_string(cfg.framework);
      break;
    case Framework::FedGroup:
    case Framework::FedGrouProx: {
      FedGroupRun run = run_fedgroup(data, opts, grouping_config(cfg));
      out.result = std::move(run.result);
      out.result.framework = to_string(cfg.framework);
      out.cold_start = std::move(run.cold_start);
      for (const auto& g : run.final_groups) out.group_sizes.push_back(g.members.size());
      break;
    }
    case Framework::FeSEM:
    case Framework::IFCA:
      out.result = run_reassigning_baseline(data, opts, cfg.m,
                                            cfg.framework == Framework::FeSEM ? Reassignment::FeSEM
                                                                              : Reassignment::IFCA);
      out.group_sizes.assign(cfg.m, 0);
      for (const auto& a : out.result.audit) ++out.group_sizes[static_cast<std::size_t>(a.group_id)];
      break;
  }
  if (cfg.verify_bounds) out.bounds = verify_bounds(data, opts, grouping_config(cfg));
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string metrics_csv(const RunResult& r) {
  std::string s = metrics_csv_header() + "\n";
  for (const auto& m : r.metrics) s += metrics_csv_row(m, r.framework) + "\n";
  return s;
}

nlohmann::json summary_json(const ExperimentOutcome& o) {
  const auto& ms = o.result.metrics;
  nlohmann::json j;
  j["framework"] = o.result.framework;
  j["rounds"] = ms.size();
  if (ms.empty()) return j;

  std::size_t best = 0;
  for (std::size_t i = 1; i < ms.size(); ++i)
    if (ms[i].weighted_accuracy > ms[best].weighted_accuracy) best = i;
  std::vector<double> acc;
  for (const auto& m : ms) acc.push_back(m.weighted_accuracy);
  std::sort(acc.begin(), acc.end());
  const std::size_t n = acc.size();
  const double median = n % 2 ? acc[n / 2] : 0.5 * (acc[n / 2 - 1] + acc[n / 2]);

  double mean = 0.0;
  for (const auto& m : ms) mean += m.discrepancy;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& m : ms) var += (m.discrepancy - mean) * (m.discrepancy - mean);
  var /= static_cast<double>(n);

  nlohmann::json target = nullptr;
  for (const auto& m : ms)
    if (m.weighted_accuracy >= 0.85) {
      target = m.round;
      break;
    }

  j["max_weighted_accuracy"] = ms[best].weighted_accuracy;
  j["max_accuracy_round"] = ms[best].round;
  j["median_weighted_accuracy"] = median;
  j["final_weighted_accuracy"] = ms.back().weighted_accuracy;
  j["final_mean_train_loss"] = ms.back().mean_train_loss;
  j["first_round_reaching_0.85"] = target;
  j["discrepancy"] = {{"mean", mean},
                      {"variance", var},
                      {"final", ms.back().discrepancy},
                      {"min", std::min_element(ms.begin(), ms.end(), [](auto& a, auto& b) { return a.discrepancy < b.discrepancy; })->discrepancy},
                      {"max", std::max_element(ms.begin(), ms.end(), [](auto& a, auto& b) { return a.discrepancy < b.discrepancy; })->discrepancy}};
  if (!o.group_sizes.empty()) j["group_sizes"] = o.group_sizes;
  if (o.bounds) j["bound_violations"] = o.bounds->violations;
  return j;
}

nlohmann::json audit_json(const ExperimentOutcome& o) {
  nlohmann::json j;
  j["framework"] = o.result.framework;
  if (o.config.framework == Framework::FedGroup || o.config.framework == Framework::FedGrouProx) {
    j["group_initialization"] =
        "flagged: the published group-initialization line averages updates into a parameter vector; "
        "implemented as w0_g = w0 + mean(member updates), cold_direction = w0_g - w0";
    j["membership"] = "static after enrollment";
  } else {
    j["membership"] = "re-assigned each round; entries show the latest assignment";
  }
  j["clients"] = nlohmann::json::array();
  for (const auto& a : o.result.audit) {
    nlohmann::json e;
    e["client_id"] = a.client_id;
    e["group_id"] = a.group_id;
    e["assignment_round"] = a.assignment_round;
    e["assignment_dissimilarity"] = a.dissimilarity ? nlohmann::json(*a.dissimilarity) : nlohmann::json(nullptr);
    j["clients"].push_back(e);
  }
  return j;
}

nlohmann::json bound_report_json(const BoundReport& r) {
  const auto& c = r.constants;
  nlohmann::json j;
  j["notes"] = {
      "delta_kg is the maximum of |grad F_k(v) - grad F_g(v)| over visited virtual iterates",
      "per-group checks use delta_g = sum_k p_k delta_kg over the members selected that round",
      "jensen_informative lists |w~ - v_e| for e < E; only e = E is checked",
      "L_hat and M_hat carry a 1.1 safety factor"};
  j["constants"] = {{"L_hat", c.L_hat}, {"M_hat", c.M_hat}, {"eta", c.eta}, {"eta_L", c.eta * c.L_hat},
                    {"E", c.E},         {"eta_g", c.eta_g}, {"num_groups", c.num_groups},
                    {"delta", c.delta}};
  nlohmann::json dk = nlohmann::json::array();
  for (std::size_t i = 0; i < r.client_ids.size(); ++i)
    dk.push_back({{"client_id", r.client_ids[i]},
                  {"group_id", r.client_groups[i]},
                  {"delta_kg", c.delta_kg[static_cast<std::size_t>(r.client_ids[i])]}});
  j["constants"]["delta_kg"] = dk;
  j["paper_form_loss_gap_bound"] = {{"without_aggregation", loss_gap_bound(c, false)},
                                    {"with_aggregation", loss_gap_bound(c, true)}};
  auto rows = [](const std::vector<DivergenceRow>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& d : v)
      a.push_back({{"round", d.round}, {"group", d.group}, {"client", d.client}, {"e", d.e},
                   {"measured", d.measured}, {"bound", d.bound}, {"slack", d.slack}});
    return a;
  };
  j["divergence"] = rows(r.divergence);
  j["recursion"] = rows(r.recursion);
  j["groups"] = nlohmann::json::array();
  for (const auto& g : r.groups)
    j["groups"].push_back({{"round", g.round},
                           {"group", g.group},
                           {"delta_g", g.delta_g},
                           {"jensen_measured", g.jensen_measured},
                           {"jensen_bound", g.jensen_bound},
                           {"jensen_informative", g.jensen_informative},
                           {"loss_gap", g.loss_gap},
                           {"loss_gap_bound", g.loss_gap_bound},
                           {"continuity_bound", g.continuity_bound},
                           {"loss_gap_aggregated", g.loss_gap_aggregated},
                           {"loss_gap_aggregated_bound", g.loss_gap_aggregated_bound}});
  j["checks"] = r.checks;
  j["violations"] = r.violations;
  return j;
}

std::string cold_start_pairs_csv(const ColdStartResult& cs) {
  std::string s = "i,j,client_i,client_j,edc,madc\n";
  const std::size_t n = cs.madc.rows();
  if (n == 0 || cs.edc_pairwise.rows() != n) return s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      s += std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(cs.pretrained[i]) + "," +
           std::to_string(cs.pretrained[j]) + "," + format_double(cs.edc_pairwise(i, j)) + "," +
           format_double(cs.madc(i, j)) + "\n";
  return s;
}

namespace {

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + p.string());
  out << content;
  if (!out) throw Error("io", "write failed for " + p.string());
}

}  // namespace

void write_artifacts(const ExperimentOutcome& o, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "metrics.csv", metrics_csv(o.result));
  write_file(dir / "summary.json", summary_json(o).dump(2) + "\n");
  write_file(dir / "timing.json", nlohmann::json{{"wall_seconds", o.wall_seconds}}.dump(2) + "\n");
  write_file(dir / "config.resolved.json", to_json(o.config).dump(2) + "\n");
  if (is_grouped(o.config.framework)) write_file(dir / "grouping_audit.json", audit_json(o).dump(2) + "\n");
  if (o.cold_start && o.cold_start->madc.rows() > 0)
    write_file(dir / "cold_start_pairs.csv", cold_start_pairs_csv(*o.cold_start));
  if (o.bounds) write_file(dir / "bound_report.json", bound_report_json(*o.bounds).dump(2) + "\n");
}

namespace {

int write_error(const fs::path& dir, const std::string& kind, const std::string& message, int code,
                std::ostream& log) {
  log << "error (" << kind << "): " << message << "\n";
  try {
    fs::create_directories(dir);
    write_file(dir / "error.json", nlohmann::json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump(2) + "\n");
  } catch (const std::exception&) {
  }
  return code;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  try {
    const ExperimentOutcome o = execute(cfg);
    write_artifacts(o, cfg.output_dir);
    const auto& ms = o.result.metrics;
    double best = 0.0;
    for (const auto& m : ms) best = std::max(best, m.weighted_accuracy);
    log << o.result.framework << ": " << ms.size() << " rounds, max weighted accuracy " << best << " -> "
        << cfg.output_dir.string() << "\n";
    if (o.bounds) {
      log << "bound checks: " << o.bounds->checks << ", violations: " << o.bounds->violations << "\n";
      if (o.bounds->violations > 0) return 3;
    }
    return 0;
  } catch (const ConfigError& e) {
    return write_error(cfg.output_dir, "config", e.what(), 2, log);
  } catch (const Error& e) {
    return write_error(cfg.output_dir, e.kind(), e.what(), 1, log);
  } catch (const std::exception& e) {
    return write_error(cfg.output_dir, "internal", e.what(), 1, log);
  }
}

int run_sweep(const std::vector<ExperimentConfig>& cfgs, std::ostream& log) {
  std::vector<int> codes(cfgs.size(), 0);
  std::vector<std::string> logs(cfgs.size());
  const auto n = static_cast<std::ptrdiff_t>(cfgs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    std::ostringstream os;
    codes[static_cast<std::size_t>(i)] = run_experiment(cfgs[static_cast<std::size_t>(i)], os);
    logs[static_cast<std::size_t>(i)] = os.str();
  }
  for (const auto& s : logs) log << s;
  return codes.empty() ? 0 : *std::max_element(codes.begin(), codes.end());
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& p, const std::string& expected_header) {
  std::ifstream in(p);
  if (!in) throw Error("io", "cannot read " + p.string());
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw Error("schema", p.string() + ": unexpected header '" + line + "'");
  const auto columns = static_cast<std::size_t>(std::count(expected_header.begin(), expected_header.end(), ',') + 1);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) throw Error("schema", p.string() + ": wrong column count");
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

PlotData emit_plot_data(const fs::path& input) {
  std::vector<fs::path> runs;
  if (fs::exists(input / "metrics.csv")) runs.push_back(input);
  if (fs::is_directory(input))
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_directory() && fs::exists(entry.path() / "metrics.csv")) runs.push_back(entry.path());
  std::sort(runs.begin(), runs.end());
  if (runs.empty()) throw Error("io", "no metrics.csv under " + input.string());

  PlotData out;
  std::string series = "round,framework,run,metric,value\n";
  for (const auto& run : runs) {
    const std::string name = run == input ? "." : run.filename().string();
    for (const auto& r : read_csv(run / "metrics.csv", metrics_csv_header())) {
      const char* metrics[] = {"weighted_accuracy", "mean_train_loss", "discrepancy"};
      for (int k = 0; k < 3; ++k) {
        series += r[0] + "," + r[1] + "," + name + "," + metrics[k] + "," + r[static_cast<std::size_t>(2 + k)] + "\n";
        ++out.series_rows;
      }
    }
  }
  write_file(input / "plot_series.csv", series);

  std::vector<double> edc, madc;
  std::string scatter = "run,client_i,client_j,edc,madc\n";
  for (const auto& run : runs) {
    if (!fs::exists(run / "cold_start_pairs.csv")) continue;
    const std::string name = run == input ? "." : run.filename().string();
    for (const auto& r : read_csv(run / "cold_start_pairs.csv", "i,j,client_i,client_j,edc,madc")) {
      scatter += name + "," + r[2] + "," + r[3] + "," + r[4] + "," + r[5] + "\n";
      edc.push_back(std::stod(r[4]));
      madc.push_back(std::stod(r[5]));
    }
  }
  out.scatter_rows = edc.size();
  if (!edc.empty()) {
    write_file(input / "plot_scatter_edc_madc.csv", scatter);
    nlohmann::json stats{{"pairs", edc.size()}};
    if (edc.size() >= 2) {
      out.pearson_r = pearson_correlation(edc, madc);
      stats["pearson_r"] = *out.pearson_r;
    }
    write_file(input / "plot_scatter_stats.json", stats.dump(2) + "\n");
  }
  return out;
}

}  // namespace fglab
