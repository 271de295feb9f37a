#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fglab/error.hpp"
#include "fglab/experiment.hpp"
#include "fglab/parallel.hpp"
#include "support.hpp"

using namespace fglab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "fglab_config_tests" / name;
  fs::remove_all(p);
  return p;
}

RawConfig tiny(const std::string& framework) {
  return {{"framework", framework}, {"dataset", "digits"}, {"samples_per_class", "40"}, {"n_clients", "20"},
          {"K", "5"}, {"T", "3"}, {"E", "2"}, {"m", "2"}, {"alpha", "4"}, {"seed", "3"}};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults follow the experimental setup") {
    const auto c = resolve_config({{"framework", "fedavg"}, {"dataset", "synthetic"}, {"T", "10"}, {"seed", "1"}});
    CHECK(c.E == 20);
    CHECK(c.K == 20);
    CHECK(c.B == 10);
    CHECK(c.alpha == 20);
    CHECK(c.m == 5);
    CHECK(c.mu == 0.0);
    const auto d = resolve_config({{"framework", "fedgroup"}, {"dataset", "digits"}, {"T", "1"}});
    CHECK(d.m == 3);
    CHECK(d.eta == 0.03);
    const auto p = resolve_config({{"framework", "fedprox"}, {"dataset", "digits"}, {"T", "1"}});
    CHECK(p.mu == 1.0);
  }

  TEST_CASE("parsing text") {
    const auto raw = parse_raw_config("# comment\nframework = fedavg  # trailing\n\n T=4\ndataset= digits\n");
    CHECK(raw.at("framework") == "fedavg");
    CHECK(raw.at("T") == "4");
    CHECK_THROWS_AS(parse_raw_config("T = 1\nT = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_raw_config("no equals sign\n"), ConfigError);
  }

  TEST_CASE("validation errors") {
    auto base = tiny("fedgroup");
    auto with = [&](const std::string& k, const std::string& v) {
      RawConfig r = base;
      r[k] = v;
      return r;
    };
    CHECK_THROWS_AS(resolve_config(with("mu", "-1")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("m", "0")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("framework", "fedsgd")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("colour", "blue")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("K", "50")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("alpha", "30")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("eta_g", "-0.1")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("T", "ten")), ConfigError);
    CHECK_THROWS_AS(resolve_config(with("verify_bounds", "true")), ConfigError);  // B = 10
    RawConfig missing = base;
    missing.erase("T");
    CHECK_THROWS_AS(resolve_config(missing), ConfigError);
  }

  TEST_CASE("presets parse") {
    for (const char* name : {"motivation-digits", "synthetic-bench", "bound-verify", "edc-vs-madc", "planted-ablation"}) {
      CAPTURE(name);
      CHECK_NOTHROW(load_config(fs::path(FGLAB_SOURCE_DIR) / "configs" / (std::string(name) + ".cfg")));
    }
    const auto c = load_config(fs::path(FGLAB_SOURCE_DIR) / "configs" / "bound-verify.cfg", {{"seed", "9"}});
    CHECK(c.seed == 9);
    CHECK(c.eta_auto);
    CHECK(c.classes_per_client == 0);
  }

  TEST_CASE("artifacts are complete and byte-identical across runs and thread counts") {
    auto cfg = resolve_config(tiny("fedgroup"));
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    cfg.output_dir = a;
    std::ostringstream log;
    set_thread_count(1);
    REQUIRE(run_experiment(cfg, log) == 0);
    cfg.output_dir = b;
    set_thread_count(4);
    REQUIRE(run_experiment(cfg, log) == 0);
    set_thread_count(1);
    for (const char* f : {"metrics.csv", "summary.json", "grouping_audit.json", "cold_start_pairs.csv"}) {
      CAPTURE(f);
      REQUIRE(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(fs::exists(a / "timing.json"));
    // The resolved config differs only in the output directory.
    auto ca = nlohmann::json::parse(slurp(a / "config.resolved.json"));
    auto cb = nlohmann::json::parse(slurp(b / "config.resolved.json"));
    ca.erase("output_dir");
    cb.erase("output_dir");
    CHECK(ca == cb);
    const auto metrics = csv_rows(slurp(a / "metrics.csv"));
    CHECK(metrics.size() == 4);
    CHECK(slurp(a / "metrics.csv").rfind(metrics_csv_header() + "\n", 0) == 0);
    const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
    CHECK(summary.contains("max_weighted_accuracy"));
    CHECK(summary["discrepancy"].contains("variance"));
    const auto audit = nlohmann::json::parse(slurp(a / "grouping_audit.json"));
    CHECK(audit.contains("clients"));
    const auto resolved = nlohmann::json::parse(slurp(a / "config.resolved.json"));
    CHECK(resolved["E"] == 2);
    CHECK(resolved["framework"] == "fedgroup");
  }

  TEST_CASE("failed runs write a machine-readable error record") {
    auto cfg = resolve_config(tiny("fedavg"));
    cfg.dataset = "idx:/nonexistent/images,/nonexistent/labels";
    cfg.output_dir = scratch("err");
    std::ostringstream log;
    const int code = run_experiment(cfg, log);
    CHECK(code == 1);
    const auto err = nlohmann::json::parse(slurp(cfg.output_dir / "error.json"));
    CHECK(err["error"] == "idx_io");
    CHECK(err["exit_code"] == 1);
  }

  TEST_CASE("every framework runs") {
    for (const char* f : {"fedavg", "fedprox", "fedgroup", "fedgrouprox", "fesem", "ifca"}) {
      CAPTURE(f);
      const auto o = execute(resolve_config(tiny(f)));
      CHECK(o.result.metrics.size() == 3);
      CHECK(o.result.framework == f);
    }
  }

  TEST_CASE("plot data rows and correlation") {
    auto cfg = resolve_config(tiny("fedgroup"));
    cfg.output_dir = scratch("plot");
    std::ostringstream log;
    REQUIRE(run_experiment(cfg, log) == 0);
    const PlotData pd = emit_plot_data(cfg.output_dir);
    CHECK(pd.series_rows == 3 * 3);
    const std::size_t n = cfg.alpha * cfg.m;
    CHECK(pd.scatter_rows == n * (n - 1) / 2);
    const auto rows = csv_rows(slurp(cfg.output_dir / "plot_scatter_edc_madc.csv"));
    REQUIRE(rows.size() == pd.scatter_rows + 1);
    // Independent Pearson oracle over the written rows.
    Eigen::VectorXd x(static_cast<Eigen::Index>(pd.scatter_rows)), y(static_cast<Eigen::Index>(pd.scatter_rows));
    for (std::size_t i = 1; i < rows.size(); ++i) {
      x(static_cast<Eigen::Index>(i - 1)) = std::stod(rows[i][3]);
      y(static_cast<Eigen::Index>(i - 1)) = std::stod(rows[i][4]);
    }
    const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
    REQUIRE(pd.pearson_r.has_value());
    CHECK(std::abs(*pd.pearson_r - xc.dot(yc) / (xc.norm() * yc.norm())) < 1e-10);
    const auto series = csv_rows(slurp(cfg.output_dir / "plot_series.csv"));
    CHECK(series[0] == std::vector<std::string>{"round", "framework", "run", "metric", "value"});
    CHECK_THROWS(emit_plot_data(scratch("empty_plot_dir")));
  }

  TEST_CASE("sweep writes isolated directories") {
    std::vector<ExperimentConfig> cfgs;
    for (const char* cpc : {"1", "all"}) {
      auto raw = tiny("fedavg");
      raw["classes_per_client"] = cpc;
      auto c = resolve_config(raw);
      c.output_dir = scratch(std::string("sweep_") + cpc);
      cfgs.push_back(c);
    }
    std::ostringstream log;
    CHECK(run_sweep(cfgs, log) == 0);
    for (const auto& c : cfgs) CHECK(fs::exists(c.output_dir / "metrics.csv"));
  }
}
