#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fglab/datagen.hpp"
#include "fglab/models.hpp"
#include "fglab/numkit.hpp"
#include "fglab/rng.hpp"

namespace fglab {

// Local solver settings shared by every framework.
struct TrainParams {
  int epochs = 20;          // E
  std::size_t batch_size = 10;  // B; 0 means the whole shard
  double eta = 0.03;
  double mu = 0.0;
};

struct ClientState {
  int client_id = 0;
  std::optional<ParamVector> last_update;
  std::optional<int> group_id;
};

struct RoundMetrics {
  int round = 0;
  double weighted_accuracy = 0.0;
  double mean_train_loss = 0.0;
  double discrepancy = 0.0;
  std::vector<int> selected;
};

// Streams are keyed by (seed, purpose, round, client) so that results do not
// depend on which worker runs which client.
RngStream selection_stream(std::uint64_t seed, int round);
RngStream training_stream(std::uint64_t seed, int round, int client_id);
RngStream pretraining_stream(std::uint64_t seed, int client_id);

// Runs E epochs of (proximal) mini-batch SGD from `w` and returns w_final - w.
// Each epoch reshuffles the shard; a trailing short batch is kept.
ParamVector client_update(const ClientShard& shard, const ModelSpec& spec, const ParamVector& w,
                          const TrainParams& train, RngStream& rng);

// K distinct ids from [0, n), sorted ascending.
std::vector<int> select_clients(int round, std::size_t K, std::size_t n, RngStream& rng);

// w + sum_i (n_i / n) * updates_i with n = sum n_i, accumulated in input order.
ParamVector weighted_aggregate(const ParamVector& w, const std::vector<ParamVector>& updates,
                               const std::vector<std::size_t>& sizes);

struct RoundOutcome {
  ParamVector new_global;
  std::vector<ParamVector> updates;  // aligned with `selected`
};

// One FedAvg (mu = 0) or FedProx (mu > 0) round over `selected`, clients
// trained concurrently.
RoundOutcome fedavg_round(const ParamVector& global_w, const FederatedDataset& data,
                          const std::vector<int>& selected, const ModelSpec& spec,
                          const TrainParams& train, std::uint64_t seed, int round);

// Mean l2 distance of client models to the reference model.
double discrepancy(const std::vector<ParamVector>& client_ws, const ParamVector& w_ref);

// Test accuracy and train loss over a roster, each client scored with its own model.
struct Evaluation {
  std::size_t correct = 0;
  std::size_t test_total = 0;
  double train_loss_sum = 0.0;  // sum of n_i * loss_i
  std::size_t train_total = 0;

  double accuracy() const;
  double mean_train_loss() const;
};
Evaluation evaluate_clients(const FederatedDataset& data, const ModelSpec& spec,
                            const std::vector<int>& roster,
                            const std::vector<const ParamVector*>& model_for_client);

// Output of a framework run.
struct AuditEntry {
  int client_id = 0;
  int group_id = 0;
  int assignment_round = 0;
  std::optional<double> dissimilarity;
};

struct RunResult {
  std::string framework;
  std::vector<RoundMetrics> metrics;
  // Global (or auxiliary global) parameters after each round, when recorded.
  std::vector<ParamVector> trajectory;
  std::vector<AuditEntry> audit;
};

struct RunOptions {
  ModelSpec spec;
  int rounds = 100;
  std::size_t clients_per_round = 20;
  TrainParams train;
  std::uint64_t seed = 0;
  bool record_trajectory = false;
};

ParamVector initial_model(const ModelSpec& spec, std::uint64_t seed);

// FedAvg when train.mu == 0, FedProx otherwise.
RunResult run_fedavg(const FederatedDataset& data, const RunOptions& opts);

// CSV with header round,framework,weighted_accuracy,mean_train_loss,discrepancy,num_selected.
std::string metrics_csv_header();
std::string metrics_csv_row(const RoundMetrics& m, const std::string& framework);
std::string format_double(double v);

}  // namespace fglab
