#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fglab/clustering.hpp"
#include "fglab/datagen.hpp"
#include "fglab/flcore.hpp"

namespace fglab {

enum class Measure { EDC, MADC, L2, COSINE };
enum class Ablation { None, RCC, RAC };

std::string to_string(Measure m);
std::string to_string(Ablation a);
Measure parse_measure(const std::string& s);
Ablation parse_ablation(const std::string& s);

struct GroupingConfig {
  std::size_t m = 3;
  std::size_t alpha = 20;  // pre-training scale: alpha * m clients found the groups
  Measure measure = Measure::EDC;
  double eta_g = 0.0;
  Ablation ablation = Ablation::None;
};

struct GroupState {
  int group_id = 0;
  ParamVector params;          // w^(g)
  ParamVector cold_direction;  // founding direction, mean of the members' pre-training updates
  std::vector<int> members;    // ascending client ids
};

struct ColdStartResult {
  std::vector<GroupState> groups;
  std::vector<int> pretrained;  // ascending client ids
  Matrix updates;               // one pre-training update per pretrained client
  std::vector<int> labels;      // group of each pretrained client
  // Pairwise EDC and MADC of the pre-training updates (empty when n < 3).
  Matrix edc_pairwise;
  Matrix madc;
};

// Pre-trains alpha*m clients from w0, clusters their updates and founds the
// groups: params = w0 + mean(member updates), cold_direction = params - w0.
ColdStartResult group_cold_start(const FederatedDataset& data, const ModelSpec& spec,
                                 const ParamVector& w0, const GroupingConfig& cfg,
                                 const TrainParams& train, std::uint64_t seed);

struct ColdAssignment {
  int group_id = 0;
  double dissimilarity = 0.0;  // (1 - cos) / 2 against the chosen group's direction
};

// argmin_g (1 - cos(cold_direction_g, update)) / 2, lowest id on ties.
ColdAssignment client_cold_start(const ParamVector& newcomer_update,
                                 const std::vector<GroupState>& groups);
// RAC ablation: uniform random group; dissimilarity still reported.
ColdAssignment random_cold_start(const ParamVector& newcomer_update,
                                 const std::vector<GroupState>& groups, RngStream& rng);

struct IntraGroupOutcome {
  ParamVector params;
  std::vector<ParamVector> client_models;  // aligned with the selected members
};

// One FedAvg / FedProx round over the selected members; an empty selection
// returns the group parameters unchanged.
IntraGroupOutcome intra_group_update(const GroupState& group, const std::vector<int>& selected_members,
                                     const FederatedDataset& data, const ModelSpec& spec,
                                     const TrainParams& train, std::uint64_t seed, int round);

// w_j + eta_g * sum_{l != j} w_l / |w_l|, from one snapshot of the inputs.
std::vector<ParamVector> inter_group_aggregation(const std::vector<ParamVector>& group_params,
                                                 double eta_g);

// Sum of correct / sum of test sizes over (test_size, correct_count) pairs.
double weighted_accuracy(const std::vector<std::pair<std::size_t, std::size_t>>& group_results);

// Size-weighted mean of per-group discrepancies; groups with weight 0 are skipped.
double weighted_discrepancy(const std::vector<double>& per_group,
                            const std::vector<double>& weights);

struct FedGroupRun {
  RunResult result;
  ColdStartResult cold_start;
  std::vector<GroupState> final_groups;
};

// FedGroup (mu = 0) / FedGrouProx (mu > 0).
FedGroupRun run_fedgroup(const FederatedDataset& data, const RunOptions& opts,
                         const GroupingConfig& cfg);

// argmin_g |w_client - w_g|, lowest id on ties.
int fesem_assign(const ParamVector& client_params, const std::vector<ParamVector>& group_params);
// argmin_g train loss of group model g on the shard, lowest id on ties.
int ifca_assign(const ClientShard& shard, const ModelSpec& spec,
                const std::vector<ParamVector>& group_params);

enum class Reassignment { FeSEM, IFCA };
// Baseline loops that re-assign every selected client each round before
// intra-group training.
RunResult run_reassigning_baseline(const FederatedDataset& data, const RunOptions& opts,
                                   std::size_t m, Reassignment rule);

}  // namespace fglab
