#pragma once

#include <string>
#include <vector>

#include "fglab/fedgroup.hpp"

namespace fglab {

struct BoundConstants {
  std::vector<double> delta_kg;  // per client, aligned with the group's member list
  double delta = 0.0;            // sum_k p_k delta_kg (weighted over groups when pooled)
  double L_hat = 1.0;
  double M_hat = 0.0;
  double eta = 0.0;
  int E = 0;
  double eta_g = 0.0;
  std::size_t num_groups = 1;
};

// (delta / L) * ((eta L + 1)^e - 1)
double divergence_bound(double delta, double L, double eta, int e);
double divergence_bound(const BoundConstants& c, int e);

// (delta M / L) * ((eta L + 1)^E - 1), plus eta_g (|G| - 1) with aggregation.
double loss_gap_bound(const BoundConstants& c, bool with_aggregation);

// Members of one group at one round and their data weights p_k = n_k / n_group.
struct GroupObjective {
  std::vector<const ClientShard*> shards;
  std::vector<double> weights;
};
GroupObjective make_group_objective(const FederatedDataset& data, const std::vector<int>& members);

// grad F_g(w) = sum_k p_k grad F_k(w); per-client gradients optionally returned.
ParamVector group_gradient(const ModelSpec& spec, const GroupObjective& g, const ParamVector& w,
                           std::vector<ParamVector>* per_client = nullptr);
double group_loss(const ModelSpec& spec, const GroupObjective& g, const ParamVector& w);

// E + 1 full-gradient iterates on F_g starting at w_t.
std::vector<ParamVector> virtual_trajectory(const ModelSpec& spec, const GroupObjective& g,
                                            const ParamVector& w_t, int E, double eta);

// Full-gradient local iterates of one client, E + 1 entries.
std::vector<ParamVector> client_trajectory(const ModelSpec& spec, const ClientShard& shard,
                                           const ParamVector& w_t, int E, double eta);

// Smoothness bound of the softmax cross-entropy on the shard:
// 0.5 * lambda_max((1/n) sum [x;1][x;1]^T).
double mclr_shard_smoothness(const ClientShard& shard);
// Safety factor times the largest per-client bound.
double mclr_smoothness(const FederatedDataset& data, double safety = 1.1);

// Trajectory-max estimates over the supplied virtual iterates.
BoundConstants estimate_constants(const ModelSpec& spec, const GroupObjective& g,
                                  const std::vector<ParamVector>& trajectory, double eta,
                                  double safety = 1.1);

struct DivergenceRow {
  int round = 0;
  int group = 0;
  int client = 0;
  int e = 0;
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound - measured
};

struct GroupRow {
  int round = 0;
  int group = 0;
  double delta_g = 0.0;
  double jensen_measured = 0.0;  // |w~ - v_E|
  double jensen_bound = 0.0;
  double loss_gap = 0.0;  // |F_g(w~) - F_g(v_E)|
  double loss_gap_bound = 0.0;
  double continuity_bound = 0.0;  // M_hat |w~ - v_E|
  double loss_gap_aggregated = 0.0;  // |F_g(w after inter-group step) - F_g(v_E)|
  double loss_gap_aggregated_bound = 0.0;
  std::vector<double> jensen_informative;  // |w~ - v_e| for e < E, not checked
};

struct BoundReport {
  BoundConstants constants;  // delta here is the pooled weighted sum over groups
  std::vector<int> client_ids;
  std::vector<int> client_groups;
  std::vector<DivergenceRow> divergence;
  std::vector<DivergenceRow> recursion;  // bound = (eta L + 1) h(e-1) + eta delta_kg
  std::vector<GroupRow> groups;
  std::size_t violations = 0;
  std::size_t checks = 0;
};

constexpr double kBoundSlack = 1e-9;
bool exceeds(double measured, double bound);

// Runs FedGroup with full-gradient local steps and audits every bound.
// Requires MCLR, batch_size 0 and mu 0.
BoundReport verify_bounds(const FederatedDataset& data, const RunOptions& opts,
                          const GroupingConfig& cfg);

}  // namespace fglab
