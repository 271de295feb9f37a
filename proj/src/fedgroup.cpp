#include "fglab/fedgroup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fglab/error.hpp"

namespace fglab {

std::string to_string(Measure m) {
  switch (m) {
    case Measure::EDC: return "edc";
    case Measure::MADC: return "madc";
    case Measure::L2: return "l2";
    case Measure::COSINE: return "cosine";
  }
  return "unknown";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::RCC: return "rcc";
    case Ablation::RAC: return "rac";
  }
  return "unknown";
}

Measure parse_measure(const std::string& s) {
  if (s == "edc") return Measure::EDC;
  if (s == "madc") return Measure::MADC;
  if (s == "l2") return Measure::L2;
  if (s == "cosine") return Measure::COSINE;
  throw ConfigError("unknown measure '" + s + "'");
}

Ablation parse_ablation(const std::string& s) {
  if (s == "none") return Ablation::None;
  if (s == "rcc") return Ablation::RCC;
  if (s == "rac") return Ablation::RAC;
  throw ConfigError("unknown ablation '" + s + "'");
}

namespace {

std::vector<ParamVector> pretrain(const FederatedDataset& data, const ModelSpec& spec,
                                  const ParamVector& w0, const std::vector<int>& ids,
                                  const TrainParams& train, std::uint64_t seed) {
  std::vector<ParamVector> out(ids.size());
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    RngStream rng = pretraining_stream(seed, id);
    out[static_cast<std::size_t>(i)] = client_update(data.shards[static_cast<std::size_t>(id)], spec, w0, train, rng);
  }
  return out;
}

std::vector<int> cluster_updates(const Matrix& updates, const GroupingConfig& cfg,
                                 const EdcResult* edc_result, const Matrix* madc,
                                 std::uint64_t seed) {
  const std::size_t n = updates.rows();
  if (cfg.ablation == Ablation::RCC) {
    // Balanced uniformly random membership.
    RngStream rng(seed, stream_tag("rcc"));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    std::vector<int> labels(n);
    for (std::size_t pos = 0; pos < n; ++pos)
      labels[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % cfg.m);
    return labels;
  }
  if (cfg.m == 1) return std::vector<int>(n, 0);

  RngStream rng(seed, stream_tag("kmeans"));
  switch (cfg.measure) {
    case Measure::EDC:
      return kmeans_pp(edc_result->features, cfg.m, rng).labels;
    case Measure::MADC:
      return hierarchical_complete(*madc, cfg.m).labels;
    case Measure::L2:
      return kmeans_pp(updates, cfg.m, rng).labels;
    case Measure::COSINE: {
      Matrix dis = similarity_matrix(updates);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dis(i, j) = i == j ? 0.0 : (1.0 - dis(i, j)) / 2.0;
      return hierarchical_complete(dis, cfg.m).labels;
    }
  }
  throw InvalidArgument("unknown measure");
}

}  // namespace

ColdStartResult group_cold_start(const FederatedDataset& data, const ModelSpec& spec,
                                 const ParamVector& w0, const GroupingConfig& cfg,
                                 const TrainParams& train, std::uint64_t seed) {
  if (cfg.m < 1 || cfg.alpha < 1) throw InvalidArgument("group_cold_start: m and alpha must be >= 1");
  const std::size_t count = cfg.alpha * cfg.m;
  if (count > data.num_clients())
    throw InvalidArgument("group_cold_start: alpha*m = " + std::to_string(count) + " exceeds " +
                          std::to_string(data.num_clients()) + " clients");

  ColdStartResult out;
  RngStream sel(seed, stream_tag("cold_start_selection"));
  out.pretrained = select_clients(0, count, data.num_clients(), sel);
  const auto updates = pretrain(data, spec, w0, out.pretrained, train, seed);
  for (const auto& u : updates) out.updates.append_row(u);

  std::optional<EdcResult> edc_result;
  if (cfg.m <= std::min(count, out.updates.cols())) edc_result = edc(out.updates, cfg.m);
  if (count >= 3) {
    out.madc = madc_matrix(similarity_matrix(out.updates));
    if (edc_result) out.edc_pairwise = edc_result->pairwise;
  }
  if (cfg.measure == Measure::MADC && cfg.m > 1 && cfg.ablation != Ablation::RCC && count < 3)
    throw InvalidArgument("group_cold_start: MADC needs at least 3 pre-trained clients");
  out.labels = cluster_updates(out.updates, cfg, edc_result ? &*edc_result : nullptr, &out.madc, seed);

  out.groups.resize(cfg.m);
  for (std::size_t g = 0; g < cfg.m; ++g) out.groups[g].group_id = static_cast<int>(g);
  for (std::size_t i = 0; i < out.pretrained.size(); ++i)
    out.groups[static_cast<std::size_t>(out.labels[i])].members.push_back(out.pretrained[i]);

  for (std::size_t g = 0; g < cfg.m; ++g) {
    auto& grp = out.groups[g];
    if (grp.members.empty())
      throw InvalidArgument("group_cold_start: clustering left group " + std::to_string(g) + " empty");
    ParamVector mean(w0.size(), 0.0);
    for (std::size_t i = 0; i < out.pretrained.size(); ++i)
      if (out.labels[i] == static_cast<int>(g)) axpy(1.0, updates[i], mean);
    for (double& v : mean) v /= static_cast<double>(grp.members.size());
    grp.params = add(w0, mean);
    grp.cold_direction = subtract(grp.params, w0);
  }
  return out;
}

namespace {

double cold_dissimilarity(const ParamVector& direction, const ParamVector& update) {
  return (1.0 - cosine_similarity(direction, update)) / 2.0;
}

}  // namespace

ColdAssignment client_cold_start(const ParamVector& newcomer_update,
                                 const std::vector<GroupState>& groups) {
  if (groups.empty()) throw InvalidArgument("client_cold_start: no groups");
  ColdAssignment best{0, std::numeric_limits<double>::infinity()};
  for (const auto& g : groups) {
    const double d = cold_dissimilarity(g.cold_direction, newcomer_update);
    if (d < best.dissimilarity) best = {g.group_id, d};
  }
  return best;
}

ColdAssignment random_cold_start(const ParamVector& newcomer_update,
                                 const std::vector<GroupState>& groups, RngStream& rng) {
  if (groups.empty()) throw InvalidArgument("random_cold_start: no groups");
  const auto& g = groups[static_cast<std::size_t>(rng.below(groups.size()))];
  return {g.group_id, cold_dissimilarity(g.cold_direction, newcomer_update)};
}

IntraGroupOutcome intra_group_update(const GroupState& group, const std::vector<int>& selected_members,
                                     const FederatedDataset& data, const ModelSpec& spec,
                                     const TrainParams& train, std::uint64_t seed, int round) {
  if (selected_members.empty()) return {group.params, {}};
  RoundOutcome r = fedavg_round(group.params, data, selected_members, spec, train, seed, round);
  IntraGroupOutcome out{std::move(r.new_global), {}};
  for (const auto& u : r.updates) out.client_models.push_back(add(group.params, u));
  return out;
}

std::vector<ParamVector> inter_group_aggregation(const std::vector<ParamVector>& group_params,
                                                 double eta_g) {
  if (eta_g < 0.0) throw InvalidArgument("inter_group_aggregation: eta_g must be nonnegative");
  if (eta_g == 0.0 || group_params.size() <= 1) return group_params;
  std::vector<ParamVector> unit;
  for (const auto& w : group_params) {
    const double n = norm2(w);
    if (n == 0.0) throw ZeroVectorError("inter_group_aggregation: zero-norm group model");
    unit.push_back(scaled(w, 1.0 / n));
  }
  std::vector<ParamVector> out = group_params;
  for (std::size_t j = 0; j < out.size(); ++j)
    for (std::size_t l = 0; l < unit.size(); ++l)
      if (l != j) axpy(eta_g, unit[l], out[j]);
  return out;
}

double weighted_accuracy(const std::vector<std::pair<std::size_t, std::size_t>>& group_results) {
  std::size_t size = 0, correct = 0;
  for (auto [s, c] : group_results) {
    if (c > s) throw InvalidArgument("weighted_accuracy: correct count exceeds test size");
    size += s;
    correct += c;
  }
  if (size == 0) throw InvalidArgument("weighted_accuracy: zero total test size");
  return static_cast<double>(correct) / static_cast<double>(size);
}

double weighted_discrepancy(const std::vector<double>& per_group, const std::vector<double>& weights) {
  require_same_dim(per_group.size(), weights.size(), "weighted_discrepancy");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t g = 0; g < per_group.size(); ++g)
    if (weights[g] > 0.0) s += (weights[g] / total) * per_group[g];
  return s;
}

namespace {

ParamVector mean_of(const std::vector<ParamVector>& ws) {
  ParamVector out(ws.front().size(), 0.0);
  for (const auto& w : ws) axpy(1.0, w, out);
  const double inv = 1.0 / static_cast<double>(ws.size());
  for (double& v : out) v *= inv;
  return out;
}

// Trains every group on its selected members, applies inter-group
// aggregation and returns the size-weighted discrepancy of the trained
// client models against their refreshed group model.
double train_groups(std::vector<GroupState>& groups, const std::vector<int>& selected,
                    const std::vector<int>& group_of, const FederatedDataset& data,
                    const RunOptions& opts, double eta_g, int round,
                    ParamVector* client_models_out = nullptr) {
  std::vector<std::vector<int>> chosen(groups.size());
  for (int id : selected) chosen[static_cast<std::size_t>(group_of[static_cast<std::size_t>(id)])].push_back(id);

  std::vector<ParamVector> trained(groups.size());
  std::vector<std::vector<ParamVector>> client_models(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto r = intra_group_update(groups[g], chosen[g], data, opts.spec, opts.train, opts.seed, round);
    trained[g] = std::move(r.params);
    client_models[g] = std::move(r.client_models);
  }
  auto refreshed = inter_group_aggregation(trained, eta_g);
  for (std::size_t g = 0; g < groups.size(); ++g) groups[g].params = std::move(refreshed[g]);

  std::vector<double> per_group(groups.size(), 0.0), weights(groups.size(), 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (chosen[g].empty()) continue;
    per_group[g] = discrepancy(client_models[g], groups[g].params);
    weights[g] = static_cast<double>(groups[g].members.size());
    if (client_models_out)
      for (std::size_t i = 0; i < chosen[g].size(); ++i)
        client_models_out[static_cast<std::size_t>(chosen[g][i])] = client_models[g][i];
  }
  return weighted_discrepancy(per_group, weights);
}

void evaluate_into(RoundMetrics& m, const FederatedDataset& data, const ModelSpec& spec,
                   const std::vector<GroupState>& groups, const std::vector<int>& group_of) {
  std::vector<int> roster;
  std::vector<const ParamVector*> models;
  for (std::size_t id = 0; id < group_of.size(); ++id) {
    if (group_of[id] < 0) continue;
    roster.push_back(static_cast<int>(id));
    models.push_back(&groups[static_cast<std::size_t>(group_of[id])].params);
  }
  const Evaluation ev = evaluate_clients(data, spec, roster, models);
  m.weighted_accuracy = ev.accuracy();
  m.mean_train_loss = ev.mean_train_loss();
}

}  // namespace

FedGroupRun run_fedgroup(const FederatedDataset& data, const RunOptions& opts,
                         const GroupingConfig& cfg) {
  if (cfg.eta_g < 0.0) throw InvalidArgument("run_fedgroup: eta_g must be nonnegative");
  FedGroupRun run;
  run.result.framework = opts.train.mu == 0.0 ? "fedgroup" : "fedgrouprox";
  const ParamVector w0 = initial_model(opts.spec, opts.seed);
  run.cold_start = group_cold_start(data, opts.spec, w0, cfg, opts.train, opts.seed);
  std::vector<GroupState> groups = run.cold_start.groups;

  std::vector<int> group_of(data.num_clients(), -1);
  for (const auto& g : groups)
    for (int id : g.members) {
      group_of[static_cast<std::size_t>(id)] = g.group_id;
      const std::size_t row = static_cast<std::size_t>(
          std::lower_bound(run.cold_start.pretrained.begin(), run.cold_start.pretrained.end(), id) -
          run.cold_start.pretrained.begin());
      run.result.audit.push_back({id, g.group_id, 0,
                                  cold_dissimilarity(g.cold_direction,
                                                     ParamVector(run.cold_start.updates.row(row).begin(),
                                                                 run.cold_start.updates.row(row).end()))});
    }

  if (groups.size() == 1) {
    // A single group has nothing to cluster: it starts from w0 and enrolls
    // every client, which makes the run coincide with FedAvg.
    groups[0].params = w0;
    for (std::size_t id = 0; id < group_of.size(); ++id) {
      if (group_of[id] >= 0) continue;
      group_of[id] = 0;
      groups[0].members.push_back(static_cast<int>(id));
      run.result.audit.push_back({static_cast<int>(id), 0, 0, std::nullopt});
    }
    std::sort(groups[0].members.begin(), groups[0].members.end());
  }

  for (int t = 1; t <= opts.rounds; ++t) {
    RngStream sel = selection_stream(opts.seed, t);
    const auto selected = select_clients(t, opts.clients_per_round, data.num_clients(), sel);

    // Newcomers: pre-train from w0 and join a group, in client-id order.
    std::vector<int> cold;
    for (int id : selected)
      if (group_of[static_cast<std::size_t>(id)] < 0) cold.push_back(id);
    if (!cold.empty()) {
      const auto pre = pretrain(data, opts.spec, w0, cold, opts.train, opts.seed);
      for (std::size_t i = 0; i < cold.size(); ++i) {
        ColdAssignment a;
        if (cfg.ablation == Ablation::RAC) {
          RngStream rng(opts.seed, stream_key({stream_tag("rac"), static_cast<std::uint64_t>(cold[i])}));
          a = random_cold_start(pre[i], groups, rng);
        } else {
          a = client_cold_start(pre[i], groups);
        }
        group_of[static_cast<std::size_t>(cold[i])] = a.group_id;
        auto& members = groups[static_cast<std::size_t>(a.group_id)].members;
        members.insert(std::upper_bound(members.begin(), members.end(), cold[i]), cold[i]);
        run.result.audit.push_back({cold[i], a.group_id, t, a.dissimilarity});
      }
    }

    RoundMetrics m;
    m.round = t;
    m.selected = selected;
    m.discrepancy = train_groups(groups, selected, group_of, data, opts, cfg.eta_g, t);
    evaluate_into(m, data, opts.spec, groups, group_of);
    run.result.metrics.push_back(std::move(m));

    if (opts.record_trajectory) {
      std::vector<ParamVector> ws;
      for (const auto& g : groups) ws.push_back(g.params);
      run.result.trajectory.push_back(mean_of(ws));
    }
  }
  std::sort(run.result.audit.begin(), run.result.audit.end(),
            [](const AuditEntry& a, const AuditEntry& b) { return a.client_id < b.client_id; });
  run.final_groups = std::move(groups);
  return run;
}

int fesem_assign(const ParamVector& client_params, const std::vector<ParamVector>& group_params) {
  if (group_params.empty()) throw InvalidArgument("fesem_assign: no groups");
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < group_params.size(); ++g) {
    const double d = distance2(client_params, group_params[g]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(g);
    }
  }
  return best;
}

int ifca_assign(const ClientShard& shard, const ModelSpec& spec,
                const std::vector<ParamVector>& group_params) {
  if (group_params.empty()) throw InvalidArgument("ifca_assign: no groups");
  int best = 0;
  double bl = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < group_params.size(); ++g) {
    const double l = loss(spec, group_params[g], shard.train);
    if (l < bl) {
      bl = l;
      best = static_cast<int>(g);
    }
  }
  return best;
}

RunResult run_reassigning_baseline(const FederatedDataset& data, const RunOptions& opts,
                                   std::size_t m, Reassignment rule) {
  if (m < 1) throw InvalidArgument("baseline: m must be >= 1");
  RunResult result;
  result.framework = rule == Reassignment::FeSEM ? "fesem" : "ifca";
  const ParamVector w0 = initial_model(opts.spec, opts.seed);

  // Distinct random starting points so the assignment rule can separate groups.
  std::vector<GroupState> groups(m);
  for (std::size_t g = 0; g < m; ++g) {
    RngStream rng(opts.seed, stream_key({stream_tag("baseline_init"), g}));
    groups[g].group_id = static_cast<int>(g);
    if (opts.spec.kind == ModelKind::MLP) {
      groups[g].params = init_params(opts.spec, rng);
    } else {
      groups[g].params = w0;
      for (double& v : groups[g].params) v += rng.normal(0.0, 0.01);
    }
  }

  std::vector<ParamVector> local(data.num_clients(), w0);
  std::vector<int> group_of(data.num_clients(), -1);
  std::vector<int> assigned_round(data.num_clients(), 0);

  for (int t = 1; t <= opts.rounds; ++t) {
    RngStream sel = selection_stream(opts.seed, t);
    const auto selected = select_clients(t, opts.clients_per_round, data.num_clients(), sel);

    std::vector<ParamVector> gp;
    for (const auto& g : groups) gp.push_back(g.params);
    std::vector<int> choice(selected.size());
    const auto ns = static_cast<std::ptrdiff_t>(selected.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < ns; ++i) {
      const auto id = static_cast<std::size_t>(selected[static_cast<std::size_t>(i)]);
      choice[static_cast<std::size_t>(i)] = rule == Reassignment::FeSEM
                                                ? fesem_assign(local[id], gp)
                                                : ifca_assign(data.shards[id], opts.spec, gp);
    }
    for (auto& g : groups) g.members.clear();
    for (std::size_t i = 0; i < selected.size(); ++i) {
      const auto id = static_cast<std::size_t>(selected[i]);
      if (group_of[id] != choice[i]) assigned_round[id] = t;
      group_of[id] = choice[i];
    }
    for (std::size_t id = 0; id < group_of.size(); ++id)
      if (group_of[id] >= 0) groups[static_cast<std::size_t>(group_of[id])].members.push_back(static_cast<int>(id));

    RoundMetrics metrics;
    metrics.round = t;
    metrics.selected = selected;
    metrics.discrepancy = train_groups(groups, selected, group_of, data, opts, 0.0, t, local.data());
    evaluate_into(metrics, data, opts.spec, groups, group_of);
    result.metrics.push_back(std::move(metrics));
    if (opts.record_trajectory) {
      std::vector<ParamVector> ws;
      for (const auto& g : groups) ws.push_back(g.params);
      result.trajectory.push_back(mean_of(ws));
    }
  }
  for (std::size_t id = 0; id < group_of.size(); ++id)
    if (group_of[id] >= 0)
      result.audit.push_back({static_cast<int>(id), group_of[id], assigned_round[id], std::nullopt});
  return result;
}

}  // namespace fglab
