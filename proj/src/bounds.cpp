#include "fglab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fglab/error.hpp"

namespace fglab {

double divergence_bound(double delta, double L, double eta, int e) {
  if (e < 0) throw InvalidArgument("divergence_bound: e must be >= 0");
  if (!(L > 0.0)) throw InvalidArgument("divergence_bound: L must be positive");
  return (delta / L) * (std::pow(eta * L + 1.0, e) - 1.0);
}

double divergence_bound(const BoundConstants& c, int e) {
  return divergence_bound(c.delta, c.L_hat, c.eta, e);
}

double loss_gap_bound(const BoundConstants& c, bool with_aggregation) {
  if (!(c.L_hat > 0.0)) throw InvalidArgument("loss_gap_bound: L must be positive");
  const double base = (c.delta * c.M_hat / c.L_hat) * (std::pow(c.eta * c.L_hat + 1.0, c.E) - 1.0);
  if (!with_aggregation || c.eta_g == 0.0 || c.num_groups <= 1) return base;
  return base + c.eta_g * static_cast<double>(c.num_groups - 1);
}

GroupObjective make_group_objective(const FederatedDataset& data, const std::vector<int>& members) {
  if (members.empty()) throw InvalidArgument("group objective: no members");
  GroupObjective g;
  std::size_t total = 0;
  for (int id : members) {
    g.shards.push_back(&data.shards.at(static_cast<std::size_t>(id)));
    total += g.shards.back()->train.size();
  }
  if (total == 0) throw InvalidArgument("group objective: members hold no training data");
  for (const auto* s : g.shards)
    g.weights.push_back(static_cast<double>(s->train.size()) / static_cast<double>(total));
  return g;
}

ParamVector group_gradient(const ModelSpec& spec, const GroupObjective& g, const ParamVector& w,
                           std::vector<ParamVector>* per_client) {
  ParamVector out(w.size(), 0.0), grad;
  if (per_client) per_client->clear();
  for (std::size_t k = 0; k < g.shards.size(); ++k) {
    loss_and_gradient(spec, w, g.shards[k]->train, grad);
    axpy(g.weights[k], grad, out);
    if (per_client) per_client->push_back(grad);
  }
  return out;
}

double group_loss(const ModelSpec& spec, const GroupObjective& g, const ParamVector& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.shards.size(); ++k) s += g.weights[k] * loss(spec, w, g.shards[k]->train);
  return s;
}

std::vector<ParamVector> virtual_trajectory(const ModelSpec& spec, const GroupObjective& g,
                                            const ParamVector& w_t, int E, double eta) {
  if (E < 0) throw InvalidArgument("virtual_trajectory: E must be >= 0");
  std::vector<ParamVector> v{w_t};
  for (int e = 1; e <= E; ++e) {
    ParamVector next = v.back();
    axpy(-eta, group_gradient(spec, g, v.back()), next);
    v.push_back(std::move(next));
  }
  return v;
}

std::vector<ParamVector> client_trajectory(const ModelSpec& spec, const ClientShard& shard,
                                           const ParamVector& w_t, int E, double eta) {
  std::vector<ParamVector> w{w_t};
  ParamVector grad;
  for (int e = 1; e <= E; ++e) {
    ParamVector next = w.back();
    loss_and_gradient(spec, w.back(), shard.train, grad);
    axpy(-eta, grad, next);
    w.push_back(std::move(next));
  }
  return w;
}

double mclr_shard_smoothness(const ClientShard& shard) {
  const Matrix& x = shard.train.features;
  const std::size_t n = x.rows(), d = x.cols() + 1;
  if (n == 0) throw InvalidArgument("mclr_shard_smoothness: empty shard");
  Matrix m(d, d);
  std::vector<double> xt(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(x.row(i).begin(), x.row(i).end(), xt.begin());
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) m(a, b) += xt[a] * xt[b];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      m(a, b) /= static_cast<double>(n);
      m(b, a) = m(a, b);
    }
  return 0.5 * symmetric_eigen(m).values.front();
}

double mclr_smoothness(const FederatedDataset& data, double safety) {
  double mx = 0.0;
  for (const auto& s : data.shards) mx = std::max(mx, mclr_shard_smoothness(s));
  return safety * mx;
}

BoundConstants estimate_constants(const ModelSpec& spec, const GroupObjective& g,
                                  const std::vector<ParamVector>& trajectory, double eta,
                                  double safety) {
  if (trajectory.empty()) throw InvalidArgument("estimate_constants: empty trajectory");
  BoundConstants c;
  c.delta_kg.assign(g.shards.size(), 0.0);
  c.eta = eta;
  c.E = static_cast<int>(trajectory.size()) - 1;
  double grad_max = 0.0;
  std::vector<ParamVector> per;
  for (const auto& v : trajectory) {
    const ParamVector gg = group_gradient(spec, g, v, &per);
    grad_max = std::max(grad_max, norm2(gg));
    for (std::size_t k = 0; k < per.size(); ++k) c.delta_kg[k] = std::max(c.delta_kg[k], distance2(per[k], gg));
  }
  for (std::size_t k = 0; k < g.shards.size(); ++k) c.delta += g.weights[k] * c.delta_kg[k];
  double L = 0.0;
  for (const auto* s : g.shards) L = std::max(L, mclr_shard_smoothness(*s));
  c.L_hat = safety * L;
  c.M_hat = safety * grad_max;
  return c;
}

bool exceeds(double measured, double bound) {
  return measured > bound + kBoundSlack * (1.0 + std::abs(bound));
}

namespace {

struct RoundRecord {
  int round = 0;
  int group = 0;
  std::vector<int> members;
  GroupObjective obj;
  std::vector<ParamVector> v;
  std::vector<std::vector<ParamVector>> w;  // per member
  ParamVector w_tilde;
  ParamVector w_next;
};

}  // namespace

BoundReport verify_bounds(const FederatedDataset& data, const RunOptions& opts,
                          const GroupingConfig& cfg) {
  if (opts.spec.kind != ModelKind::MCLR)
    throw ConfigError("verify_bounds: the analysis needs the convex MCLR model");
  if (opts.train.batch_size != 0)
    throw ConfigError("verify_bounds: the analysis needs full-gradient local steps (B = 0)");
  if (opts.train.mu != 0.0) throw ConfigError("verify_bounds: the analysis needs mu = 0");

  const int E = opts.train.epochs;
  const double eta = opts.train.eta;
  const ParamVector w0 = initial_model(opts.spec, opts.seed);
  ColdStartResult cold = group_cold_start(data, opts.spec, w0, cfg, opts.train, opts.seed);
  std::vector<GroupState> groups = cold.groups;
  std::vector<int> group_of(data.num_clients(), -1);
  for (const auto& g : groups)
    for (int id : g.members) group_of[static_cast<std::size_t>(id)] = g.group_id;
  if (groups.size() == 1) {
    groups[0].params = w0;
    for (auto& gid : group_of) gid = 0;
  }

  // Pass 1: run and record every trajectory.
  std::vector<RoundRecord> records;
  for (int t = 1; t <= opts.rounds; ++t) {
    RngStream sel = selection_stream(opts.seed, t);
    const auto selected = select_clients(t, opts.clients_per_round, data.num_clients(), sel);
    for (int id : selected) {
      if (group_of[static_cast<std::size_t>(id)] >= 0) continue;
      RngStream rng = pretraining_stream(opts.seed, id);
      const ParamVector pre = client_update(data.shards[static_cast<std::size_t>(id)], opts.spec, w0, opts.train, rng);
      ColdAssignment a;
      if (cfg.ablation == Ablation::RAC) {
        RngStream r(opts.seed, stream_key({stream_tag("rac"), static_cast<std::uint64_t>(id)}));
        a = random_cold_start(pre, groups, r);
      } else {
        a = client_cold_start(pre, groups);
      }
      group_of[static_cast<std::size_t>(id)] = a.group_id;
    }

    std::vector<ParamVector> trained;
    const std::size_t first = records.size();
    for (const auto& g : groups) {
      std::vector<int> chosen;
      for (int id : selected)
        if (group_of[static_cast<std::size_t>(id)] == g.group_id) chosen.push_back(id);
      if (chosen.empty()) {
        trained.push_back(g.params);
        continue;
      }
      RoundRecord rec;
      rec.round = t;
      rec.group = g.group_id;
      rec.members = chosen;
      rec.obj = make_group_objective(data, chosen);
      rec.v = virtual_trajectory(opts.spec, rec.obj, g.params, E, eta);
      std::vector<ParamVector> updates;
      std::vector<std::size_t> sizes;
      for (int id : chosen) {
        const auto& shard = data.shards[static_cast<std::size_t>(id)];
        rec.w.push_back(client_trajectory(opts.spec, shard, g.params, E, eta));
        updates.push_back(subtract(rec.w.back().back(), g.params));
        sizes.push_back(shard.train.size());
      }
      rec.w_tilde = weighted_aggregate(g.params, updates, sizes);
      trained.push_back(rec.w_tilde);
      records.push_back(std::move(rec));
    }
    auto next = inter_group_aggregation(trained, cfg.eta_g);
    for (std::size_t g = 0; g < groups.size(); ++g) groups[g].params = next[g];
    for (std::size_t r = first; r < records.size(); ++r)
      records[r].w_next = groups[static_cast<std::size_t>(records[r].group)].params;
  }

  // Pass 2: trajectory-max constants.
  BoundReport report;
  auto& c = report.constants;
  c.L_hat = mclr_smoothness(data);
  c.eta = eta;
  c.E = E;
  c.eta_g = cfg.eta_g;
  c.num_groups = groups.size();
  c.delta_kg.assign(data.num_clients(), 0.0);
  double grad_max = 0.0;
  std::vector<ParamVector> per;
  for (const auto& rec : records) {
    for (const auto& v : rec.v) {
      const ParamVector gg = group_gradient(opts.spec, rec.obj, v, &per);
      grad_max = std::max(grad_max, norm2(gg));
      for (std::size_t k = 0; k < rec.members.size(); ++k) {
        double& d = c.delta_kg[static_cast<std::size_t>(rec.members[k])];
        d = std::max(d, distance2(per[k], gg));
      }
    }
    std::vector<ParamVector> probes;
    for (const auto& traj : rec.w) probes.insert(probes.end(), traj.begin(), traj.end());
    probes.push_back(rec.w_tilde);
    probes.push_back(rec.w_next);
    // Points on the segments the mean-value argument integrates over.
    for (double s : {0.25, 0.5, 0.75}) {
      for (const ParamVector* end : {&rec.w_tilde, &rec.w_next}) {
        ParamVector p = scaled(rec.v.back(), 1.0 - s);
        axpy(s, *end, p);
        probes.push_back(std::move(p));
      }
    }
    for (const auto& p : probes) grad_max = std::max(grad_max, norm2(group_gradient(opts.spec, rec.obj, p)));
  }
  c.M_hat = 1.1 * grad_max;

  // Pooled delta: sum_g p_g sum_k p_k delta_kg over enrolled clients.
  std::size_t enrolled_total = 0;
  for (std::size_t id = 0; id < group_of.size(); ++id)
    if (group_of[id] >= 0) enrolled_total += data.shards[id].train.size();
  for (std::size_t id = 0; id < group_of.size(); ++id) {
    if (group_of[id] < 0) continue;
    report.client_ids.push_back(static_cast<int>(id));
    report.client_groups.push_back(group_of[id]);
    c.delta += static_cast<double>(data.shards[id].train.size()) / static_cast<double>(enrolled_total) *
               c.delta_kg[id];
  }

  // Pass 3: checks.
  auto tally = [&](double measured, double bound) {
    ++report.checks;
    if (exceeds(measured, bound)) ++report.violations;
  };
  const double growth = std::pow(eta * c.L_hat + 1.0, E) - 1.0;
  for (const auto& rec : records) {
    double delta_g = 0.0;
    for (std::size_t k = 0; k < rec.members.size(); ++k) {
      const int id = rec.members[k];
      const double dk = c.delta_kg[static_cast<std::size_t>(id)];
      delta_g += rec.obj.weights[k] * dk;
      double prev = 0.0;
      for (int e = 0; e <= E; ++e) {
        const double h = distance2(rec.w[k][static_cast<std::size_t>(e)], rec.v[static_cast<std::size_t>(e)]);
        const double b = divergence_bound(dk, c.L_hat, eta, e);
        report.divergence.push_back({rec.round, rec.group, id, e, h, b, b - h});
        tally(h, b);
        if (e > 0) {
          const double rb = (eta * c.L_hat + 1.0) * prev + eta * dk;
          report.recursion.push_back({rec.round, rec.group, id, e, h, rb, rb - h});
          tally(h, rb);
        }
        prev = h;
      }
    }

    GroupRow row;
    row.round = rec.round;
    row.group = rec.group;
    row.delta_g = delta_g;
    const ParamVector& vE = rec.v.back();
    row.jensen_measured = distance2(rec.w_tilde, vE);
    row.jensen_bound = (delta_g / c.L_hat) * growth;
    tally(row.jensen_measured, row.jensen_bound);
    for (int e = 0; e < E; ++e) row.jensen_informative.push_back(distance2(rec.w_tilde, rec.v[static_cast<std::size_t>(e)]));

    const double f_v = group_loss(opts.spec, rec.obj, vE);
    row.loss_gap = std::abs(group_loss(opts.spec, rec.obj, rec.w_tilde) - f_v);
    row.loss_gap_bound = c.M_hat * row.jensen_bound;
    row.continuity_bound = c.M_hat * row.jensen_measured;
    tally(row.loss_gap, row.loss_gap_bound);
    tally(row.loss_gap, row.continuity_bound);

    row.loss_gap_aggregated = std::abs(group_loss(opts.spec, rec.obj, rec.w_next) - f_v);
    const double agg = groups.size() > 1 ? cfg.eta_g * static_cast<double>(groups.size() - 1) : 0.0;
    row.loss_gap_aggregated_bound = c.M_hat * (row.jensen_bound + agg);
    tally(row.loss_gap_aggregated, row.loss_gap_aggregated_bound);
    report.groups.push_back(std::move(row));
  }
  return report;
}

}  // namespace fglab
