#include "fglab/flcore.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "fglab/error.hpp"

namespace fglab {

RngStream selection_stream(std::uint64_t seed, int round) {
  return RngStream(seed, stream_key({stream_tag("select"), static_cast<std::uint64_t>(round)}));
}

RngStream training_stream(std::uint64_t seed, int round, int client_id) {
  return RngStream(seed, stream_key({stream_tag("train"), static_cast<std::uint64_t>(round),
                                     static_cast<std::uint64_t>(client_id)}));
}

RngStream pretraining_stream(std::uint64_t seed, int client_id) {
  return RngStream(seed, stream_key({stream_tag("pretrain"), static_cast<std::uint64_t>(client_id)}));
}

ParamVector client_update(const ClientShard& shard, const ModelSpec& spec, const ParamVector& w,
                          const TrainParams& train, RngStream& rng) {
  if (train.epochs < 1) throw InvalidArgument("client_update: E must be >= 1");
  if (!(train.eta > 0.0)) throw InvalidArgument("client_update: eta must be positive");
  if (train.mu < 0.0) throw InvalidArgument("client_update: mu must be nonnegative");
  const std::size_t n = shard.train.size();
  if (n == 0) throw InvalidArgument("client_update: empty train set");
  require_same_dim(w.size(), parameter_count(spec), "client_update");

  const std::size_t bs = train.batch_size == 0 ? n : std::min(train.batch_size, n);
  const std::size_t D = shard.train.features.cols();
  ParamVector cur = w;
  ParamVector grad;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Batch batch{Matrix(bs, D), std::vector<int>(bs)};
  const bool full = bs == n;

  for (int e = 0; e < train.epochs; ++e) {
    if (!full) rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      const Batch* active = &shard.train;
      if (!full) {
        if (batch.labels.size() != len) batch = Batch{Matrix(len, D), std::vector<int>(len)};
        for (std::size_t i = 0; i < len; ++i) {
          const auto src = shard.train.features.row(order[start + i]);
          std::copy(src.begin(), src.end(), batch.features.row(i).begin());
          batch.labels[i] = shard.train.labels[order[start + i]];
        }
        active = &batch;
      }
      loss_and_gradient(spec, cur, *active, grad);
      if (train.mu != 0.0)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += train.mu * (cur[i] - w[i]);
      axpy(-train.eta, grad, cur);
    }
  }
  ParamVector delta = subtract(cur, w);
  require_finite(delta, "client_update");
  return delta;
}

std::vector<int> select_clients(int /*round*/, std::size_t K, std::size_t n, RngStream& rng) {
  if (K < 1 || K > n) throw InvalidArgument("select_clients: need 1 <= K <= n");
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(K);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ParamVector weighted_aggregate(const ParamVector& w, const std::vector<ParamVector>& updates,
                               const std::vector<std::size_t>& sizes) {
  require_same_dim(updates.size(), sizes.size(), "weighted_aggregate");
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (updates.empty() || total == 0) throw InvalidArgument("weighted_aggregate: no data");
  ParamVector out = w;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double p = static_cast<double>(sizes[i]) / static_cast<double>(total);
    axpy(p, updates[i], out);
  }
  return out;
}

RoundOutcome fedavg_round(const ParamVector& global_w, const FederatedDataset& data,
                          const std::vector<int>& selected, const ModelSpec& spec,
                          const TrainParams& train, std::uint64_t seed, int round) {
  if (selected.empty()) throw InvalidArgument("fedavg_round: no clients selected");
  RoundOutcome out;
  out.updates.resize(selected.size());
  const auto k = static_cast<std::ptrdiff_t>(selected.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    const int id = selected[static_cast<std::size_t>(i)];
    RngStream rng = training_stream(seed, round, id);
    out.updates[static_cast<std::size_t>(i)] =
        client_update(data.shards[static_cast<std::size_t>(id)], spec, global_w, train, rng);
  }
  std::vector<std::size_t> sizes;
  for (int id : selected) sizes.push_back(data.shards[static_cast<std::size_t>(id)].train.size());
  out.new_global = weighted_aggregate(global_w, out.updates, sizes);
  return out;
}

double discrepancy(const std::vector<ParamVector>& client_ws, const ParamVector& w_ref) {
  if (client_ws.empty()) throw InvalidArgument("discrepancy: no client models");
  double s = 0.0;
  for (const auto& w : client_ws) s += distance2(w, w_ref);
  return s / static_cast<double>(client_ws.size());
}

double Evaluation::accuracy() const {
  if (test_total == 0) throw InvalidArgument("evaluation: empty test roster");
  return static_cast<double>(correct) / static_cast<double>(test_total);
}

double Evaluation::mean_train_loss() const {
  if (train_total == 0) throw InvalidArgument("evaluation: empty train roster");
  return train_loss_sum / static_cast<double>(train_total);
}

Evaluation evaluate_clients(const FederatedDataset& data, const ModelSpec& spec,
                            const std::vector<int>& roster,
                            const std::vector<const ParamVector*>& model_for_client) {
  require_same_dim(roster.size(), model_for_client.size(), "evaluate_clients");
  const auto n = static_cast<std::ptrdiff_t>(roster.size());
  std::vector<std::size_t> correct(roster.size());
  std::vector<double> losses(roster.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& shard = data.shards[static_cast<std::size_t>(roster[static_cast<std::size_t>(i)])];
    const auto& w = *model_for_client[static_cast<std::size_t>(i)];
    correct[static_cast<std::size_t>(i)] = count_correct(spec, w, shard.test);
    losses[static_cast<std::size_t>(i)] = loss(spec, w, shard.train);
  }
  Evaluation ev;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const auto& shard = data.shards[static_cast<std::size_t>(roster[i])];
    ev.correct += correct[i];
    ev.test_total += shard.test.size();
    ev.train_loss_sum += static_cast<double>(shard.train.size()) * losses[i];
    ev.train_total += shard.train.size();
  }
  return ev;
}

ParamVector initial_model(const ModelSpec& spec, std::uint64_t seed) {
  RngStream rng(seed, stream_tag("init"));
  return init_params(spec, rng);
}

RunResult run_fedavg(const FederatedDataset& data, const RunOptions& opts) {
  RunResult result;
  result.framework = opts.train.mu == 0.0 ? "fedavg" : "fedprox";
  ParamVector w = initial_model(opts.spec, opts.seed);
  std::vector<int> everyone(data.num_clients());
  std::iota(everyone.begin(), everyone.end(), 0);

  for (int t = 1; t <= opts.rounds; ++t) {
    RngStream sel = selection_stream(opts.seed, t);
    const auto selected = select_clients(t, opts.clients_per_round, data.num_clients(), sel);
    RoundOutcome out = fedavg_round(w, data, selected, opts.spec, opts.train, opts.seed, t);

    // Client models are the broadcast model plus their update.
    std::vector<ParamVector> client_ws;
    client_ws.reserve(out.updates.size());
    for (const auto& u : out.updates) client_ws.push_back(add(w, u));
    w = std::move(out.new_global);

    RoundMetrics m;
    m.round = t;
    m.selected = selected;
    std::vector<const ParamVector*> models(everyone.size(), &w);
    const Evaluation ev = evaluate_clients(data, opts.spec, everyone, models);
    m.weighted_accuracy = ev.accuracy();
    m.mean_train_loss = ev.mean_train_loss();
    m.discrepancy = discrepancy(client_ws, w);
    result.metrics.push_back(std::move(m));
    if (opts.record_trajectory) result.trajectory.push_back(w);
  }
  return result;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string metrics_csv_header() {
  return "round,framework,weighted_accuracy,mean_train_loss,discrepancy,num_selected";
}

std::string metrics_csv_row(const RoundMetrics& m, const std::string& framework) {
  return std::to_string(m.round) + "," + framework + "," + format_double(m.weighted_accuracy) + "," +
         format_double(m.mean_train_loss) + "," + format_double(m.discrepancy) + "," +
         std::to_string(m.selected.size());
}

}  // namespace fglab
