#include "fglab/reference.hpp"

#include <cmath>

#include "fglab/error.hpp"

namespace fglab::serial {

Matrix pairwise_euclidean(const Matrix& rows) {
  const std::size_t n = rows.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < rows.cols(); ++c) {
        const double diff = rows(i, c) - rows(j, c);
        s += diff * diff;
      }
      d(i, j) = std::sqrt(s);
    }
  return d;
}

Matrix similarity_matrix(const Matrix& updates) {
  const std::size_t n = updates.rows();
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sim(i, j) = i == j ? 1.0 : cosine_similarity(updates.row(i), updates.row(j));
  return sim;
}

Matrix madc_matrix(const Matrix& sim) {
  const std::size_t n = sim.rows();
  if (n < 3) throw InvalidArgument("madc_matrix: need at least 3 clients");
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t z = 0; z < n; ++z)
        if (z != i && z != j) s += std::abs(sim(i, z) - sim(j, z));
      p(i, j) = s / static_cast<double>(n - 2);
    }
  return p;
}

RoundOutcome fedavg_round(const ParamVector& global_w, const FederatedDataset& data,
                          const std::vector<int>& selected, const ModelSpec& spec,
                          const TrainParams& train, std::uint64_t seed, int round) {
  RoundOutcome out;
  std::vector<std::size_t> sizes;
  for (int id : selected) {
    RngStream rng = training_stream(seed, round, id);
    const auto& shard = data.shards[static_cast<std::size_t>(id)];
    out.updates.push_back(client_update(shard, spec, global_w, train, rng));
    sizes.push_back(shard.train.size());
  }
  out.new_global = weighted_aggregate(global_w, out.updates, sizes);
  return out;
}

}  // namespace fglab::serial
