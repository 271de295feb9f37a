#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "fglab/datagen.hpp"
#include "fglab/models.hpp"
#include "fglab/numkit.hpp"
#include "fglab/rng.hpp"

namespace testsupport {

inline fglab::Matrix random_matrix(std::size_t r, std::size_t c, fglab::RngStream& rng, double sd = 1.0) {
  fglab::Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal(0.0, sd);
  return m;
}

inline fglab::ParamVector random_vector(std::size_t n, fglab::RngStream& rng, double sd = 1.0) {
  fglab::ParamVector v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

inline Eigen::MatrixXd to_eigen(const fglab::Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline fglab::Batch random_batch(std::size_t n, std::size_t dim, int classes, fglab::RngStream& rng) {
  fglab::Batch b{random_matrix(n, dim, rng), std::vector<int>(n)};
  for (int& y : b.labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return b;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

// A small labelled dataset of `n_clients` shards drawn from the digits surrogate.
inline fglab::FederatedDataset small_digits(std::size_t n_clients, std::size_t cpc, std::uint64_t seed,
                                            std::size_t per_class = 100) {
  fglab::RngStream rng(seed, 99);
  const auto pool = fglab::generate_digits(per_class, rng);
  return fglab::partition_noniid(pool.features, pool.labels, n_clients, cpc, rng);
}

// Gradient-divergence toy: a shard whose features are a single row repeated.
inline fglab::ClientShard constant_shard(int id, const std::vector<double>& x, int label, std::size_t n) {
  fglab::ClientShard s;
  s.client_id = id;
  s.train.features = fglab::Matrix(n, x.size());
  s.train.labels.assign(n, label);
  for (std::size_t i = 0; i < n; ++i) std::copy(x.begin(), x.end(), s.train.features.row(i).begin());
  s.test = s.train;
  return s;
}

}  // namespace testsupport
