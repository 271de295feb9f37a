#include "fglab/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fglab/error.hpp"

namespace fglab {

std::size_t ClusterAssignment::num_clusters() const {
  if (!centers.empty()) return centers.rows();
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

std::vector<std::vector<int>> ClusterAssignment::members() const {
  std::vector<std::vector<int>> out(num_clusters());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  return out;
}

SimilarityMatrix similarity_matrix(const Matrix& updates) {
  const std::size_t n = updates.rows();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm2(updates.row(i));
    if (norms[i] == 0.0) throw ZeroVectorError("similarity_matrix: zero update row " + std::to_string(i));
  }
  Matrix sim(n, n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    sim(i, i) = 1.0;
    for (std::ptrdiff_t j = i + 1; j < sn; ++j) {
      const double s = std::clamp(dot(updates.row(i), updates.row(j)) / (norms[i] * norms[j]), -1.0, 1.0);
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }
  return sim;
}

Matrix madc_matrix(const SimilarityMatrix& sim) {
  const std::size_t n = sim.rows();
  require_same_dim(n, sim.cols(), "madc_matrix");
  if (n < 3) throw InvalidArgument("madc_matrix: need at least 3 clients");
  Matrix p(n, n);
  const auto denom = static_cast<double>(n - 2);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    for (std::ptrdiff_t j = i + 1; j < sn; ++j) {
      double s = 0.0;
      for (std::ptrdiff_t z = 0; z < sn; ++z) {
        if (z == i || z == j) continue;
        s += std::abs(sim(i, z) - sim(j, z));
      }
      p(i, j) = s / denom;
      p(j, i) = s / denom;
    }
  }
  return p;
}

EdcResult edc(const Matrix& updates, std::size_t m, const SvdOptions& svd_opts) {
  const std::size_t n = updates.rows();
  if (m == 0 || m > std::min(n, updates.cols()))
    throw InvalidArgument("edc: m must lie in [1, min(n, d_w)]");
  EdcResult out;
  out.svd = truncated_svd_of_rows(updates, m, svd_opts);

  // Directions as rows for contiguous access.
  const Matrix dirs = out.svd.vectors.transpose();
  out.features = Matrix(n, m);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sn; ++i)
    for (std::size_t j = 0; j < m; ++j) out.features(i, j) = cosine_similarity(updates.row(i), dirs.row(j));

  out.pairwise = pairwise_euclidean(out.features);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (double& v : out.pairwise.data()) v *= inv_m;
  return out;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest center, lowest index on ties.
std::pair<int, double> nearest(std::span<const double> p, const Matrix& centers) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double d = sq_dist(p, centers.row(c));
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  return {best, bd};
}

}  // namespace

namespace {

ClusterAssignment kmeans_once(const Matrix& points, std::size_t m, RngStream& rng,
                              const KMeansOptions& opts) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();

  // K-Means++ seeding.
  Matrix centers(m, dim);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy(points.row(first).begin(), points.row(first).end(), centers.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points.row(i), centers.row(0));
  for (std::size_t c = 1; c < m; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), centers.row(c)));
  }

  // Lloyd iterations.
  ClusterAssignment out;
  out.labels.assign(n, 0);
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::vector<double> dist_to_own(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto [lab, d] = nearest(points.row(i), centers);
      out.labels[i] = lab;
      dist_to_own[i] = d;
    }
    Matrix next(m, dim);
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(out.labels[i]);
      axpy(1.0, points.row(i), next.row(c));
      ++counts[c];
    }
    for (std::size_t c = 0; c < m; ++c) {
      if (counts[c] > 0) {
        for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it to the point farthest from its own center.
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist_to_own[i] > dist_to_own[far]) far = i;
      if (dist_to_own[far] > 0.0) {
        std::copy(points.row(far).begin(), points.row(far).end(), next.row(c).begin());
        dist_to_own[far] = 0.0;
      } else {
        std::copy(centers.row(c).begin(), centers.row(c).end(), next.row(c).begin());
      }
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < m; ++c) shift = std::max(shift, std::sqrt(sq_dist(next.row(c), centers.row(c))));
    centers = std::move(next);
    if (shift < opts.shift_tolerance) break;
  }
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = nearest(points.row(i), centers).first;
  out.centers = std::move(centers);
  return out;
}

}  // namespace

ClusterAssignment kmeans_pp(const Matrix& points, std::size_t m, RngStream& rng,
                            const KMeansOptions& opts) {
  if (m == 0) throw InvalidArgument("kmeans_pp: m must be positive");
  if (m > points.rows()) throw InvalidArgument("kmeans_pp: m exceeds number of points");
  if (opts.restarts < 1) throw InvalidArgument("kmeans_pp: restarts must be >= 1");
  require_finite(points.data(), "kmeans_pp");
  ClusterAssignment best;
  double best_ss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    ClusterAssignment a = kmeans_once(points, m, rng, opts);
    const double ss = within_cluster_ss(points, a.labels);
    if (ss < best_ss) {
      best_ss = ss;
      best = std::move(a);
    }
  }
  return best;
}

ClusterAssignment hierarchical_complete(const Matrix& proximity, std::size_t m) {
  const std::size_t n = proximity.rows();
  require_same_dim(n, proximity.cols(), "hierarchical_complete");
  if (m == 0 || m > n) throw InvalidArgument("hierarchical_complete: m must lie in [1, n]");
  require_finite(proximity.data(), "hierarchical_complete");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(proximity(i, j) - proximity(j, i)) > 1e-12 * (1.0 + std::abs(proximity(i, j))))
        throw InvalidArgument("hierarchical_complete: proximity matrix is not symmetric");

  // Cluster c is represented by its lowest member; `link` holds complete-linkage
  // distances between live representatives.
  std::vector<int> rep(n);
  std::iota(rep.begin(), rep.end(), 0);
  std::vector<bool> alive(n, true);
  Matrix link = proximity;
  std::size_t clusters = n;
  while (clusters > m) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        if (link(i, j) < best) {
          best = link(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    // Merge bj into bi.
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double d = std::max(link(bi, k), link(bj, k));
      link(bi, k) = d;
      link(k, bi) = d;
    }
    alive[bj] = false;
    for (auto& r : rep)
      if (r == static_cast<int>(bj)) r = static_cast<int>(bi);
    --clusters;
  }

  std::vector<int> relabel(n, -1);
  int next = 0;
  ClusterAssignment out;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(rep[i]);
    if (relabel[r] < 0) relabel[r] = next++;
    out.labels[i] = relabel[r];
  }
  return out;
}

double within_cluster_ss(const Matrix& points, const std::vector<int>& labels) {
  require_same_dim(points.rows(), labels.size(), "within_cluster_ss");
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  Matrix means(static_cast<std::size_t>(k), points.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    axpy(1.0, points.row(i), means.row(static_cast<std::size_t>(labels[i])));
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0)
      for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
  double ss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    ss += sq_dist(points.row(i), means.row(static_cast<std::size_t>(labels[i])));
  return ss;
}

std::vector<double> upper_triangle(const Matrix& sym) {
  std::vector<double> out;
  for (std::size_t i = 0; i < sym.rows(); ++i)
    for (std::size_t j = i + 1; j < sym.cols(); ++j) out.push_back(sym(i, j));
  return out;
}

}  // namespace fglab
