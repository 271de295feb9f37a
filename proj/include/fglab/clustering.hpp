#pragma once

#include <cstddef>
#include <vector>

#include "fglab/numkit.hpp"
#include "fglab/rng.hpp"

namespace fglab {

// Pairwise cosine similarity of update rows: symmetric, unit diagonal.
using SimilarityMatrix = Matrix;

struct EdcResult {
  Matrix features;  // n x m, entry (i, j) = S(update_i, v_j)
  Matrix pairwise;  // n x n, (1/m) * |features_i - features_j|
  TruncatedSvd svd;
};

struct ClusterAssignment {
  std::vector<int> labels;
  Matrix centers;  // K-Means only

  std::size_t num_clusters() const;
  std::vector<std::vector<int>> members() const;
};

SimilarityMatrix similarity_matrix(const Matrix& updates);

// P(i, j) = 1/(n-2) * sum_{z != i, j} |S(i, z) - S(j, z)|, zero diagonal.
Matrix madc_matrix(const SimilarityMatrix& sim);

EdcResult edc(const Matrix& updates, std::size_t m, const SvdOptions& svd_opts = {});

struct KMeansOptions {
  int max_iterations = 300;
  double shift_tolerance = 1e-9;
  int restarts = 10;  // independent seedings; the lowest within-cluster SS wins
};

// K-Means++ seeding then Lloyd iterations, repeated `restarts` times. An
// emptied cluster is reseeded at the point farthest from its current center.
ClusterAssignment kmeans_pp(const Matrix& points, std::size_t m, RngStream& rng,
                            const KMeansOptions& opts = {});

// Agglomerative complete-linkage clustering down to m clusters. Labels are
// numbered by the smallest member index of each cluster.
ClusterAssignment hierarchical_complete(const Matrix& proximity, std::size_t m);

// Within-cluster sum of squared distances to cluster means.
double within_cluster_ss(const Matrix& points, const std::vector<int>& labels);

// Upper-triangle entries (i < j) in row-major order.
std::vector<double> upper_triangle(const Matrix& sym);

}  // namespace fglab
