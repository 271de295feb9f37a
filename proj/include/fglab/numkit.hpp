#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fglab {

// Flattened model parameters or a parameter update.
using ParamVector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transpose() const;
  void append_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// UpdateMatrix: n x d_w, one client update per row.
using UpdateMatrix = Matrix;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double distance2(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
ParamVector add(std::span<const double> a, std::span<const double> b);
ParamVector subtract(std::span<const double> a, std::span<const double> b);
ParamVector scaled(std::span<const double> a, double s);
bool all_finite(std::span<const double> a);
void require_finite(std::span<const double> a, const char* what);
void require_same_dim(std::size_t a, std::size_t b, const char* what);

// <u,v> / (|u| |v|), clamped to [-1, 1]. Throws ZeroVectorError on a zero input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Row-wise l2 distance matrix (symmetric, zero diagonal). OpenMP over rows.
Matrix pairwise_euclidean(const Matrix& rows);

// Pearson correlation of two equally long samples.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues descending; eigenvectors are the columns of `vectors`.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& a);

struct SvdOptions {
  double tolerance = 1e-10;    // Frobenius rotation of the top-m subspace between sweeps
  int max_iterations = 1000;
  std::size_t oversample = 10; // extra block columns beyond m
  std::uint64_t seed = 0x5eedULL;
};

struct TruncatedSvd {
  // d_w x m; column j is the j-th left singular vector.
  Matrix vectors;
  std::vector<double> singular_values;
  int iterations = 0;
  // Set when m exceeds the numerical rank; the trailing columns are an
  // orthonormal completion rather than singular vectors.
  bool padded = false;
};

// Top-m left singular vectors of `m` (d_w x n) by block subspace iteration
// with Rayleigh-Ritz extraction. Each column's largest-magnitude entry is
// positive.
TruncatedSvd truncated_svd(const Matrix& m, std::size_t rank, const SvdOptions& opts = {});

// Same as truncated_svd(updates.transpose(), rank) without forming the
// transpose: `updates` is n x d_w with one update per row.
TruncatedSvd truncated_svd_of_rows(const Matrix& updates, std::size_t rank,
                                   const SvdOptions& opts = {});

}  // namespace fglab
