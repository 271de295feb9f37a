#include "fglab/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fglab/error.hpp"
#include "fglab/rng.hpp"

namespace fglab {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix out(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_same_dim(rows[r].size(), out.cols(), "Matrix::from_rows");
    std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
  }
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  require_same_dim(values.size(), cols_, "Matrix::append_row");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double distance2(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "distance2");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_dim(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

ParamVector add(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "add");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

ParamVector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "subtract");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ParamVector scaled(std::span<const double> a, double s) {
  ParamVector out(a.begin(), a.end());
  for (double& v : out) v *= s;
  return out;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(std::span<const double> a, const char* what) {
  if (!all_finite(a)) throw NonFiniteError(std::string(what) + ": non-finite entry");
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a) +
                            " vs " + std::to_string(b));
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require_same_dim(u.size(), v.size(), "cosine_similarity");
  const double nu = norm2(u);
  const double nv = norm2(v);
  if (nu == 0.0 || nv == 0.0) throw ZeroVectorError("cosine_similarity: zero-norm vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Matrix pairwise_euclidean(const Matrix& rows) {
  require_finite(rows.data(), "pairwise_euclidean");
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
  Matrix d(rows.rows(), rows.rows());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      const double v = distance2(rows.row(i), rows.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  require_same_dim(x.size(), y.size(), "pearson_correlation");
  if (x.size() < 2) throw InvalidArgument("pearson_correlation: need at least two samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("pearson_correlation: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

SymmetricEigen symmetric_eigen(const Matrix& input) {
  const std::size_t n = input.rows();
  require_same_dim(n, input.cols(), "symmetric_eigen");
  Matrix a = input;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double total = 0.0;
  for (double x : a.data()) total += x * x;
  const double threshold = 1e-30 * std::max(total, 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= threshold) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

namespace {

// Orthonormalizes the rows of `basis` in place (two passes of modified
// Gram-Schmidt). Rows that collapse are replaced by the first canonical
// basis vector that survives orthogonalization. Returns the number of
// replaced rows.
std::size_t orthonormalize_rows(Matrix& basis, double scale) {
  const std::size_t k = basis.rows();
  const std::size_t d = basis.cols();
  std::size_t replaced = 0;
  std::size_t next_canonical = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto vi = basis.row(i);
    const double before = norm2(vi);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto vj = basis.row(j);
        axpy(-dot(vj, vi), vj, vi);
      }
    }
    double nrm = norm2(vi);
    if (nrm <= 1e-13 * std::max(before, scale) || nrm == 0.0) {
      ++replaced;
      while (true) {
        if (next_canonical >= d) throw InvalidArgument("truncated_svd: cannot complete basis");
        std::fill(vi.begin(), vi.end(), 0.0);
        vi[next_canonical++] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
          for (std::size_t j = 0; j < i; ++j) {
            const auto vj = basis.row(j);
            axpy(-dot(vj, vi), vj, vi);
          }
        }
        nrm = norm2(vi);
        if (nrm > 1e-6) break;
      }
    }
    for (double& x : vi) x /= nrm;
  }
  return replaced;
}

// coeffs (n x k) = updates (n x d) * basis^T (basis is k x d).
Matrix project_rows(const Matrix& updates, const Matrix& basis) {
  const auto n = static_cast<std::ptrdiff_t>(updates.rows());
  const std::size_t k = basis.rows();
  Matrix out(updates.rows(), k);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) out(i, c) = dot(updates.row(i), basis.row(c));
  return out;
}

// out (k x d) = coeffs^T (k x n) * updates (n x d).
Matrix combine_rows(const Matrix& updates, const Matrix& coeffs) {
  const std::size_t n = updates.rows();
  const auto k = static_cast<std::ptrdiff_t>(coeffs.cols());
  Matrix out(coeffs.cols(), updates.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < k; ++c) {
    auto dst = out.row(c);
    for (std::size_t i = 0; i < n; ++i) axpy(coeffs(i, c), updates.row(i), dst);
  }
  return out;
}

// Frobenius norm of cur - (cur prev^T) prev: how far `cur` left span(prev).
double subspace_rotation(const Matrix& prev, const Matrix& cur) {
  double total = 0.0;
  for (std::size_t i = 0; i < cur.rows(); ++i) {
    ParamVector r(cur.row(i).begin(), cur.row(i).end());
    for (std::size_t j = 0; j < prev.rows(); ++j) axpy(-dot(prev.row(j), cur.row(i)), prev.row(j), r);
    total += dot(r, r);
  }
  return std::sqrt(total);
}

}  // namespace

TruncatedSvd truncated_svd_of_rows(const Matrix& updates, std::size_t rank,
                                   const SvdOptions& opts) {
  const std::size_t n = updates.rows();
  const std::size_t d = updates.cols();
  if (rank == 0) throw InvalidArgument("truncated_svd: rank must be positive");
  if (rank > std::min(n, d))
    throw InvalidArgument("truncated_svd: rank " + std::to_string(rank) +
                          " exceeds min(d_w, n) = " + std::to_string(std::min(n, d)));
  require_finite(updates.data(), "truncated_svd");

  const std::size_t block = std::min({n, d, rank + std::max(opts.oversample, rank)});
  double scale = 0.0;
  for (double x : updates.data()) scale = std::max(scale, std::abs(x));

  RngStream rng(opts.seed, stream_tag("truncated_svd"));
  Matrix basis(block, d);
  for (double& x : basis.data()) x = rng.normal();
  orthonormalize_rows(basis, 1.0);

  Matrix previous;
  std::vector<double> sigma(block, 0.0);
  double rotation = 0.0;
  int it = 0;
  for (it = 1; it <= opts.max_iterations; ++it) {
    // basis <- orth(A^T A basis) followed by Rayleigh-Ritz rotation.
    Matrix coeffs = project_rows(updates, basis);
    basis = combine_rows(updates, coeffs);
    orthonormalize_rows(basis, scale);
    coeffs = project_rows(updates, basis);

    Matrix gram(block, block);
    for (std::size_t a = 0; a < block; ++a)
      for (std::size_t b = a; b < block; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += coeffs(i, a) * coeffs(i, b);
        gram(a, b) = s;
        gram(b, a) = s;
      }
    const SymmetricEigen eig = symmetric_eigen(gram);
    Matrix rotated(block, d);
    for (std::size_t c = 0; c < block; ++c) {
      auto dst = rotated.row(c);
      for (std::size_t j = 0; j < block; ++j) axpy(eig.vectors(j, c), basis.row(j), dst);
      sigma[c] = std::sqrt(std::max(eig.values[c], 0.0));
    }
    orthonormalize_rows(rotated, 1.0);
    basis = std::move(rotated);

    Matrix top(rank, d);
    std::copy(basis.data().begin(), basis.data().begin() + static_cast<std::ptrdiff_t>(rank * d),
              top.data().begin());
    if (!previous.empty()) {
      rotation = subspace_rotation(previous, top);
      if (rotation <= opts.tolerance) {
        previous = std::move(top);
        break;
      }
    }
    previous = std::move(top);
  }
  if (it > opts.max_iterations) throw SvdNonConvergence(opts.max_iterations, rotation);

  TruncatedSvd out;
  out.iterations = it;
  out.vectors = Matrix(d, rank);
  out.singular_values.assign(sigma.begin(), sigma.begin() + static_cast<std::ptrdiff_t>(rank));
  const double sigma_max = sigma.empty() ? 0.0 : sigma.front();
  for (std::size_t c = 0; c < rank; ++c) {
    if (sigma[c] <= 1e-12 * sigma_max || sigma_max == 0.0) out.padded = true;
    auto col = previous.row(c);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(col[j]) > std::abs(col[arg])) arg = j;
    const double sign = col[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) out.vectors(j, c) = sign * col[j];
  }
  return out;
}

TruncatedSvd truncated_svd(const Matrix& m, std::size_t rank, const SvdOptions& opts) {
  return truncated_svd_of_rows(m.transpose(), rank, opts);
}

}  // namespace fglab
