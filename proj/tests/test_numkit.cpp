#include <doctest.h>

#include <numeric>
#include <set>

#include "fglab/error.hpp"
#include "fglab/numkit.hpp"
#include "fglab/reference.hpp"
#include "fglab/rng.hpp"
#include "support.hpp"

using namespace fglab;
using testsupport::random_matrix;
using testsupport::to_eigen;

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible and independent") {
    RngStream a(42, 7), b(42, 7), c(42, 8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      differs |= x != c.next_u64();
    }
    CHECK(differs);
  }

  TEST_CASE("below stays in range and covers it") {
    RngStream r(1, 1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = r.below(7);
      REQUIRE(v < 7);
      seen.insert(v);
    }
    CHECK(seen.size() == 7);
  }

  TEST_CASE("uniform and normal moments") {
    RngStream r(3, 3);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      su += u;
      const double z = r.normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
  }

  TEST_CASE("shuffle is a permutation") {
    RngStream r(5, 5);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(std::span<int>(v));
    std::vector<int> s = v;
    std::sort(s.begin(), s.end());
    for (int i = 0; i < 50; ++i) CHECK(s[static_cast<std::size_t>(i)] == i);
  }

  TEST_CASE("stream keys are order sensitive") {
    CHECK(stream_key({1, 2}) != stream_key({2, 1}));
    CHECK(stream_tag("train") != stream_tag("select"));
  }
}

TEST_SUITE("numkit") {
  TEST_CASE("vector primitives") {
    const ParamVector a{3, 4}, b{1, 0};
    CHECK(dot(a, b) == 3.0);
    CHECK(norm2(a) == 5.0);
    CHECK(distance2(a, b) == doctest::Approx(std::sqrt(4.0 + 16.0)));
    ParamVector y{1, 1};
    axpy(2.0, a, y);
    CHECK(y == ParamVector{7, 9});
    CHECK_THROWS_AS(dot(a, ParamVector{1}), DimensionMismatch);
    CHECK_THROWS_AS(require_finite(ParamVector{1, NAN}, "x"), NonFiniteError);
  }

  TEST_CASE("cosine similarity") {
    CHECK(cosine_similarity(ParamVector{1, 0}, ParamVector{0, 2}) == 0.0);
    CHECK(cosine_similarity(ParamVector{1, 1}, ParamVector{2, 2}) == doctest::Approx(1.0));
    CHECK(cosine_similarity(ParamVector{1, 1}, ParamVector{-3, -3}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(cosine_similarity(ParamVector{0, 0}, ParamVector{1, 0}), ZeroVectorError);
    // Clamped even when rounding would push past 1.
    RngStream r(9, 9);
    for (int i = 0; i < 100; ++i) {
      const auto v = testsupport::random_vector(17, r);
      CHECK(cosine_similarity(v, scaled(v, 3.0)) <= 1.0);
      CHECK(cosine_similarity(v, scaled(v, -0.5)) >= -1.0);
    }
  }

  TEST_CASE("pairwise euclidean matches brute force and the serial kernel") {
    RngStream r(11, 0);
    for (int t = 0; t < 20; ++t) {
      const Matrix x = random_matrix(2 + r.below(15), 1 + r.below(30), r);
      const Matrix p = pairwise_euclidean(x);
      CHECK(p == serial::pairwise_euclidean(x));
      const auto e = to_eigen(x);
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.rows(); ++j)
          CHECK(std::abs(p(i, j) - (e.row(static_cast<Eigen::Index>(i)) - e.row(static_cast<Eigen::Index>(j))).norm()) < 1e-12);
    }
  }

  TEST_CASE("pearson correlation matches a centred-dot oracle") {
    RngStream r(12, 0);
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 3 + r.below(40);
      Eigen::VectorXd x(n), y(n);
      std::vector<double> xs(n), ys(n);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x(static_cast<Eigen::Index>(i)) = r.normal();
        ys[i] = y(static_cast<Eigen::Index>(i)) = 0.5 * xs[i] + r.normal();
      }
      const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
      CHECK(std::abs(pearson_correlation(xs, ys) - xc.dot(yc) / (xc.norm() * yc.norm())) < 1e-10);
    }
    CHECK_THROWS_AS(pearson_correlation(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), InvalidArgument);
  }

  TEST_CASE("symmetric eigen matches Eigen's solver") {
    RngStream r(13, 0);
    for (int t = 0; t < 10; ++t) {
      const std::size_t n = 2 + r.below(12);
      Matrix a = random_matrix(n, n, r);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
      const auto mine = symmetric_eigen(a);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(a));
      for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(mine.values[i] - es.eigenvalues()(static_cast<Eigen::Index>(n - 1 - i))) < 1e-10);
    }
  }
}

namespace {

// Largest principal angle between the column spaces of orthonormal a and b,
// from the sine form |(I - b b^T) a|_2, which stays accurate for tiny angles.
double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd residual = a - b * (b.transpose() * a);
  Eigen::JacobiSVD<Eigen::MatrixXd> s(residual);
  return std::asin(std::min(1.0, s.singularValues()(0)));
}

// d x n matrix with prescribed singular values and random singular vectors.
Matrix with_spectrum(std::size_t d, std::size_t n, const std::vector<double>& sv, RngStream& r) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qu(to_eigen(random_matrix(d, d, r)));
  Eigen::HouseholderQR<Eigen::MatrixXd> qv(to_eigen(random_matrix(n, n, r)));
  const Eigen::MatrixXd U = qu.householderQ(), V = qv.householderQ();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < sv.size(); ++i) S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = sv[i];
  const Eigen::MatrixXd M = U * S * V.transpose();
  Matrix out(d, n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

}  // namespace

TEST_SUITE("svd") {
  TEST_CASE("truncated svd agrees with a dense SVD on gapped spectra") {
    RngStream r(21, 0);
    for (int t = 0; t < 10; ++t) {
      const std::size_t m = 1 + r.below(5);
      // Geometric spectrum with relative gap well above 0.1 at every index.
      std::vector<double> sv;
      for (std::size_t i = 0; i < 30; ++i) sv.push_back(10.0 * std::pow(0.8, static_cast<double>(i)));
      const Matrix a = with_spectrum(50, 30, sv, r);
      const auto res = truncated_svd(a, m);
      const Eigen::MatrixXd mine = to_eigen(res.vectors);
      Eigen::JacobiSVD<Eigen::MatrixXd> dense(to_eigen(a), Eigen::ComputeThinU);
      const Eigen::MatrixXd ref = dense.matrixU().leftCols(static_cast<Eigen::Index>(m));
      CHECK(max_principal_angle(mine, ref) <= 1e-6);
      const Eigen::MatrixXd gram = mine.transpose() * mine - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
      CHECK(gram.cwiseAbs().maxCoeff() <= 1e-10);
      for (std::size_t j = 0; j < m; ++j)
        CHECK(res.singular_values[j] == doctest::Approx(dense.singularValues()(static_cast<Eigen::Index>(j))).epsilon(1e-9));
      CHECK_FALSE(res.padded);
    }
  }

  TEST_CASE("columns have a positive largest-magnitude entry") {
    RngStream r(22, 0);
    const auto res = truncated_svd(random_matrix(20, 8, r), 3);
    for (std::size_t j = 0; j < 3; ++j) {
      double best = 0.0;
      for (std::size_t i = 0; i < 20; ++i)
        if (std::abs(res.vectors(i, j)) > std::abs(best)) best = res.vectors(i, j);
      CHECK(best > 0.0);
    }
  }

  TEST_CASE("rank-deficient input is padded with an orthonormal completion") {
    // Rank 1: every column is a multiple of the same vector.
    Matrix a(6, 4);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 4; ++j) a(i, j) = static_cast<double>(i + 1) * static_cast<double>(j + 1);
    const auto res = truncated_svd(a, 3);
    CHECK(res.padded);
    const auto v = to_eigen(res.vectors);
    CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("rows form and column form agree") {
    RngStream r(23, 0);
    const Matrix u = random_matrix(12, 40, r);
    const auto a = truncated_svd_of_rows(u, 3);
    const auto b = truncated_svd(u.transpose(), 3);
    CHECK(a.vectors == b.vectors);
  }

  TEST_CASE("rank bounds and non-convergence") {
    RngStream r(24, 0);
    const Matrix a = random_matrix(10, 5, r);
    CHECK_THROWS_AS(truncated_svd(a, 0), InvalidArgument);
    CHECK_THROWS_AS(truncated_svd(a, 6), InvalidArgument);
    SvdOptions tight;
    tight.max_iterations = 1;
    tight.oversample = 0;
    tight.tolerance = 0.0;
    Matrix big = random_matrix(60, 40, r);
    CHECK_THROWS_AS(truncated_svd(big, 2, tight), SvdNonConvergence);
  }
}
