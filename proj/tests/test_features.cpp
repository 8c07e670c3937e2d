#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "macsvm/data.hpp"
#include "macsvm/features.hpp"
#include "support.hpp"

using namespace macsvm;

namespace {

std::vector<std::vector<double>> sorted_rows(const Matrix& A) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    std::vector<double> r;
    for (Eigen::Index j = 0; j < A.cols(); ++j) r.push_back(A(i, j));
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

Dataset spirals(int K, int n, std::uint64_t seed) {
  SpiralOptions opt;
  opt.classes = K;
  opt.per_class = n;
  opt.seed = seed;
  return gen_spirals(opt);
}

}  // namespace

TEST_CASE("k-means recovers repeated distinct rows") {
  Matrix base(4, 2);
  base << 0, 0, 5, 0, 0, 5, 5, 5;
  Matrix X(12, 2);
  for (int i = 0; i < 12; ++i) X.row(i) = base.row(i % 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = kmeans_centers(X, 4, 50, seed);
    CHECK(sorted_rows(res.centers.C) == sorted_rows(base));
    CHECK(res.sse_trace.back() == 0.0);
  }
}

TEST_CASE("k-means with M = N returns a permutation of the rows") {
  std::mt19937_64 g(1);
  const Matrix X = testing::random_matrix(g, 15, 3);
  const auto res = kmeans_centers(X, 15, 20, 3);
  CHECK(sorted_rows(res.centers.C) == sorted_rows(X));
}

TEST_CASE("k-means beats a random subset of rows and its objective never rises") {
  const auto ds = spirals(2, 1000, 0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto res = kmeans_centers(ds.X, 20, 100, seed);
    for (std::size_t i = 1; i < res.sse_trace.size(); ++i) CHECK(res.sse_trace[i] <= res.sse_trace[i - 1]);
    CHECK(kmeans_objective(ds.X, res.centers.C) == doctest::Approx(res.sse_trace.back()).epsilon(1e-12));

    std::mt19937_64 g(seed + 100);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(ds.X.rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
    std::shuffle(idx.begin(), idx.end(), g);
    Matrix R(20, 2);
    for (int m = 0; m < 20; ++m) R.row(m) = ds.X.row(idx[static_cast<std::size_t>(m)]);
    CHECK(res.sse_trace.back() <= kmeans_objective(ds.X, R));
  }
}

TEST_CASE("k-means is deterministic and independent of thread count") {
  const auto ds = spirals(3, 200, 1);
  const auto a = kmeans_centers(ds.X, 30, 50, 7, 1);
  const auto b = kmeans_centers(ds.X, 30, 50, 7, 4);
  CHECK(a.centers.C == b.centers.C);
  CHECK(a.sse_trace == b.sse_trace);
}

TEST_CASE("k-means argument checks") {
  const Matrix X = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(kmeans_centers(X, 4, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans_centers(X, 0, 10, 0), std::invalid_argument);
}

TEST_CASE("median centre distance") {
  Matrix C(3, 1);
  C << 0, 1, 3;  // distances 1, 3, 2
  CHECK(median_center_distance(C) == 2.0);
  Matrix D(4, 1);
  D << 0, 1, 2, 3;  // 1,2,3,1,2,1 -> median of six = 1.5
  CHECK(median_center_distance(D) == 1.5);
  CHECK(median_center_distance(Matrix::Zero(1, 2)) == 1.0);
  CHECK(median_center_distance(Matrix::Zero(3, 2)) == 1.0);
}

TEST_CASE("design matrix values") {
  RbfCenters c;
  c.C.resize(2, 2);
  c.C << 0, 0, 1, 1;
  c.sigma = 0.5;
  Matrix X(2, 2);
  X << 0, 0, 0.5, 0;
  const Matrix Phi = rbf_design_matrix(X, c);
  CHECK(Phi.rows() == 2);
  CHECK(Phi.cols() == 2);
  CHECK(Phi(0, 0) == 1.0);
  CHECK(Phi(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(Phi(0, 1) == doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(Phi(1, 0) == doctest::Approx(std::exp(-2.0 / 0.5)).epsilon(1e-15));
}

TEST_CASE("design matrix properties") {
  const auto ds = spirals(2, 100, 2);
  RbfCenters c = kmeans_centers(ds.X, 15, 20, 0).centers;
  c.sigma = 0.3;
  const Matrix Phi = rbf_design_matrix(ds.X, c);
  CHECK(Phi.minCoeff() > 0.0);
  CHECK(Phi.maxCoeff() <= 1.0);

  // Column maximum sits at the nearest centre.
  for (Eigen::Index n = 0; n < Phi.cols(); ++n) {
    Eigen::Index best = 0;
    double bestd = 1e300;
    for (Eigen::Index m = 0; m < c.C.rows(); ++m) {
      const double d = (ds.X.row(n) - c.C.row(m)).squaredNorm();
      if (d < bestd) bestd = d, best = m;
    }
    CHECK(Phi(best, n) == Phi.col(n).maxCoeff());
  }

  // Very wide kernel.
  double maxd = 0.0;
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i)
    for (Eigen::Index m = 0; m < c.C.rows(); ++m) maxd = std::max(maxd, (ds.X.row(i) - c.C.row(m)).norm());
  RbfCenters wide = c;
  wide.sigma = 1e6 * maxd;
  CHECK((rbf_design_matrix(ds.X, wide).array() - 1.0).abs().maxCoeff() <= 1e-6);

  // Swapping two input rows swaps the columns.
  Matrix Xs = ds.X;
  Xs.row(3).swap(Xs.row(40));
  const Matrix Ps = rbf_design_matrix(Xs, c);
  CHECK(Ps.col(3) == Phi.col(40));
  CHECK(Ps.col(40) == Phi.col(3));

  CHECK(rbf_design_matrix(ds.X, c, 4) == Phi);
}

TEST_CASE("design matrix argument checks") {
  RbfCenters c;
  c.C = Matrix::Zero(2, 2);
  c.sigma = 0.0;
  CHECK_THROWS_AS(rbf_design_matrix(Matrix::Zero(3, 2), c), std::invalid_argument);
  c.sigma = 1.0;
  CHECK_THROWS_AS(rbf_design_matrix(Matrix::Zero(3, 3), c), std::invalid_argument);
}

TEST_CASE("linear feature map is the transpose") {
  FeatureMap f;
  f.linear = true;
  Matrix X(2, 3);
  X << 1, 2, 3, 4, 5, 6;
  CHECK(f.design(X) == X.transpose());
  CHECK(f.basis_count(3) == 3);
}

TEST_CASE("map_latent") {
  std::mt19937_64 g(4);
  const Matrix Phi = testing::random_matrix(g, 3, 6);
  CHECK(map_latent(Matrix::Zero(2, 3), Phi).isZero());
  CHECK(map_latent(Matrix::Identity(3, 3), Phi) == Phi);

  Matrix W(2, 2);
  W << 1, 2, 3, 4;
  const Matrix Z = map_latent(W, Matrix::Ones(2, 1));
  CHECK(Z(0, 0) == 3.0);
  CHECK(Z(1, 0) == 7.0);

  CHECK_THROWS_AS(map_latent(Matrix::Zero(2, 4), Phi), std::invalid_argument);
  const Matrix W3 = testing::random_matrix(g, 2, 3);
  CHECK(map_latent(W3, Phi, 3) == map_latent(W3, Phi, 1));
}
