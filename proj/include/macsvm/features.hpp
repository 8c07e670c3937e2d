#pragma once

#include <cstdint>
#include <vector>

#include "macsvm/common.hpp"

namespace macsvm {

/// Gaussian basis centres (one per row of C) with a shared width. A value of
/// sigma <= 0 means "not chosen yet".
struct RbfCenters {
  Matrix C;
  double sigma = 0.0;

  Eigen::Index count() const { return C.rows(); }
};

struct KMeansResult {
  RbfCenters centers;
  /// Sum of squared distances to the nearest centre after each assignment
  /// pass, first entry taken right after seeding.
  std::vector<double> sse_trace;
  Labels assignment;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ (D^2-weighted) seeding. A cluster that
/// goes empty is moved onto the point currently farthest from its centre.
KMeansResult kmeans_centers(const Matrix& X, int M, int max_iter, std::uint64_t seed, int threads = 1);

/// Sum over rows of X of the squared distance to the nearest row of C.
double kmeans_objective(const Matrix& X, const Matrix& C);

/// Median pairwise distance among centre rows; 1 when M == 1 or all coincide.
double median_center_distance(const Matrix& C);

/// Phi(m, n) = exp(-|x_n - c_m|^2 / (2 sigma^2)); M x N.
Matrix rbf_design_matrix(const Matrix& X, const RbfCenters& centers, int threads = 1);

/// The feature map F is built from: Gaussian RBFs over `centers`, or the
/// identity (linear F) where Phi(x) = x and M = D.
struct FeatureMap {
  bool linear = false;
  RbfCenters centers;

  Eigen::Index basis_count(Eigen::Index input_dim) const { return linear ? input_dim : centers.count(); }
  /// M x N design matrix for the rows of X.
  Matrix design(const Matrix& X, int threads = 1) const;
};

/// F(x) = W Phi(x) with ridge weight lambda. W is L x M.
struct RbfMapParams {
  FeatureMap features;
  Matrix W;
  double lambda = 0.0;
};

/// Z_hat = W * Phi, L x N, computed column by column.
Matrix map_latent(const Matrix& W, const Matrix& Phi, int threads = 1);

}  // namespace macsvm
