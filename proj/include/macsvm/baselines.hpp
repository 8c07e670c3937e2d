#pragma once

#include "macsvm/common.hpp"
#include "macsvm/data.hpp"
#include "macsvm/linsvm.hpp"

namespace macsvm {

struct PcaModel {
  Vector mean;                 ///< D
  Matrix components;           ///< L x D, orthonormal rows
  Vector explained_variance;   ///< L, descending; population variance (1/N)
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues come
/// back in descending order with matching eigenvector columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen jacobi_eigen(const Matrix& A, double tol = 1e-15, int max_sweeps = 100);

/// Top-L principal directions of X (N x D). Uses the D x D covariance when
/// D <= N and the N x N Gram matrix otherwise. Requires 1 <= L <= min(N, D).
PcaModel pca_fit(const Matrix& X, int L);
/// Projected coordinates, N x L.
Matrix pca_project(const PcaModel& model, const Matrix& X);

/// 1-NN with exact Euclidean distances; ties go to the lowest training index.
Labels nn_classify(const Dataset& train, const Matrix& queries, int threads = 1);

/// (1/N) sum_n |z_n - mean of class y_n|^2 for latent points stored one per
/// column (L x N).
double within_class_scatter(const Matrix& Z, const Labels& y);

/// Fraction of mismatches. Throws std::invalid_argument on a length mismatch.
double error_rate(const Labels& pred, const Labels& truth);

/// One-vs-all linear SVM directly on the inputs (binary mode for K == 2).
OvaSvm input_svm(const Dataset& train, double C, double tol = 1e-6, int max_epochs = 2000, int threads = 1);

}  // namespace macsvm
