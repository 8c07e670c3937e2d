#pragma once

#include <vector>

#include "macsvm/common.hpp"

namespace macsvm {

/// Linear classifier sign(w^T z + b) with hinge penalty C.
///
/// Training folds the bias into the weights through a constant feature of 1,
/// so the regularizer is (|w|^2 + b^2) / 2. Objectives reported anywhere in
/// this library use that same augmented norm; see augmented_sq_norm().
struct BinarySvm {
  Vector w;
  double b = 0.0;
  double C = 1.0;

  double decision(const Eigen::Ref<const Vector>& z) const { return w.dot(z) + b; }
  double augmented_sq_norm() const { return w.squaredNorm() + b * b; }
};

struct SvmOptions {
  double C = 1.0;
  double tol = 1e-6;
  int max_epochs = 2000;
};

struct BinaryFit {
  BinarySvm svm;
  Vector xi;              ///< hinge slacks max(0, 1 - y_n (w^T z_n + b))
  Vector alpha;           ///< dual multipliers in [0, C], reusable as a warm start
  double primal = 0.0;
  double dual = 0.0;
  double dual_gap = 0.0;  ///< primal - dual
  bool converged = false;
  int epochs = 0;
  std::vector<double> gap_trace;  ///< duality gap after each epoch
};

/// Dual coordinate descent on min (|w|^2 + b^2)/2 + C sum xi_n subject to
/// y_n (w^T z_n + b) >= 1 - xi_n, xi_n >= 0. Z is L x N (one point per
/// column); targets are +-1. Coordinates are visited in index order each
/// epoch. Stops once the duality gap is <= tol * (1 + primal); otherwise the
/// result after max_epochs comes back with converged = false.
BinaryFit train_binary(const Matrix& Z, const std::vector<int>& targets, const SvmOptions& opt,
                       const Vector* warm_alpha = nullptr);

/// Primal objective (|w|^2 + b^2)/2 + C sum_n hinge.
double svm_primal(const BinarySvm& svm, const Matrix& Z, const std::vector<int>& targets);

/// One-vs-all machines over K classes. In binary mode (K == 2 and one
/// machine) the single machine scores class 1 and its negation scores class 0.
struct OvaSvm {
  std::vector<BinarySvm> machines;
  int K = 0;

  bool binary_mode() const { return K == 2 && machines.size() == 1; }
  Eigen::Index latent_dim() const { return machines.empty() ? 0 : machines.front().w.size(); }
  /// Per-class decision values, length K.
  Vector scores(const Eigen::Ref<const Vector>& z) const;
};

/// Targets for machine k: +1 where label == k, else -1. In binary mode the
/// single machine uses class 1 as the positive class.
std::vector<int> ova_targets(const Labels& y, int k);

struct OvaFit {
  OvaSvm model;
  std::vector<BinaryFit> fits;
};

/// Trains machine k on targets ova_targets(y, k) with penalty C[k] (a single
/// entry is shared by all classes). Machines are independent and spread over
/// `threads` workers. Every class in [0, K) must occur in y.
OvaFit train_ova(const Matrix& Z, const Labels& y, int K, const std::vector<double>& C, double tol,
                 int max_epochs, int threads = 1, const std::vector<Vector>* warm = nullptr);

/// Binary-mode counterpart: one machine, class 1 positive.
OvaFit train_binary_mode(const Matrix& Z, const Labels& y, double C, double tol, int max_epochs,
                         const std::vector<Vector>* warm = nullptr);

/// argmax_k score_k(z); ties go to the smallest class index.
int predict(const OvaSvm& ova, const Eigen::Ref<const Vector>& z);

/// Predictions for every column of Z.
Labels predict_all(const OvaSvm& ova, const Matrix& Z, int threads = 1);

/// Index of the largest entry, first one on ties.
int argmax_first(const Eigen::Ref<const Vector>& scores);

}  // namespace macsvm
