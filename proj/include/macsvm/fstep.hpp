#pragma once

#include <memory>
#include <mutex>

#include "macsvm/common.hpp"

namespace macsvm {

/// Largest basis count build_gram accepts.
inline constexpr Eigen::Index kMaxGramSize = 10000;

/// G = Phi Phi^T for a fixed design matrix, plus a Cholesky factor of
/// G + tau I for the most recent shift tau. Phi never changes during a
/// training run, so G is built once and the factor is rebuilt only when tau
/// changes.
class GramCache {
 public:
  explicit GramCache(const Matrix& Phi);

  const Matrix& gram() const { return gram_; }
  Eigen::Index size() const { return gram_.rows(); }

  /// Factor of G + tau I, rebuilding it if tau differs from the cached one.
  /// For tau > 0 a failed factorization is retried once with an extra
  /// 1e-10 * trace(G) / M on the diagonal. Throws NumericError if that also
  /// fails, or at once when tau == 0 and G is singular.
  std::shared_ptr<const Eigen::LLT<Matrix>> factor(double tau);

  double tau() const;
  /// Number of factorizations performed so far.
  int factorizations() const;
  /// True if the last factorization needed the diagonal perturbation.
  bool perturbed() const;

 private:
  Matrix gram_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Eigen::LLT<Matrix>> factor_;
  double tau_ = -1.0;
  int factorizations_ = 0;
  bool perturbed_ = false;
};

/// Builds the Gram cache; rejects non-finite Phi and M > kMaxGramSize.
GramCache build_gram(const Matrix& Phi);

/// Minimizes lambda |W|_F^2 + (mu/2) sum_n |z_n - W phi_n|^2 over W (L x M),
/// i.e. solves (G + (2 lambda / mu) I) W^T = Phi Z^T. Each latent dimension is
/// an independent right-hand side; `threads` spreads them over workers.
Matrix solve_weights(GramCache& cache, const Matrix& Phi, const Matrix& Z, double lambda, double mu,
                     int threads = 1);

/// The W-dependent part of the penalty objective.
double fstep_objective(const Matrix& W, const Matrix& Phi, const Matrix& Z, double lambda, double mu);

}  // namespace macsvm
