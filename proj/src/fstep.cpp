#include "macsvm/fstep.hpp"

#include <cmath>
#include <cstdio>

namespace macsvm {

GramCache::GramCache(const Matrix& Phi) {
  require(Phi.rows() >= 1 && Phi.cols() >= 1, "build_gram: empty design matrix");
  require(Phi.rows() <= kMaxGramSize, "build_gram: basis count exceeds " + std::to_string(kMaxGramSize));
  if (!Phi.allFinite()) throw NumericError("build_gram: design matrix has non-finite entries");
  gram_ = Matrix::Zero(Phi.rows(), Phi.rows());
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(Phi);
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
}

std::shared_ptr<const Eigen::LLT<Matrix>> GramCache::factor(double tau) {
  std::lock_guard lock(mutex_);
  if (factor_ && tau == tau_) return factor_;
  const Eigen::Index M = gram_.rows();
  Matrix shifted = gram_;
  shifted.diagonal().array() += tau;
  auto llt = std::make_shared<Eigen::LLT<Matrix>>(shifted);
  bool perturbed = false;
  if (llt->info() != Eigen::Success) {
    // Without a ridge there is nothing to fall back on: G itself is singular.
    if (tau <= 0.0) throw NumericError("F-step: Gram matrix is singular; use lambda > 0");
    const double bump = 1e-10 * gram_.trace() / static_cast<double>(M);
    shifted.diagonal().array() += bump;
    llt = std::make_shared<Eigen::LLT<Matrix>>(shifted);
    perturbed = true;
    char msg[128];
    std::snprintf(msg, sizeof msg, "F-step: shifted Gram not positive definite at tau=%g, retried with diagonal +%g", tau, bump);
    log_message(1, msg);
    if (llt->info() != Eigen::Success)
      throw NumericError("F-step: Gram matrix is singular; use lambda > 0");
  }
  factor_ = std::move(llt);
  tau_ = tau;
  perturbed_ = perturbed;
  ++factorizations_;
  return factor_;
}

double GramCache::tau() const {
  std::lock_guard lock(mutex_);
  return tau_;
}

int GramCache::factorizations() const {
  std::lock_guard lock(mutex_);
  return factorizations_;
}

bool GramCache::perturbed() const {
  std::lock_guard lock(mutex_);
  return perturbed_;
}

GramCache build_gram(const Matrix& Phi) { return GramCache(Phi); }

Matrix solve_weights(GramCache& cache, const Matrix& Phi, const Matrix& Z, double lambda, double mu,
                     int threads) {
  require(Phi.rows() == cache.size(), "solve_weights: Phi rows do not match the Gram cache");
  require(Z.cols() == Phi.cols(), "solve_weights: Z and Phi disagree on the number of points");
  require(lambda >= 0.0 && std::isfinite(lambda), "solve_weights: lambda must be >= 0");
  require(mu > 0.0 && std::isfinite(mu), "solve_weights: mu must be > 0");
  if (!Z.allFinite()) throw NumericError("solve_weights: non-finite targets");

  const auto llt = cache.factor(2.0 * lambda / mu);
  Matrix W(Z.rows(), Phi.rows());
  parallel_for(static_cast<std::size_t>(Z.rows()), threads, [&](std::size_t l) {
    const auto row = static_cast<Eigen::Index>(l);
    const Vector rhs = Phi * Z.row(row).transpose();
    W.row(row) = llt->solve(rhs).transpose();
  });
  if (!W.allFinite()) throw NumericError("solve_weights: solution has non-finite entries");
  return W;
}

double fstep_objective(const Matrix& W, const Matrix& Phi, const Matrix& Z, double lambda, double mu) {
  return lambda * W.squaredNorm() + 0.5 * mu * (Z - W * Phi).squaredNorm();
}

}  // namespace macsvm
