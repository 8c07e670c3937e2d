#pragma once

#include <vector>

#include "macsvm/common.hpp"
#include "macsvm/linsvm.hpp"

namespace macsvm {

/// Which part of the feasible set the solution lands on, per machine.
enum class ZCase {
  OnCorrectSide,      ///< margin already >= 1, multiplier 0
  ProjectedToMargin,  ///< 0 < multiplier < c, slack 0
  Capped,             ///< multiplier == c, slack may be positive
};

/// Solution of the per-point problem
///     min_{z, xi} |z - Fx|^2 + sum_k c_k xi_k
///     s.t. y_k (w_k^T z + b_k) >= 1 - xi_k,  xi_k >= 0.
/// `lambda` holds the multipliers of the margin constraints; the slack
/// multipliers are c_k - lambda_k.
struct ZResult {
  Vector z;
  Vector xi;
  Vector lambda;
  std::vector<ZCase> cases;
  double objective = 0.0;
  double dual_gap = 0.0;
  bool converged = true;
  int sweeps = 0;
  std::vector<double> dual_trace;  ///< dual value after each sweep (when recorded)
};

/// Closed-form solution for a single machine (target y = +-1, c > 0), O(L).
/// If w^T w < 1e-30 the constraint does not depend on z and the solution is
/// z = Fx, xi = max(0, 1 - y b).
ZResult z_binary(const Eigen::Ref<const Vector>& Fx, int y, const Eigen::Ref<const Vector>& w, double b,
                 double c);

struct ZSolveOptions {
  double tol = 1e-10;
  int max_sweeps = 100000;
  bool record_trace = false;
};

/// K machines at once through the box-constrained dual
///     max -1/4 lambda^T G lambda + r^T lambda,  0 <= lambda_k <= c_k,
/// with G_jk = y_j y_k w_j^T w_k and r_k = 1 - y_k (w_k^T Fx + b_k), solved by
/// cyclic exact coordinate ascent. z = Fx + 1/2 sum_k lambda_k y_k w_k.
/// Whenever the set of multipliers at their bounds survives a sweep
/// unchanged (and every 64 sweeps), the free multipliers are also solved for
/// exactly under that pattern and its one-step neighbours. Converged when the
/// duality gap, which equals the sum of the complementary-slackness terms, is
/// <= tol * (1 + primal). `weight_gram` (w_j^T w_k, K x K) may be passed in
/// to avoid recomputing it for every point.
ZResult z_multiclass(const Eigen::Ref<const Vector>& Fx, const std::vector<BinarySvm>& machines,
                     const std::vector<int>& targets, const Eigen::Ref<const Vector>& c,
                     const ZSolveOptions& opt = {}, const Matrix* weight_gram = nullptr);

/// Reference solver: enumerates all 3^K assignments of each multiplier to
/// {0, interior, c_k}, solves the stationarity system on the interior set,
/// keeps the KKT-feasible candidates and returns the one with the least primal
/// objective. K <= 12.
ZResult z_oracle(const Eigen::Ref<const Vector>& Fx, const std::vector<BinarySvm>& machines,
                 const std::vector<int>& targets, const Eigen::Ref<const Vector>& c);

/// |z - Fx|^2 + sum_k c_k max(0, 1 - y_k (w_k^T z + b_k)).
double z_objective(const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& Fx,
                   const std::vector<BinarySvm>& machines, const std::vector<int>& targets,
                   const Eigen::Ref<const Vector>& c);

struct KktResiduals {
  double stationarity = 0.0;      ///< |z - Fx - 1/2 sum lambda_k y_k w_k|_inf
  double margin_slackness = 0.0;  ///< max |lambda_k (y_k(w_k^T z + b_k) + xi_k - 1)|
  double slack_slackness = 0.0;   ///< max |(c_k - lambda_k) xi_k|
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;  ///< distance of lambda outside [0, c]

  double worst() const;
};

KktResiduals kkt_residuals(const ZResult& r, const Eigen::Ref<const Vector>& Fx,
                           const std::vector<BinarySvm>& machines, const std::vector<int>& targets,
                           const Eigen::Ref<const Vector>& c);

}  // namespace macsvm
