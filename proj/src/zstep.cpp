#include "macsvm/zstep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace macsvm {

namespace {

constexpr double kDegenerateNorm = 1e-30;

void check_inputs(const Eigen::Ref<const Vector>& Fx, const std::vector<BinarySvm>& machines,
                  const std::vector<int>& targets, const Eigen::Ref<const Vector>& c) {
  require(!machines.empty(), "z-step: need at least one machine");
  require(targets.size() == machines.size(), "z-step: one target per machine");
  require(c.size() == static_cast<Eigen::Index>(machines.size()), "z-step: one penalty per machine");
  for (std::size_t k = 0; k < machines.size(); ++k) {
    require(machines[k].w.size() == Fx.size(), "z-step: weight/latent dimension mismatch");
    require(targets[k] == 1 || targets[k] == -1, "z-step: targets must be +-1");
    require(c(static_cast<Eigen::Index>(k)) > 0.0, "z-step: penalties must be > 0");
  }
}

ZCase classify(double lambda, double c) {
  if (lambda <= 0.0) return ZCase::OnCorrectSide;
  if (lambda >= c) return ZCase::Capped;
  return ZCase::ProjectedToMargin;
}

// Fills z, xi, cases and objective from the multipliers.
void finish(ZResult& r, const Eigen::Ref<const Vector>& Fx, const std::vector<BinarySvm>& machines,
            const std::vector<int>& targets, const Eigen::Ref<const Vector>& c) {
  const auto K = static_cast<Eigen::Index>(machines.size());
  r.z = Fx;
  for (Eigen::Index k = 0; k < K; ++k)
    if (r.lambda(k) != 0.0) r.z.noalias() += (0.5 * r.lambda(k) * targets[static_cast<std::size_t>(k)]) * machines[static_cast<std::size_t>(k)].w;
  r.xi.resize(K);
  r.cases.resize(static_cast<std::size_t>(K));
  double penalty = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& m = machines[static_cast<std::size_t>(k)];
    r.xi(k) = std::max(0.0, 1.0 - targets[static_cast<std::size_t>(k)] * m.decision(r.z));
    r.cases[static_cast<std::size_t>(k)] = classify(r.lambda(k), c(k));
    penalty += c(k) * r.xi(k);
  }
  r.objective = (r.z - Fx).squaredNorm() + penalty;
}

double dual_value(const Matrix& G, const Vector& r, const Vector& lambda) {
  return -0.25 * lambda.dot(G * lambda) + r.dot(lambda);
}

// Candidate multipliers for a guessed active set: state[k] is 0 (lambda_k =
// 0), 2 (lambda_k = c_k) or 1 (free, from the stationarity system). The
// system is singular or nearly so when K > L; directions below a relative
// singular-value threshold are treated as null and the solution nearest the
// current iterate is taken. The result is clipped to the box; the caller
// judges it by the duality gap.
Vector solve_pattern(const Matrix& G, const Vector& r, const Eigen::Ref<const Vector>& c, const std::vector<int>& state,
                     const Vector& lambda) {
  const Eigen::Index K = G.rows();
  std::vector<Eigen::Index> free;
  Vector trial(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const int st = state[static_cast<std::size_t>(k)];
    trial(k) = st == 0 ? 0.0 : st == 2 ? c(k) : std::clamp(lambda(k), 0.0, c(k));
    if (st == 1) free.push_back(k);
  }
  if (free.empty()) return trial;
  const auto A = static_cast<Eigen::Index>(free.size());
  Matrix GA(A, A);
  Vector rhs(A), current(A);
  for (Eigen::Index i = 0; i < A; ++i) {
    const Eigen::Index fi = free[static_cast<std::size_t>(i)];
    rhs(i) = 2.0 * r(fi);
    for (Eigen::Index k = 0; k < K; ++k)
      if (state[static_cast<std::size_t>(k)] == 2) rhs(i) -= G(fi, k) * c(k);
    for (Eigen::Index j = 0; j < A; ++j) GA(i, j) = G(fi, free[static_cast<std::size_t>(j)]);
    current(i) = trial(fi);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(1e-9);
  cod.compute(GA);
  const Vector sol = current + cod.solve(rhs - GA * current);
  for (Eigen::Index i = 0; i < A; ++i) {
    const Eigen::Index fi = free[static_cast<std::size_t>(i)];
    trial(fi) = std::isfinite(sol(i)) ? std::clamp(sol(i), 0.0, c(fi)) : current(i);
  }
  return trial;
}

// Bound pattern of the current iterate, then every pattern moving one free
// multiplier to a bound.
std::vector<Vector> polish_candidates(const Matrix& G, const Vector& r, const Eigen::Ref<const Vector>& c,
                                      const Vector& lambda) {
  const Eigen::Index K = G.rows();
  std::vector<int> state(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k)
    state[static_cast<std::size_t>(k)] = lambda(k) <= 0.0 ? 0 : lambda(k) >= c(k) ? 2 : 1;
  std::vector<Vector> out{solve_pattern(G, r, c, state, lambda)};
  for (Eigen::Index k = 0; k < K; ++k) {
    if (state[static_cast<std::size_t>(k)] != 1) continue;
    for (int bound : {0, 2}) {
      state[static_cast<std::size_t>(k)] = bound;
      out.push_back(solve_pattern(G, r, c, state, lambda));
    }
    state[static_cast<std::size_t>(k)] = 1;
  }
  return out;
}

}  // namespace

ZResult z_binary(const Eigen::Ref<const Vector>& Fx, int y, const Eigen::Ref<const Vector>& w, double b,
                 double c) {
  require(c > 0.0, "z_binary: c must be > 0");
  require(y == 1 || y == -1, "z_binary: y must be +-1");
  require(w.size() == Fx.size(), "z_binary: dimension mismatch");

  ZResult r;
  r.lambda = Vector::Zero(1);
  r.xi = Vector::Zero(1);
  r.z = Fx;
  const double wsq = w.squaredNorm();
  const double m = y * (w.dot(Fx) + b);

  if (wsq < kDegenerateNorm) {
    r.xi(0) = std::max(0.0, 1.0 - y * b);
    r.lambda(0) = r.xi(0) > 0.0 ? c : 0.0;
    r.cases = {r.xi(0) > 0.0 ? ZCase::Capped : ZCase::OnCorrectSide};
  } else if (m >= 1.0) {
    r.cases = {ZCase::OnCorrectSide};
  } else {
    const double step = 2.0 * (1.0 - m) / wsq;
    r.lambda(0) = step < c ? step : c;
    r.z.noalias() += (0.5 * r.lambda(0) * y) * w;
    r.xi(0) = std::max(0.0, 1.0 - y * (w.dot(r.z) + b));
    r.cases = {step < c ? ZCase::ProjectedToMargin : ZCase::Capped};
  }
  r.objective = (r.z - Fx).squaredNorm() + c * r.xi(0);
  return r;
}

ZResult z_multiclass(const Eigen::Ref<const Vector>& Fx, const std::vector<BinarySvm>& machines,
                     const std::vector<int>& targets, const Eigen::Ref<const Vector>& c,
                     const ZSolveOptions& opt, const Matrix* weight_gram) {
  check_inputs(Fx, machines, targets, c);
  require(opt.tol > 0.0, "z_multiclass: tol must be > 0");
  const auto K = static_cast<Eigen::Index>(machines.size());

  Matrix G(K, K);
  Vector r(K);
  for (Eigen::Index j = 0; j < K; ++j) {
    const auto& mj = machines[static_cast<std::size_t>(j)];
    const int yj = targets[static_cast<std::size_t>(j)];
    r(j) = 1.0 - yj * mj.decision(Fx);
    for (Eigen::Index k = 0; k <= j; ++k) {
      const double dot = weight_gram != nullptr ? (*weight_gram)(j, k) : mj.w.dot(machines[static_cast<std::size_t>(k)].w);
      G(j, k) = G(k, j) = yj * targets[static_cast<std::size_t>(k)] * dot;
    }
  }

  ZResult res;
  res.lambda = Vector::Zero(K);
  if ((r.array() <= 0.0).all()) {
    // Every margin already >= 1: lambda = 0 is optimal.
    finish(res, Fx, machines, targets, c);
    res.dual_gap = res.objective;
    return res;
  }

  res.converged = false;
  // Coordinate ascent identifies the bound pattern quickly but converges
  // slowly when G is singular (K > L). Once the pattern holds for a sweep, an
  // exact solve on the free multipliers usually finishes the job.
  auto pattern_of = [&](const Vector& lam) {
    std::vector<ZCase> p(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) p[static_cast<std::size_t>(k)] = classify(lam(k), c(k));
    return p;
  };
  std::vector<ZCase> last_pattern, tried_pattern;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double max_step = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      double next;
      if (G(k, k) < kDegenerateNorm) {
        next = r(k) > 0.0 ? c(k) : 0.0;
      } else {
        const double off = G.row(k).dot(res.lambda) - G(k, k) * res.lambda(k);
        next = std::clamp((2.0 * r(k) - off) / G(k, k), 0.0, c(k));
      }
      max_step = std::max(max_step, std::abs(next - res.lambda(k)));
      res.lambda(k) = next;
    }
    res.sweeps = sweep;
    if (opt.record_trace) res.dual_trace.push_back(dual_value(G, r, res.lambda));
    auto pattern = pattern_of(res.lambda);
    if ((pattern == last_pattern && pattern != tried_pattern) || sweep % 64 == 0) {
      tried_pattern = pattern;
      const double current = dual_value(G, r, res.lambda);
      for (const Vector& cand : polish_candidates(G, r, c, res.lambda)) {
        const double dual = dual_value(G, r, cand);
        if (dual < current) continue;
        ZResult trial = res;
        trial.lambda = cand;
        finish(trial, Fx, machines, targets, c);
        trial.dual_gap = trial.objective - dual;
        if (trial.dual_gap <= opt.tol * (1.0 + std::abs(trial.objective))) {
          if (opt.record_trace) trial.dual_trace.back() = dual;
          trial.converged = true;
          return trial;
        }
      }
    }
    last_pattern = std::move(pattern);
    if (max_step < opt.tol || sweep % 16 == 0) {
      const double dual = dual_value(G, r, res.lambda);
      finish(res, Fx, machines, targets, c);
      res.dual_gap = res.objective - dual;
      if (res.dual_gap <= opt.tol * (1.0 + std::abs(res.objective))) {
        res.converged = true;
        return res;
      }
    }
  }
  finish(res, Fx, machines, targets, c);
  res.dual_gap = res.objective - dual_value(G, r, res.lambda);
  return res;
}

ZResult z_oracle(const Eigen::Ref<const Vector>& Fx, const std::vector<BinarySvm>& machines,
                 const std::vector<int>& targets, const Eigen::Ref<const Vector>& c) {
  check_inputs(Fx, machines, targets, c);
  const auto K = static_cast<Eigen::Index>(machines.size());
  require(K <= 12, "z_oracle: at most 12 machines");

  Matrix G(K, K);
  Vector r(K);
  for (Eigen::Index j = 0; j < K; ++j) {
    r(j) = 1.0 - targets[static_cast<std::size_t>(j)] * machines[static_cast<std::size_t>(j)].decision(Fx);
    for (Eigen::Index k = 0; k < K; ++k)
      G(j, k) = targets[static_cast<std::size_t>(j)] * targets[static_cast<std::size_t>(k)] *
                machines[static_cast<std::size_t>(j)].w.dot(machines[static_cast<std::size_t>(k)].w);
  }
  const double scale = 1.0 + G.cwiseAbs().maxCoeff() * (1.0 + c.maxCoeff()) + r.cwiseAbs().maxCoeff();
  const double eps = 1e-9 * scale;

  long total = 1;
  for (Eigen::Index k = 0; k < K; ++k) total *= 3;

  ZResult best;
  double best_obj = std::numeric_limits<double>::infinity();
  ZResult fallback;
  double fallback_violation = std::numeric_limits<double>::infinity();

  std::vector<int> state(static_cast<std::size_t>(K));
  for (long code = 0; code < total; ++code) {
    long rest = code;
    std::vector<Eigen::Index> interior;
    Vector lambda = Vector::Zero(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      state[static_cast<std::size_t>(k)] = static_cast<int>(rest % 3);
      rest /= 3;
      if (state[static_cast<std::size_t>(k)] == 1) interior.push_back(k);
      if (state[static_cast<std::size_t>(k)] == 2) lambda(k) = c(k);
    }
    if (!interior.empty()) {
      const auto A = static_cast<Eigen::Index>(interior.size());
      Matrix GA(A, A);
      Vector rhs(A);
      for (Eigen::Index i = 0; i < A; ++i) {
        rhs(i) = 2.0 * r(interior[static_cast<std::size_t>(i)]);
        for (Eigen::Index k = 0; k < K; ++k)
          if (state[static_cast<std::size_t>(k)] == 2) rhs(i) -= G(interior[static_cast<std::size_t>(i)], k) * lambda(k);
        for (Eigen::Index j = 0; j < A; ++j)
          GA(i, j) = G(interior[static_cast<std::size_t>(i)], interior[static_cast<std::size_t>(j)]);
      }
      const Vector sol = GA.completeOrthogonalDecomposition().solve(rhs);
      if (!sol.allFinite() || (GA * sol - rhs).cwiseAbs().maxCoeff() > eps) continue;
      for (Eigen::Index i = 0; i < A; ++i) lambda(interior[static_cast<std::size_t>(i)]) = sol(i);
    }

    // KKT of the dual: gradient r - G lambda / 2 vanishes on the interior,
    // is <= 0 at the lower bound and >= 0 at the upper bound.
    const Vector grad = r - 0.5 * (G * lambda);
    double violation = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      switch (state[static_cast<std::size_t>(k)]) {
        case 0: violation = std::max(violation, grad(k)); break;
        case 2: violation = std::max(violation, -grad(k)); break;
        default:
          violation = std::max({violation, -lambda(k), lambda(k) - c(k)});
      }
    }

    ZResult cand;
    cand.lambda = lambda.cwiseMax(0.0).cwiseMin(c);
    finish(cand, Fx, machines, targets, c);
    if (violation <= eps) {
      if (cand.objective < best_obj) {
        best_obj = cand.objective;
        best = cand;
      }
    } else if (violation < fallback_violation) {
      fallback_violation = violation;
      fallback = cand;
    }
  }
  if (!std::isfinite(best_obj)) {
    fallback.converged = false;
    return fallback;
  }
  best.dual_gap = best.objective - dual_value(G, r, best.lambda);
  return best;
}

double z_objective(const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& Fx,
                   const std::vector<BinarySvm>& machines, const std::vector<int>& targets,
                   const Eigen::Ref<const Vector>& c) {
  double value = (z - Fx).squaredNorm();
  for (std::size_t k = 0; k < machines.size(); ++k)
    value += c(static_cast<Eigen::Index>(k)) * std::max(0.0, 1.0 - targets[k] * machines[k].decision(z));
  return value;
}

double KktResiduals::worst() const {
  return std::max({stationarity, margin_slackness, slack_slackness, primal_infeasibility, dual_infeasibility});
}

KktResiduals kkt_residuals(const ZResult& r, const Eigen::Ref<const Vector>& Fx,
                           const std::vector<BinarySvm>& machines, const std::vector<int>& targets,
                           const Eigen::Ref<const Vector>& c) {
  KktResiduals out;
  Vector direction = r.z - Fx;
  for (std::size_t k = 0; k < machines.size(); ++k)
    direction.noalias() -= (0.5 * r.lambda(static_cast<Eigen::Index>(k)) * targets[k]) * machines[k].w;
  out.stationarity = direction.size() > 0 ? direction.cwiseAbs().maxCoeff() : 0.0;
  for (std::size_t k = 0; k < machines.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double margin = targets[k] * machines[k].decision(r.z);
    out.margin_slackness = std::max(out.margin_slackness, std::abs(r.lambda(i) * (margin + r.xi(i) - 1.0)));
    out.slack_slackness = std::max(out.slack_slackness, std::abs((c(i) - r.lambda(i)) * r.xi(i)));
    out.primal_infeasibility = std::max({out.primal_infeasibility, 1.0 - r.xi(i) - margin, -r.xi(i)});
    out.dual_infeasibility = std::max({out.dual_infeasibility, -r.lambda(i), r.lambda(i) - c(i)});
  }
  return out;
}

}  // namespace macsvm
