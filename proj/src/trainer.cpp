#include "macsvm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "macsvm/baselines.hpp"
#include "macsvm/fstep.hpp"
#include "macsvm/rng.hpp"
#include "macsvm/zstep.hpp"

namespace macsvm {

namespace {

constexpr std::uint64_t kInitStream = 0x5a49;    // "ZI"
constexpr std::uint64_t kCenterStream = 0x4345;  // "CE"

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> machine_penalties(const MacConfig& cfg, std::size_t machines) {
  if (cfg.class_C.empty()) return std::vector<double>(machines, cfg.C);
  require(cfg.class_C.size() == machines, "class_C must have one entry per machine");
  return cfg.class_C;
}

// Regularizer, machine norms and hinge terms; slacks from Z unless Xi given.
double objective_terms(double lambda, const Matrix& W, const OvaSvm& svms,
                       const std::vector<std::vector<int>>& targets, const Matrix& Z, const Matrix* Xi) {
  double value = lambda * W.squaredNorm();
  for (std::size_t k = 0; k < svms.machines.size(); ++k) {
    const auto& m = svms.machines[k];
    double slack = 0.0;
    for (Eigen::Index n = 0; n < Z.cols(); ++n) {
      if (Xi != nullptr)
        slack += (*Xi)(static_cast<Eigen::Index>(k), n);
      else
        slack += std::max(0.0, 1.0 - targets[k][static_cast<std::size_t>(n)] * m.decision(Z.col(n)));
    }
    value += 0.5 * m.augmented_sq_norm() + m.C * slack;
  }
  return value;
}

double penalty_from(double lambda, const Matrix& W, const OvaSvm& svms, const std::vector<std::vector<int>>& targets,
                    const Matrix& Z, const Matrix& FX, double mu, const Matrix* Xi = nullptr) {
  return objective_terms(lambda, W, svms, targets, Z, Xi) + 0.5 * mu * (Z - FX).squaredNorm();
}

// Everything both trainers share up to and including the initial g and F fits.
struct Setup {
  FeatureMap features;
  Matrix Phi;
  std::unique_ptr<GramCache> gram;
  Matrix Z;
  Matrix W;
  OvaFit g;
  std::vector<double> C;
  bool binary = false;
};

OvaFit fit_g(const MacConfig& cfg, const Matrix& Z, const Labels& y, int K, bool binary,
             const std::vector<double>& C, const std::vector<Vector>* warm) {
  if (binary) return train_binary_mode(Z, y, C.front(), cfg.svm_tol, cfg.svm_max_epochs, warm);
  return train_ova(Z, y, K, C, cfg.svm_tol, cfg.svm_max_epochs, cfg.threads, warm);
}

std::vector<Vector> alphas_of(const OvaFit& fit) {
  std::vector<Vector> out;
  for (const auto& f : fit.fits) out.push_back(f.alpha);
  return out;
}

Setup prepare(const MacConfig& cfg, const Dataset& train) {
  cfg.validate();
  train.validate();
  Setup s;
  s.binary = cfg.binary_mode && train.K == 2;
  s.C = machine_penalties(cfg, s.binary ? 1 : static_cast<std::size_t>(train.K));

  if (cfg.linear_f) {
    s.features.linear = true;
  } else {
    require(cfg.M <= train.X.rows(), "M must not exceed the number of training points");
    if (cfg.M == train.X.rows()) {
      s.features.centers.C = train.X;  // nonparametric: every training point is a centre
    } else {
      s.features.centers =
          kmeans_centers(train.X, cfg.M, cfg.kmeans_iters, CounterRng::substream(cfg.seed, kCenterStream), cfg.threads)
              .centers;
    }
    s.features.centers.sigma = cfg.sigma > 0.0 ? cfg.sigma : median_center_distance(s.features.centers.C);
  }
  s.Phi = s.features.design(train.X, cfg.threads);
  s.gram = std::make_unique<GramCache>(s.Phi);

  s.Z = init_Z(cfg, train.y, train.K);
  s.g = fit_g(cfg, s.Z, train.y, train.K, s.binary, s.C, nullptr);
  s.W = solve_weights(*s.gram, s.Phi, s.Z, cfg.lambda, cfg.mu0, cfg.threads);
  return s;
}

TrainedModel assemble(const MacConfig& cfg, const Setup& s, const Matrix& W, const OvaSvm& svms,
                      Eigen::Index input_dim) {
  TrainedModel model;
  model.map.features = s.features;
  model.map.W = W;
  model.map.lambda = cfg.lambda;
  model.svms = svms;
  model.collapsed = collapse(W, svms);
  model.input_dim = input_dim;
  model.config = cfg;
  return model;
}

void check_finite(double value, int stage, int iter, const char* step) {
  if (!std::isfinite(value))
    throw NumericError("non-finite objective after " + std::string(step) + " at stage " + std::to_string(stage) +
                       ", iteration " + std::to_string(iter));
}

}  // namespace

void MacConfig::validate() const {
  require(L >= 1, "L must be >= 1");
  require(linear_f || M >= 1, "M must be >= 1");
  require(std::isfinite(sigma), "sigma must be finite");
  require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be >= 0");
  require(C > 0.0 && std::isfinite(C), "C must be > 0");
  for (double c : class_C) require(c > 0.0 && std::isfinite(c), "class C values must be > 0");
  require(mu0 > 0.0 && std::isfinite(mu0), "mu0 must be > 0");
  require(mu_factor > 1.0 && std::isfinite(mu_factor), "mu-factor must be > 1");
  require(mu_max_stages >= 1, "stages must be >= 1");
  require(inner_tol >= 0.0, "inner-tol must be >= 0");
  require(inner_max_iters >= 1, "inner-iters must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(simplex_scale > 0.0, "simplex scale must be > 0");
  require(svm_tol > 0.0, "svm tol must be > 0");
  require(svm_max_epochs >= 1, "svm max epochs must be >= 1");
  require(z_tol > 0.0, "z tol must be > 0");
  require(kmeans_iters >= 0, "kmeans iterations must be >= 0");
  require(threads >= 1, "threads must be >= 1");
}

std::string to_string(InitStrategy s) { return s == InitStrategy::Simplex ? "simplex" : "random"; }

InitStrategy init_strategy_from_string(const std::string& s) {
  if (s == "simplex") return InitStrategy::Simplex;
  if (s == "random") return InitStrategy::Random;
  throw std::invalid_argument("init must be 'random' or 'simplex', got '" + s + "'");
}

Matrix simplex_vertices(int K, int L, double scale) {
  require(K >= 2, "simplex_vertices: K must be >= 2");
  require(L >= 1, "simplex_vertices: L must be >= 1");
  require(scale > 0.0, "simplex_vertices: scale must be > 0");

  // Orthonormal basis of the complement of the all-ones vector in R^K. The
  // centred unit vectors e_k - 1/K are pairwise sqrt(2) apart, so their
  // coordinates in this basis, times scale / sqrt(2), are the vertices.
  const int dims = K - 1;
  Matrix U(K, dims);
  int col = 0;
  if (L == 1 || K == 2) {
    for (int k = 0; k < K; ++k) U(k, col) = k - 0.5 * (K - 1);
    U.col(col).normalize();
    ++col;
  }
  if (col == 0) {
    for (int f = 1; col < dims; ++f) {
      for (int part = 0; part < 2 && col < dims; ++part) {
        for (int k = 0; k < K; ++k) {
          const double angle = 2.0 * std::numbers::pi * f * k / K;
          U(k, col) = part == 0 ? std::cos(angle) : std::sin(angle);
        }
        U.col(col).normalize();
        ++col;
      }
    }
  }
  Matrix V = Matrix::Zero(K, L);
  const int keep = std::min(L, col);
  V.leftCols(keep) = U.leftCols(keep) * (scale / std::numbers::sqrt2);
  return V;
}

Matrix init_Z(const MacConfig& cfg, const Labels& y, int K) {
  const auto N = static_cast<Eigen::Index>(y.size());
  Matrix Z(cfg.L, N);
  if (cfg.init == InitStrategy::Simplex) {
    const Matrix V = simplex_vertices(K, cfg.L, cfg.simplex_scale);
    for (Eigen::Index n = 0; n < N; ++n) Z.col(n) = V.row(y[static_cast<std::size_t>(n)]).transpose();
    return Z;
  }
  CounterRng rng(CounterRng::substream(cfg.seed, kInitStream));
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index l = 0; l < Z.rows(); ++l) Z(l, n) = rng.normal();
  return Z;
}

std::vector<std::vector<int>> machine_targets(const OvaSvm& svms, const Labels& y) {
  std::vector<std::vector<int>> out;
  if (svms.binary_mode()) {
    out.push_back(ova_targets(y, 1));
    return out;
  }
  for (int k = 0; k < static_cast<int>(svms.machines.size()); ++k) out.push_back(ova_targets(y, k));
  return out;
}

double penalty_objective(double lambda, const Matrix& W, const OvaSvm& svms, const Labels& y, const Matrix& Z,
                         double mu, const Matrix& Phi, const Matrix* Xi) {
  require(Z.cols() == Phi.cols() && static_cast<Eigen::Index>(y.size()) == Z.cols(), "penalty_objective: shape mismatch");
  const Matrix FX = W * Phi;
  return penalty_from(lambda, W, svms, machine_targets(svms, y), Z, FX, mu, Xi);
}

double nested_objective(double lambda, const Matrix& W, const OvaSvm& svms, const Labels& y, const Matrix& Phi) {
  require(static_cast<Eigen::Index>(y.size()) == Phi.cols(), "nested_objective: shape mismatch");
  const Matrix FX = W * Phi;
  return objective_terms(lambda, W, svms, machine_targets(svms, y), FX, nullptr);
}

double constraint_residual(const Matrix& Z, const Matrix& W, const Matrix& Phi) {
  return (Z - W * Phi).squaredNorm() / static_cast<double>(Z.cols());
}

Vector CollapsedClassifier::scores(const Eigen::Ref<const Vector>& phi) const {
  Vector s(K);
  if (binary_mode()) {
    const double value = v.front().dot(phi) + b.front();
    s << -value, value;
    return s;
  }
  for (int k = 0; k < K; ++k) s(k) = v[static_cast<std::size_t>(k)].dot(phi) + b[static_cast<std::size_t>(k)];
  return s;
}

CollapsedClassifier collapse(const Matrix& W, const OvaSvm& svms) {
  CollapsedClassifier out;
  out.K = svms.K;
  for (const auto& m : svms.machines) {
    require(m.w.size() == W.rows(), "collapse: machine dimension does not match W");
    out.v.push_back(W.transpose() * m.w);
    out.b.push_back(m.b);
  }
  return out;
}

MacResult train_mac(const MacConfig& cfg, const Dataset& train, const Dataset* val, const StageObserver& observer) {
  const auto t0 = Clock::now();
  Setup s = prepare(cfg, train);
  if (val != nullptr) {
    val->validate();
    require(val->dim() == train.dim(), "validation set dimension differs from training set");
  }
  const Matrix Phi_val = val != nullptr ? s.features.design(val->X, cfg.threads) : Matrix();

  OvaSvm svms = s.g.model;
  std::vector<Vector> warm = alphas_of(s.g);
  const auto targets = machine_targets(svms, train.y);
  const auto machines = static_cast<Eigen::Index>(svms.machines.size());
  const auto N = static_cast<Eigen::Index>(train.size());

  MacState state;
  state.Z = std::move(s.Z);
  state.Xi = Matrix::Zero(machines, N);
  Matrix W = s.W;
  Matrix FX = map_latent(W, s.Phi, cfg.threads);

  Matrix best_W = W;
  OvaSvm best_svms = svms;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_stages = 0;
  std::string stop_reason = "max-stages";
  int total_iters = 0;

  ZSolveOptions zopt;
  zopt.tol = cfg.z_tol;

  double mu = cfg.mu0;
  int stage = 0;
  for (; stage < cfg.mu_max_stages; ++stage, mu *= cfg.mu_factor) {
    state.mu = mu;
    long z_unconverged = 0, g_unconverged = 0;
    double previous = penalty_from(cfg.lambda, W, svms, targets, state.Z, FX, mu);
    check_finite(previous, stage, 0, "stage start");
    int iter = 1;
    for (; iter <= cfg.inner_max_iters; ++iter) {
      IterationRecord rec;
      rec.stage = stage;
      rec.iteration = iter;
      rec.mu = mu;
      rec.before = previous;

      // Z-step: per-point problems with c_k = 2 C_k / mu.
      Vector c(machines);
      for (Eigen::Index k = 0; k < machines; ++k) c(k) = 2.0 * svms.machines[static_cast<std::size_t>(k)].C / mu;
      Matrix weight_gram(machines, machines);
      for (Eigen::Index j = 0; j < machines; ++j)
        for (Eigen::Index k = 0; k < machines; ++k)
          weight_gram(j, k) = svms.machines[static_cast<std::size_t>(j)].w.dot(svms.machines[static_cast<std::size_t>(k)].w);
      std::vector<char> unconverged(static_cast<std::size_t>(N), 0);
      parallel_for(static_cast<std::size_t>(N), cfg.threads, [&](std::size_t i) {
        const auto n = static_cast<Eigen::Index>(i);
        ZResult r;
        if (svms.binary_mode()) {
          const auto& m = svms.machines.front();
          r = z_binary(FX.col(n), targets[0][i], m.w, m.b, c(0));
        } else {
          std::vector<int> t(static_cast<std::size_t>(machines));
          for (std::size_t k = 0; k < t.size(); ++k) t[k] = targets[k][i];
          r = z_multiclass(FX.col(n), svms.machines, t, c, zopt, &weight_gram);
          unconverged[i] = !r.converged;
        }
        state.Z.col(n) = r.z;
        state.Xi.col(n) = r.xi;
      });
      z_unconverged += std::count(unconverged.begin(), unconverged.end(), 1);
      rec.after_z = penalty_from(cfg.lambda, W, svms, targets, state.Z, FX, mu);
      check_finite(rec.after_z, stage, iter, "Z-step");

      // g-step
      OvaFit g = fit_g(cfg, state.Z, train.y, train.K, s.binary, s.C, &warm);
      svms = g.model;
      warm = alphas_of(g);
      for (const auto& f : g.fits) {
        rec.g_gap += f.dual_gap;
        g_unconverged += !f.converged;
      }
      for (Eigen::Index k = 0; k < machines; ++k) state.Xi.row(k) = g.fits[static_cast<std::size_t>(k)].xi.transpose();
      rec.after_g = penalty_from(cfg.lambda, W, svms, targets, state.Z, FX, mu);
      check_finite(rec.after_g, stage, iter, "g-step");

      // F-step
      W = solve_weights(*s.gram, s.Phi, state.Z, cfg.lambda, mu, cfg.threads);
      FX = map_latent(W, s.Phi, cfg.threads);
      rec.after_f = penalty_from(cfg.lambda, W, svms, targets, state.Z, FX, mu);
      check_finite(rec.after_f, stage, iter, "F-step");

      rec.nested = objective_terms(cfg.lambda, W, svms, targets, FX, nullptr);
      rec.train_error = error_rate(predict_all(svms, FX, cfg.threads), train.y);
      rec.seconds = seconds_since(t0);
      state.iterations.push_back(rec);
      ++total_iters;

      const double change = std::abs(previous - rec.after_f) / std::max(std::abs(previous), 1e-300);
      previous = rec.after_f;
      if (change < cfg.inner_tol) break;
    }

    if (z_unconverged > 0)
      log_message(1, "stage " + std::to_string(stage) + ": " + std::to_string(z_unconverged) +
                         " Z-step point problems stopped at the sweep limit");
    if (g_unconverged > 0)
      log_message(1, "stage " + std::to_string(stage) + ": " + std::to_string(g_unconverged) +
                         " SVM fits stopped at the epoch limit");

    StageRecord sr;
    sr.stage = stage;
    sr.iterations = std::min(iter, cfg.inner_max_iters);
    sr.mu = mu;
    sr.penalty = previous;
    sr.nested = state.iterations.back().nested;
    sr.train_error = state.iterations.back().train_error;
    if (val != nullptr) {
      const Matrix FV = map_latent(W, Phi_val, cfg.threads);
      sr.val_error = error_rate(predict_all(svms, FV, cfg.threads), val->y);
    }
    state.history.push_back(sr);
    if (observer) observer(sr);

    if (val == nullptr) {
      best_W = W;
      best_svms = svms;
      continue;
    }
    if (sr.val_error < best_val) {
      best_val = sr.val_error;
      best_W = W;
      best_svms = svms;
      bad_stages = 0;
    } else if (++bad_stages >= cfg.patience) {
      stop_reason = "early-stopping";
      ++stage;
      break;
    }
  }

  MacResult out;
  out.model = assemble(cfg, s, best_W, best_svms, train.dim());
  out.model.stop_reason = stop_reason;
  out.model.stages = stage;
  out.model.iterations = total_iters;
  out.state = std::move(state);
  return out;
}

Matrix subgradient_fstep(const Matrix& W, const OvaSvm& svms, const Labels& y, const Matrix& Phi, double lambda,
                         int iters, double step0) {
  require(W.cols() == Phi.rows(), "subgradient_fstep: W/Phi mismatch");
  const auto targets = machine_targets(svms, y);
  const auto machines = static_cast<Eigen::Index>(svms.machines.size());
  Matrix weights(W.rows(), machines);
  for (Eigen::Index k = 0; k < machines; ++k) weights.col(k) = svms.machines[static_cast<std::size_t>(k)].w;

  Matrix current = W;
  Matrix best = W;
  double best_obj = nested_objective(lambda, W, svms, y, Phi);
  const double scale = std::max(W.norm(), 1e-3);
  Matrix pull(machines, Phi.rows());
  for (int t = 0; t < iters; ++t) {
    // d/dW of C_k hinge_nk is -C_k y_nk w_k phi_n^T on active points.
    pull.setZero();
    for (Eigen::Index k = 0; k < machines; ++k) {
      const auto& m = svms.machines[static_cast<std::size_t>(k)];
      const Vector v = current.transpose() * m.w;
      const Vector score = Phi.transpose() * v;
      for (Eigen::Index n = 0; n < Phi.cols(); ++n) {
        const int yn = targets[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
        if (yn * (score(n) + m.b) < 1.0) pull.row(k).noalias() += (m.C * yn) * Phi.col(n).transpose();
      }
    }
    const Matrix grad = 2.0 * lambda * current - weights * pull;
    const double norm = grad.norm();
    if (norm == 0.0) break;
    current -= (step0 * scale / std::sqrt(t + 1.0) / norm) * grad;
    const double obj = nested_objective(lambda, current, svms, y, Phi);
    if (obj < best_obj) {
      best_obj = obj;
      best = current;
    }
  }
  return best;
}

TwoStepResult two_step_baseline(const MacConfig& cfg, const Dataset& train, const TwoStepOptions& opt) {
  const auto t0 = Clock::now();
  Setup s = prepare(cfg, train);
  require(!s.features.linear, "two_step_baseline: requires an RBF feature map");
  TwoStepResult out;
  Matrix W = s.W;
  OvaSvm svms = s.g.model;
  std::vector<Vector> warm;
  out.trace.push_back({0, seconds_since(t0), nested_objective(cfg.lambda, W, svms, train.y, s.Phi)});

  for (int round = 1; round <= opt.max_rounds && seconds_since(t0) < opt.wall_budget_seconds; ++round) {
    const Matrix FX = map_latent(W, s.Phi, cfg.threads);
    OvaFit g = fit_g(cfg, FX, train.y, train.K, s.binary, s.C, warm.empty() ? nullptr : &warm);
    svms = g.model;
    warm = alphas_of(g);
    W = subgradient_fstep(W, svms, train.y, s.Phi, cfg.lambda, opt.subgradient_iters, opt.step0);
    const double nested = nested_objective(cfg.lambda, W, svms, train.y, s.Phi);
    if (!std::isfinite(nested)) throw NumericError("two-step baseline: non-finite objective at round " + std::to_string(round));
    out.trace.push_back({round, seconds_since(t0), nested});
  }
  out.model = assemble(cfg, s, W, svms, train.dim());
  out.model.stop_reason = "budget";
  out.model.iterations = out.trace.back().round;
  return out;
}

Matrix model_latent(const TrainedModel& model, const Matrix& X, int threads) {
  require(X.cols() == model.input_dim, "input dimension " + std::to_string(X.cols()) + " does not match model (" +
                                           std::to_string(model.input_dim) + ")");
  const Matrix Phi = model.map.features.design(model.standardizer.apply(X), threads);
  return map_latent(model.map.W, Phi, threads);
}

Labels model_predict(const TrainedModel& model, const Matrix& X, int threads) {
  require(X.cols() == model.input_dim, "input dimension " + std::to_string(X.cols()) + " does not match model (" +
                                           std::to_string(model.input_dim) + ")");
  const Matrix Phi = model.map.features.design(model.standardizer.apply(X), threads);
  Labels out(static_cast<std::size_t>(Phi.cols()));
  parallel_for(out.size(), threads, [&](std::size_t n) {
    out[n] = argmax_first(model.collapsed.scores(Phi.col(static_cast<Eigen::Index>(n))));
  });
  return out;
}

Labels model_predict_two_stage(const TrainedModel& model, const Matrix& X, int threads) {
  return predict_all(model.svms, model_latent(model, X, threads), threads);
}

}  // namespace macsvm
