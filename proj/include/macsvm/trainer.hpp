#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "macsvm/common.hpp"
#include "macsvm/data.hpp"
#include "macsvm/features.hpp"
#include "macsvm/linsvm.hpp"

namespace macsvm {

enum class InitStrategy { Random, Simplex };

struct MacConfig {
  int L = 2;
  int M = 100;             ///< basis count; ignored with linear_f
  bool linear_f = false;   ///< F(x) = W x instead of an RBF expansion
  double sigma = 0.0;      ///< <= 0 selects the median centre distance
  double lambda = 1e-3;
  double C = 1.0;
  std::vector<double> class_C;  ///< optional per-machine override of C
  double mu0 = 2.0;
  double mu_factor = 1.5;
  int mu_max_stages = 20;
  double inner_tol = 1e-4;
  int inner_max_iters = 50;
  InitStrategy init = InitStrategy::Random;
  int patience = 1;
  std::uint64_t seed = 0;
  double simplex_scale = 4.0;  ///< pairwise vertex distance for simplex init
  bool binary_mode = true;     ///< K == 2 uses one machine instead of two
  double svm_tol = 1e-6;
  int svm_max_epochs = 2000;
  double z_tol = 1e-10;
  int kmeans_iters = 100;
  int threads = 1;             ///< not part of the model; results do not depend on it

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

std::string to_string(InitStrategy s);
InitStrategy init_strategy_from_string(const std::string& s);

/// One row per completed penalty stage.
struct StageRecord {
  int stage = 0;
  int iterations = 0;
  double mu = 0.0;
  double penalty = 0.0;  ///< quadratic-penalty objective at the end of the stage
  double nested = 0.0;   ///< original objective with slacks at their optimum
  double train_error = 0.0;
  double val_error = std::numeric_limits<double>::quiet_NaN();
};

/// Penalty objective around each block step of one inner iteration.
struct IterationRecord {
  int stage = 0;
  int iteration = 0;
  double mu = 0.0;
  double before = 0.0;
  double after_z = 0.0;
  double after_g = 0.0;
  double after_f = 0.0;
  double g_gap = 0.0;  ///< sum of the SVM duality gaps of this g-step
  double nested = 0.0;
  double train_error = 0.0;
  double seconds = 0.0;  ///< wall time since training started
};

struct MacState {
  Matrix Z;   ///< L x N auxiliary coordinates
  Matrix Xi;  ///< machines x N slacks
  double mu = 0.0;
  std::vector<StageRecord> history;
  std::vector<IterationRecord> iterations;
};

/// Composition of the linear machines with the basis expansion:
/// score_k(x) = v_k^T Phi(x) + b_k with v_k = W^T w_k.
struct CollapsedClassifier {
  std::vector<Vector> v;
  std::vector<double> b;
  int K = 0;

  bool binary_mode() const { return K == 2 && v.size() == 1; }
  Vector scores(const Eigen::Ref<const Vector>& phi) const;
};

struct TrainedModel {
  RbfMapParams map;
  OvaSvm svms;
  CollapsedClassifier collapsed;
  Standardizer standardizer;
  std::vector<std::string> label_names;
  Eigen::Index input_dim = 0;
  MacConfig config;
  std::string stop_reason;
  int stages = 0;
  int iterations = 0;
};

/// Regular-simplex class layout, K x L. With L >= K - 1 the rows are
/// pairwise `scale` apart and centred at the origin. With L < K - 1 they are
/// an orthogonal projection of that simplex: onto an evenly spaced ramp when
/// L == 1, otherwise onto the leading Fourier directions (a regular K-gon for
/// L == 2). Class 0 sits at -scale/2 when K == 2.
Matrix simplex_vertices(int K, int L, double scale);

/// Initial auxiliary coordinates, L x N.
Matrix init_Z(const MacConfig& cfg, const Labels& y, int K);

/// Targets y_n^k for every machine (one row per machine).
std::vector<std::vector<int>> machine_targets(const OvaSvm& svms, const Labels& y);

/// lambda |W|^2 + sum_k ((|w_k|^2 + b_k^2)/2 + C_k sum_n xi_nk)
///   + (mu/2) sum_n |z_n - W phi_n|^2.
/// Slacks are the hinge values of (svms, Z) unless Xi is supplied.
double penalty_objective(double lambda, const Matrix& W, const OvaSvm& svms, const Labels& y, const Matrix& Z,
                         double mu, const Matrix& Phi, const Matrix* Xi = nullptr);

/// lambda |W|^2 + sum_k ((|w_k|^2 + b_k^2)/2 + C_k sum_n hinge(w_k^T W phi_n + b_k)).
double nested_objective(double lambda, const Matrix& W, const OvaSvm& svms, const Labels& y, const Matrix& Phi);

/// (1/N) sum_n |z_n - F(x_n)|^2.
double constraint_residual(const Matrix& Z, const Matrix& W, const Matrix& Phi);

CollapsedClassifier collapse(const Matrix& W, const OvaSvm& svms);

struct MacResult {
  TrainedModel model;
  MacState state;
};

/// Progress callback, invoked after each completed stage.
using StageObserver = std::function<void(const StageRecord&)>;

/// Joint training of F and g by alternating Z-, g- and F-steps on the
/// quadratic-penalty objective while mu grows geometrically. With a
/// validation set, training stops once the validation error fails to improve
/// for `patience` consecutive stages and the best-validation model is
/// returned; otherwise all mu_max_stages stages run.
/// Throws NumericError (message names stage and iteration) on non-finite values.
MacResult train_mac(const MacConfig& cfg, const Dataset& train, const Dataset* val = nullptr,
                    const StageObserver& observer = {});

struct TwoStepPoint {
  int round = 0;
  double seconds = 0.0;
  double nested = 0.0;
};

struct TwoStepOptions {
  double wall_budget_seconds = 60.0;
  int max_rounds = std::numeric_limits<int>::max();
  int subgradient_iters = 100;  ///< per F-step
  double step0 = 0.1;           ///< first step, relative to max(|W|_F, 1e-3)
};

struct TwoStepResult {
  TrainedModel model;
  std::vector<TwoStepPoint> trace;
};

/// Alternates an SVM fit on F(X) with a subgradient F-step on the nested
/// objective over W (step_t = step0 * scale / sqrt(t + 1) along the normalized
/// subgradient, keeping the best iterate). Starts from the same initial fits
/// as train_mac.
TwoStepResult two_step_baseline(const MacConfig& cfg, const Dataset& train, const TwoStepOptions& opt);

/// One subgradient F-step of the baseline, exposed for testing.
Matrix subgradient_fstep(const Matrix& W, const OvaSvm& svms, const Labels& y, const Matrix& Phi, double lambda,
                         int iters, double step0);

/// Latent coordinates F(X) for raw inputs (standardization applied), L x N.
Matrix model_latent(const TrainedModel& model, const Matrix& X, int threads = 1);
/// Labels through the collapsed classifier.
Labels model_predict(const TrainedModel& model, const Matrix& X, int threads = 1);
/// Labels through g(F(x)).
Labels model_predict_two_stage(const TrainedModel& model, const Matrix& X, int threads = 1);

}  // namespace macsvm
