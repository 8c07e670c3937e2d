#include "macsvm/linsvm.hpp"

#include <cmath>

namespace macsvm {

namespace {

void check_targets(const Matrix& Z, const std::vector<int>& targets) {
  require(static_cast<Eigen::Index>(targets.size()) == Z.cols(), "train_binary: target count != points");
  bool pos = false, neg = false;
  for (int t : targets) {
    require(t == 1 || t == -1, "train_binary: targets must be +1 or -1");
    (t > 0 ? pos : neg) = true;
  }
  require(pos && neg, "train_binary: both classes must be present");
}

}  // namespace

double svm_primal(const BinarySvm& svm, const Matrix& Z, const std::vector<int>& targets) {
  double loss = 0.0;
  for (Eigen::Index n = 0; n < Z.cols(); ++n)
    loss += std::max(0.0, 1.0 - targets[static_cast<std::size_t>(n)] * svm.decision(Z.col(n)));
  return 0.5 * svm.augmented_sq_norm() + svm.C * loss;
}

BinaryFit train_binary(const Matrix& Z, const std::vector<int>& targets, const SvmOptions& opt,
                       const Vector* warm_alpha) {
  require(opt.C > 0.0 && std::isfinite(opt.C), "train_binary: C must be > 0");
  require(opt.tol > 0.0, "train_binary: tol must be > 0");
  require(opt.max_epochs >= 1, "train_binary: max_epochs must be >= 1");
  check_targets(Z, targets);
  if (!Z.allFinite()) throw NumericError("train_binary: non-finite inputs");

  const Eigen::Index L = Z.rows();
  const Eigen::Index N = Z.cols();
  const double C = opt.C;

  // Augmented inputs [z; 1] scaled by the target, so each constraint reads
  // w_aug^T q_n >= 1 - xi_n.
  Matrix Q(L + 1, N);
  Q.topRows(L) = Z;
  Q.row(L).setOnes();
  for (Eigen::Index n = 0; n < N; ++n) Q.col(n) *= targets[static_cast<std::size_t>(n)];
  const Vector diag = Q.colwise().squaredNorm().transpose();

  BinaryFit fit;
  fit.alpha = Vector::Zero(N);
  if (warm_alpha != nullptr && warm_alpha->size() == N)
    fit.alpha = warm_alpha->cwiseMax(0.0).cwiseMin(C);
  Vector w = Q * fit.alpha;

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    for (Eigen::Index n = 0; n < N; ++n) {
      const double g = w.dot(Q.col(n)) - 1.0;
      const double a = fit.alpha(n);
      const double next = std::clamp(a - g / diag(n), 0.0, C);
      if (next != a) {
        w.noalias() += (next - a) * Q.col(n);
        fit.alpha(n) = next;
      }
    }
    w.noalias() = Q * fit.alpha;  // refresh accumulated rounding
    const Vector margins = Q.transpose() * w;
    const double hinge = (1.0 - margins.array()).cwiseMax(0.0).sum();
    const double wsq = w.squaredNorm();
    fit.primal = 0.5 * wsq + C * hinge;
    fit.dual = fit.alpha.sum() - 0.5 * wsq;
    fit.dual_gap = fit.primal - fit.dual;
    fit.gap_trace.push_back(fit.dual_gap);
    fit.epochs = epoch;
    if (!std::isfinite(fit.primal)) throw NumericError("train_binary: objective became non-finite");
    if (fit.dual_gap <= opt.tol * (1.0 + std::abs(fit.primal))) {
      fit.converged = true;
      break;
    }
  }

  fit.svm.w = w.head(L);
  fit.svm.b = w(L);
  fit.svm.C = C;
  fit.xi.resize(N);
  for (Eigen::Index n = 0; n < N; ++n)
    fit.xi(n) = std::max(0.0, 1.0 - targets[static_cast<std::size_t>(n)] * fit.svm.decision(Z.col(n)));
  return fit;
}

Vector OvaSvm::scores(const Eigen::Ref<const Vector>& z) const {
  Vector s(K);
  if (binary_mode()) {
    const double v = machines.front().decision(z);
    s << -v, v;
    return s;
  }
  for (int k = 0; k < K; ++k) s(k) = machines[static_cast<std::size_t>(k)].decision(z);
  return s;
}

std::vector<int> ova_targets(const Labels& y, int k) {
  std::vector<int> t(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) t[n] = y[n] == k ? 1 : -1;
  return t;
}

OvaFit train_ova(const Matrix& Z, const Labels& y, int K, const std::vector<double>& C, double tol,
                 int max_epochs, int threads, const std::vector<Vector>* warm) {
  require(K >= 2, "train_ova: need K >= 2");
  require(C.size() == 1 || C.size() == static_cast<std::size_t>(K), "train_ova: C must have 1 or K entries");
  require(static_cast<Eigen::Index>(y.size()) == Z.cols(), "train_ova: label count != points");
  std::vector<bool> seen(static_cast<std::size_t>(K), false);
  for (int label : y) {
    require(label >= 0 && label < K, "train_ova: label out of range");
    seen[static_cast<std::size_t>(label)] = true;
  }
  for (bool s : seen) require(s, "train_ova: every class must be present");

  OvaFit out;
  out.model.K = K;
  out.model.machines.resize(static_cast<std::size_t>(K));
  out.fits.resize(static_cast<std::size_t>(K));
  parallel_for(static_cast<std::size_t>(K), threads, [&](std::size_t k) {
    const SvmOptions opt{C.size() == 1 ? C.front() : C[k], tol, max_epochs};
    const Vector* start = warm != nullptr && warm->size() == static_cast<std::size_t>(K) ? &(*warm)[k] : nullptr;
    out.fits[k] = train_binary(Z, ova_targets(y, static_cast<int>(k)), opt, start);
    out.model.machines[k] = out.fits[k].svm;
  });
  return out;
}

OvaFit train_binary_mode(const Matrix& Z, const Labels& y, double C, double tol, int max_epochs,
                         const std::vector<Vector>* warm) {
  OvaFit out;
  out.model.K = 2;
  const Vector* start = warm != nullptr && warm->size() == 1 ? &warm->front() : nullptr;
  out.fits.push_back(train_binary(Z, ova_targets(y, 1), SvmOptions{C, tol, max_epochs}, start));
  out.model.machines.push_back(out.fits.front().svm);
  return out;
}

int argmax_first(const Eigen::Ref<const Vector>& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k)
    if (scores(k) > scores(best)) best = static_cast<int>(k);
  return best;
}

int predict(const OvaSvm& ova, const Eigen::Ref<const Vector>& z) {
  require(z.size() == ova.latent_dim(), "predict: latent dimension mismatch");
  return argmax_first(ova.scores(z));
}

Labels predict_all(const OvaSvm& ova, const Matrix& Z, int threads) {
  Labels out(static_cast<std::size_t>(Z.cols()));
  parallel_for(out.size(), threads, [&](std::size_t n) { out[n] = predict(ova, Z.col(static_cast<Eigen::Index>(n))); });
  return out;
}

}  // namespace macsvm
