#include "macsvm/baselines.hpp"

#include <cmath>
#include <numeric>

namespace macsvm {

SymmetricEigen jacobi_eigen(const Matrix& A, double tol, int max_sweeps) {
  require(A.rows() == A.cols(), "jacobi_eigen: matrix must be square");
  const Eigen::Index n = A.rows();
  Matrix a = 0.5 * (A + A.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double total = std::max(a.norm(), 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol * total) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

PcaModel pca_fit(const Matrix& X, int L) {
  const Eigen::Index N = X.rows(), D = X.cols();
  require(L >= 1 && L <= std::min(N, D), "pca_fit: L must be in [1, min(N, D)]");
  require(X.allFinite(), "pca_fit: non-finite input");
  PcaModel model;
  model.mean = X.colwise().mean().transpose();
  const Matrix Xc = X.rowwise() - model.mean.transpose();
  model.components.resize(L, D);
  model.explained_variance.resize(L);

  if (D <= N) {
    const Matrix cov = Xc.transpose() * Xc / static_cast<double>(N);
    const SymmetricEigen eig = jacobi_eigen(cov);
    for (int l = 0; l < L; ++l) {
      model.components.row(l) = eig.vectors.col(l).transpose();
      model.explained_variance(l) = std::max(0.0, eig.values(l));
    }
    return model;
  }

  // Dual form: Xc^T u / |Xc^T u| for eigenvectors u of the Gram matrix.
  const Matrix gram = Xc * Xc.transpose() / static_cast<double>(N);
  const SymmetricEigen eig = jacobi_eigen(gram);
  for (int l = 0; l < L; ++l) {
    Vector dir = Xc.transpose() * eig.vectors.col(l);
    for (int j = 0; j < l; ++j) dir -= model.components.row(j).dot(dir) * model.components.row(j).transpose();
    double norm = dir.norm();
    // Null directions: complete the basis from the coordinate axes.
    for (Eigen::Index axis = 0; norm < 1e-12 && axis < D; ++axis) {
      dir = Vector::Unit(D, axis);
      for (int j = 0; j < l; ++j) dir -= model.components.row(j).dot(dir) * model.components.row(j).transpose();
      norm = dir.norm();
    }
    model.components.row(l) = (dir / norm).transpose();
    model.explained_variance(l) = std::max(0.0, eig.values(l));
  }
  return model;
}

Matrix pca_project(const PcaModel& model, const Matrix& X) {
  require(X.cols() == model.mean.size(), "pca_project: dimension mismatch");
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Labels nn_classify(const Dataset& train, const Matrix& queries, int threads) {
  require(train.size() >= 1, "nn_classify: empty training set");
  require(queries.cols() == train.dim(), "nn_classify: dimension mismatch");
  Labels out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto q = queries.row(static_cast<Eigen::Index>(i));
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index n = 0; n < train.X.rows(); ++n) {
      const double d = (train.X.row(n) - q).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(n);
      }
    }
    out[i] = train.y[arg];
  });
  return out;
}

double within_class_scatter(const Matrix& Z, const Labels& y) {
  require(static_cast<Eigen::Index>(y.size()) == Z.cols(), "within_class_scatter: label count != points");
  if (y.empty()) return 0.0;
  const int K = *std::max_element(y.begin(), y.end()) + 1;
  Matrix means = Matrix::Zero(Z.rows(), K);
  std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
  for (std::size_t n = 0; n < y.size(); ++n) {
    require(y[n] >= 0, "within_class_scatter: negative label");
    means.col(y[n]) += Z.col(static_cast<Eigen::Index>(n));
    counts[static_cast<std::size_t>(y[n])] += 1.0;
  }
  for (int k = 0; k < K; ++k)
    if (counts[static_cast<std::size_t>(k)] > 0) means.col(k) /= counts[static_cast<std::size_t>(k)];
  double total = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) total += (Z.col(static_cast<Eigen::Index>(n)) - means.col(y[n])).squaredNorm();
  return total / static_cast<double>(y.size());
}

double error_rate(const Labels& pred, const Labels& truth) {
  require(pred.size() == truth.size(), "error_rate: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                           std::to_string(truth.size()) + ")");
  if (pred.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

OvaSvm input_svm(const Dataset& train, double C, double tol, int max_epochs, int threads) {
  train.validate();
  const Matrix Z = train.X.transpose();
  if (train.K == 2) return train_binary_mode(Z, train.y, C, tol, max_epochs).model;
  return train_ova(Z, train.y, train.K, {C}, tol, max_epochs, threads).model;
}

}  // namespace macsvm
