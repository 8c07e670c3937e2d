#pragma once
// Shared helpers and independent reference computations for the tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "macsvm/common.hpp"
#include "macsvm/linsvm.hpp"

namespace testing {

using macsvm::Matrix;
using macsvm::Vector;

inline Matrix random_matrix(std::mt19937_64& g, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(g);
  return m;
}

inline Vector random_vector(std::mt19937_64& g, Eigen::Index n, double sd = 1.0) {
  return random_matrix(g, n, 1, sd).col(0);
}

inline double log_uniform(std::mt19937_64& g, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(g));
}

/// Reference SplitMix64 generator (sequential state form).
struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

/// G = Phi Phi^T by explicit triple loop.
inline Matrix naive_gram(const Matrix& Phi) {
  Matrix G(Phi.rows(), Phi.rows());
  for (Eigen::Index i = 0; i < Phi.rows(); ++i)
    for (Eigen::Index j = 0; j < Phi.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index n = 0; n < Phi.cols(); ++n) s += Phi(i, n) * Phi(j, n);
      G(i, j) = s;
    }
  return G;
}

/// Central-difference gradient of f at W.
template <class F>
Matrix numeric_gradient(F&& f, const Matrix& W, double h = 1e-6) {
  Matrix grad(W.rows(), W.cols());
  Matrix P = W;
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      const double orig = P(i, j);
      P(i, j) = orig + h;
      const double up = f(P);
      P(i, j) = orig - h;
      const double down = f(P);
      P(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  return grad;
}

/// Exact hard-margin SVM with the bias folded in as a constant feature:
/// minimise |u|^2 / 2 subject to y_n u^T [z_n; 1] >= 1. The optimum is
/// supported on at most L + 1 points, so every support subset of that size
/// is tried: solve for multipliers making those margins exactly 1, keep the
/// candidates with non-negative multipliers that satisfy every constraint,
/// and return the smallest |u|^2 / 2. Returns NaN if nothing is feasible.
inline double hard_margin_oracle(const Matrix& Z, const std::vector<int>& y, Vector* u_out = nullptr) {
  const Eigen::Index L = Z.rows(), N = Z.cols(), d = L + 1;
  Matrix Q(d, N);
  Q.topRows(L) = Z;
  Q.row(L).setOnes();
  for (Eigen::Index n = 0; n < N; ++n) Q.col(n) *= y[static_cast<std::size_t>(n)];

  double best = std::numeric_limits<double>::quiet_NaN();
  std::vector<Eigen::Index> idx;
  auto visit = [&](auto&& self, Eigen::Index start) -> void {
    if (!idx.empty()) {
      const auto s = static_cast<Eigen::Index>(idx.size());
      Matrix Qs(d, s);
      for (Eigen::Index i = 0; i < s; ++i) Qs.col(i) = Q.col(idx[static_cast<std::size_t>(i)]);
      const Matrix K = Qs.transpose() * Qs;
      const Vector alpha = K.fullPivLu().solve(Vector::Ones(s));
      if (alpha.allFinite() && (K * alpha - Vector::Ones(s)).norm() < 1e-9 && alpha.minCoeff() >= -1e-12) {
        const Vector u = Qs * alpha;
        if ((Q.transpose() * u).minCoeff() >= 1.0 - 1e-9) {
          const double val = 0.5 * u.squaredNorm();
          if (!(val >= best)) {
            best = val;
            if (u_out != nullptr) *u_out = u;
          }
        }
      }
    }
    if (static_cast<Eigen::Index>(idx.size()) == d) return;
    for (Eigen::Index i = start; i < N; ++i) {
      idx.push_back(i);
      self(self, i + 1);
      idx.pop_back();
    }
  };
  visit(visit, 0);
  return best;
}

/// Nested objective written out term by term from its definition.
inline double nested_by_definition(double lambda, const Matrix& W, const macsvm::OvaSvm& svms,
                                   const std::vector<int>& y, const Matrix& Phi) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) total += lambda * W(i, j) * W(i, j);
  const bool binary = svms.binary_mode();
  for (std::size_t k = 0; k < svms.machines.size(); ++k) {
    const auto& m = svms.machines[k];
    double norm = m.b * m.b;
    for (Eigen::Index l = 0; l < m.w.size(); ++l) norm += m.w(l) * m.w(l);
    total += 0.5 * norm;
    const int positive = binary ? 1 : static_cast<int>(k);
    for (Eigen::Index n = 0; n < Phi.cols(); ++n) {
      double score = m.b;
      for (Eigen::Index l = 0; l < W.rows(); ++l) {
        double f = 0.0;
        for (Eigen::Index j = 0; j < W.cols(); ++j) f += W(l, j) * Phi(j, n);
        score += m.w(l) * f;
      }
      const int t = y[static_cast<std::size_t>(n)] == positive ? 1 : -1;
      total += m.C * std::max(0.0, 1.0 - t * score);
    }
  }
  return total;
}

/// Random per-point Z-step problem: K machines over L latent dimensions with
/// one-vs-all style targets (one +1, the rest -1) and penalties drawn
/// log-uniformly from [c_lo, c_hi].
struct ZInstance {
  Vector Fx;
  std::vector<macsvm::BinarySvm> machines;
  std::vector<int> targets;
  Vector c;
};

inline ZInstance random_z_instance(std::mt19937_64& g, int K, int L, double c_lo = 0.01, double c_hi = 100.0) {
  ZInstance inst;
  std::normal_distribution<double> nd(0.0, 1.0);
  inst.Fx = random_vector(g, L, 1.5);
  const int positive = std::uniform_int_distribution<int>(0, K - 1)(g);
  inst.c.resize(K);
  for (int k = 0; k < K; ++k) {
    macsvm::BinarySvm m;
    m.w = random_vector(g, L);
    m.b = nd(g);
    inst.machines.push_back(m);
    inst.targets.push_back(K == 1 ? (nd(g) > 0 ? 1 : -1) : (k == positive ? 1 : -1));
    inst.c(k) = log_uniform(g, c_lo, c_hi);
  }
  return inst;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("macsvm-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testing
