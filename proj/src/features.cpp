#include "macsvm/features.hpp"

#include <cmath>
#include <limits>

#include "macsvm/rng.hpp"

namespace macsvm {

namespace {

constexpr std::uint64_t kKMeansStream = 0x4b4d;  // "KM"

double sq_dist(const Matrix& A, Eigen::Index i, const Matrix& B, Eigen::Index j) {
  return (A.row(i) - B.row(j)).squaredNorm();
}

// Nearest centre and its squared distance for every row; ties go to the lower
// centre index.
void assign(const Matrix& X, const Matrix& C, Labels& owner, std::vector<double>& dist, int threads) {
  const auto n = static_cast<std::size_t>(X.rows());
  owner.resize(n);
  dist.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index m = 0; m < C.rows(); ++m) {
      const double d = sq_dist(X, r, C, m);
      if (d < best) {
        best = d;
        arg = static_cast<int>(m);
      }
    }
    owner[i] = arg;
    dist[i] = best;
  });
}

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

KMeansResult kmeans_centers(const Matrix& X, int M, int max_iter, std::uint64_t seed, int threads) {
  require(M >= 1, "kmeans: M must be >= 1");
  require(M <= X.rows(), "kmeans: M must not exceed the number of points");
  require(max_iter >= 0, "kmeans: max_iter must be >= 0");
  require(X.allFinite(), "kmeans: non-finite input");

  const Eigen::Index n = X.rows();
  CounterRng rng(CounterRng::substream(seed, kKMeansStream));
  KMeansResult out;
  Matrix& C = out.centers.C;
  C.resize(M, X.cols());

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  Eigen::Index pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  for (int m = 0; m < M; ++m) {
    if (m > 0) {
      const double total = ordered_sum(d2);
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += d2[static_cast<std::size_t>(i)];
          if (d2[static_cast<std::size_t>(i)] > 0.0 && acc > target) {
            pick = i;
            break;
          }
        }
        if (pick < 0) {  // rounding at the tail
          for (Eigen::Index i = n - 1; i >= 0; --i)
            if (d2[static_cast<std::size_t>(i)] > 0.0) {
              pick = i;
              break;
            }
        }
      } else {
        // All remaining points coincide with a centre: take the first unused row.
        pick = 0;
        while (chosen[static_cast<std::size_t>(pick)]) ++pick;
      }
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    C.row(m) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(X, i, C, m));
  }

  std::vector<double> dist;
  assign(X, C, out.assignment, dist, threads);
  out.sse_trace.push_back(ordered_sum(dist));

  for (int it = 0; it < max_iter; ++it) {
    Matrix sums = Matrix::Zero(M, X.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(M), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int m = out.assignment[static_cast<std::size_t>(i)];
      sums.row(m) += X.row(i);
      ++counts[static_cast<std::size_t>(m)];
    }
    Matrix next = C;
    std::vector<double> residual = dist;
    for (int m = 0; m < M; ++m) {
      if (counts[static_cast<std::size_t>(m)] > 0) {
        next.row(m) = sums.row(m) / static_cast<double>(counts[static_cast<std::size_t>(m)]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i)
        if (residual[static_cast<std::size_t>(i)] > residual[static_cast<std::size_t>(far)]) far = i;
      next.row(m) = X.row(far);
      residual[static_cast<std::size_t>(far)] = 0.0;
    }
    C = next;
    Labels previous = out.assignment;
    assign(X, C, out.assignment, dist, threads);
    out.sse_trace.push_back(ordered_sum(dist));
    out.iterations = it + 1;
    if (out.assignment == previous) break;
  }
  return out;
}

double kmeans_objective(const Matrix& X, const Matrix& C) {
  Labels owner;
  std::vector<double> dist;
  assign(X, C, owner, dist, 1);
  return ordered_sum(dist);
}

double median_center_distance(const Matrix& C) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = i + 1; j < C.rows(); ++j) d.push_back(std::sqrt(sq_dist(C, i, C, j)));
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med > 0.0 ? med : 1.0;
}

Matrix rbf_design_matrix(const Matrix& X, const RbfCenters& centers, int threads) {
  require(centers.sigma > 0.0 && std::isfinite(centers.sigma), "rbf_design_matrix: sigma must be > 0");
  require(X.cols() == centers.C.cols(), "rbf_design_matrix: dimension mismatch");
  const Eigen::Index M = centers.C.rows();
  Matrix Phi(M, X.rows());
  const double inv = 1.0 / (2.0 * centers.sigma * centers.sigma);
  parallel_for(static_cast<std::size_t>(X.rows()), threads, [&](std::size_t i) {
    const auto n = static_cast<Eigen::Index>(i);
    for (Eigen::Index m = 0; m < M; ++m) Phi(m, n) = std::exp(-sq_dist(X, n, centers.C, m) * inv);
  });
  return Phi;
}

Matrix FeatureMap::design(const Matrix& X, int threads) const {
  if (linear) return X.transpose();
  return rbf_design_matrix(X, centers, threads);
}

Matrix map_latent(const Matrix& W, const Matrix& Phi, int threads) {
  require(W.cols() == Phi.rows(), "map_latent: W has " + std::to_string(W.cols()) +
                                      " columns but Phi has " + std::to_string(Phi.rows()) + " rows");
  Matrix Z(W.rows(), Phi.cols());
  parallel_for(static_cast<std::size_t>(Phi.cols()), threads, [&](std::size_t i) {
    const auto n = static_cast<Eigen::Index>(i);
    Z.col(n).noalias() = W * Phi.col(n);
  });
  return Z;
}

}  // namespace macsvm
