#include "wtraffic/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "wtraffic/types.hpp"

namespace wtraffic {

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tolerance,
                            int max_sweeps) {
  if (symmetric.rows() != symmetric.cols()) throw ShapeError("eigendecomposition needs a square matrix");
  const Eigen::Index n = symmetric.rows();
  Eigen::MatrixXd a = 0.5 * (symmetric + symmetric.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double limit = tolerance * a.norm();

  auto max_off = [&] {
    double m = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < j; ++i) m = std::max(m, std::abs(a(i, j)));
    return m;
  };

  int sweep = 0;
  while (sweep < max_sweeps && max_off() > limit) {
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that annihilates a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
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
  if (max_off() > limit) {
    throw DomainError("Jacobi eigensolver did not converge in " + std::to_string(max_sweeps) +
                      " sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  out.sweeps = sweep;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    Eigen::VectorXd col = v.col(src);
    Eigen::Index largest = 0;
    col.cwiseAbs().maxCoeff(&largest);
    if (col(largest) < 0) col = -col;
    out.vectors.col(i) = col;
  }
  return out;
}

Eigen::MatrixXd PcaResult::reconstruct() const {
  Eigen::MatrixXd x = projected * components.transpose();
  x.rowwise() += column_means.transpose();
  return x;
}

PcaResult pca_denoise(const Eigen::MatrixXd& amplitudes, int k) {
  const Eigen::Index cols = amplitudes.cols();
  if (k < 1 || k > cols) {
    throw DomainError("PCA component count " + std::to_string(k) + " outside [1, " +
                      std::to_string(cols) + "]");
  }
  if (amplitudes.rows() < 2) throw DegenerateInputError("PCA needs at least two packets");

  PcaResult r;
  r.column_means = amplitudes.colwise().mean().transpose();
  Eigen::MatrixXd centered = amplitudes.rowwise() - r.column_means.transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(cols, cols);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  cov = cov.selfadjointView<Eigen::Lower>();

  const auto eig = jacobi_eigen(cov);
  r.components = eig.vectors.leftCols(k);
  r.eigenvalues = eig.values.head(k);
  // Null directions of a PSD matrix can come back as tiny negatives.
  const double floor = 1e-12 * std::max(cov.trace(), 0.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (r.eigenvalues(i) < 0.0 && -r.eigenvalues(i) <= floor) r.eigenvalues(i) = 0.0;
  }
  r.projected = centered * r.components;
  return r;
}

}  // namespace wtraffic
