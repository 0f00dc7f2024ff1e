#pragma once

#include <Eigen/Core>

namespace wtraffic {

struct SymmetricEigen {
  Eigen::VectorXd values;   ///< nonincreasing
  Eigen::MatrixXd vectors;  ///< column i pairs with values(i)
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Iterates until every
/// off-diagonal entry is below tolerance * ||S||_F. Each eigenvector is signed
/// so that its largest-magnitude entry is positive.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tolerance = 1e-12,
                            int max_sweeps = 100);

struct PcaResult {
  Eigen::MatrixXd components;    ///< n_cols x k, orthonormal columns
  Eigen::VectorXd eigenvalues;   ///< length k, nonincreasing
  Eigen::MatrixXd projected;     ///< N x k; column 0 is the denoised stream
  Eigen::VectorXd column_means;  ///< length n_cols

  /// First principal component stream.
  Eigen::VectorXd stream() const { return projected.col(0); }

  /// projected * components^T + means. Exact inverse when k == n_cols.
  Eigen::MatrixXd reconstruct() const;
};

/// Column-centres the N x 30 amplitude matrix, eigendecomposes H^T H and
/// projects onto the leading k eigenvectors.
PcaResult pca_denoise(const Eigen::MatrixXd& amplitudes, int k);

}  // namespace wtraffic
