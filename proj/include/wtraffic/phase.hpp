#pragma once

#include <Eigen/Core>

#include "wtraffic/trace.hpp"

namespace wtraffic {

/// Removes 2*pi jumps along a row: whenever successive entries differ by more
/// than pi, a multiple of 2*pi is added to all later entries.
Eigen::VectorXd unwrap_phase(const Eigen::Ref<const Eigen::VectorXd>& row);

/// The linear offset-removal transform on a length-F row (subcarriers f = 1..F):
///   e1 = (phi_F - phi_1) / (2 pi F),  e2 = mean(phi),  out_f = phi_f - e1 f - e2.
/// Evaluated relative to phi_1, so adding a constant to every input leaves the
/// output bit-identical whenever the addition itself is exact.
Eigen::VectorXd linear_phase_transform(const Eigen::Ref<const Eigen::VectorXd>& row);

/// Unwraps a 30-entry measured phase row, then applies linear_phase_transform.
Eigen::VectorXd sanitize_phase(const Eigen::Ref<const Eigen::VectorXd>& measured);

/// sanitize_phase applied to every packet (row) independently.
Eigen::MatrixXd sanitize_phase_matrix(const PhaseMatrix& phases);

}  // namespace wtraffic
