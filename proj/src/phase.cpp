#include "wtraffic/phase.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wtraffic {

Eigen::VectorXd unwrap_phase(const Eigen::Ref<const Eigen::VectorXd>& row) {
  constexpr double pi = std::numbers::pi;
  Eigen::VectorXd out = row;
  double correction = 0.0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    const double d = row(i) - row(i - 1);
    if (d > pi) {
      correction -= 2.0 * pi * std::ceil((d - pi) / (2.0 * pi));
    } else if (d < -pi) {
      correction += 2.0 * pi * std::ceil((-d - pi) / (2.0 * pi));
    }
    out(i) = row(i) + correction;
  }
  return out;
}

Eigen::VectorXd linear_phase_transform(const Eigen::Ref<const Eigen::VectorXd>& row) {
  const Eigen::Index f_last = row.size();
  if (f_last < 2) throw ShapeError("phase row needs at least two subcarriers");
  Eigen::VectorXd rel = row.array() - row(0);
  const double e1 = rel(f_last - 1) / (2.0 * std::numbers::pi * static_cast<double>(f_last));
  const double e2 = rel.mean();
  Eigen::VectorXd out(f_last);
  for (Eigen::Index i = 0; i < f_last; ++i) {
    out(i) = rel(i) - e1 * static_cast<double>(i + 1) - e2;
  }
  return out;
}

Eigen::VectorXd sanitize_phase(const Eigen::Ref<const Eigen::VectorXd>& measured) {
  if (measured.size() != static_cast<Eigen::Index>(kSubcarriers)) {
    throw ShapeError("phase row must have 30 entries, got " + std::to_string(measured.size()));
  }
  if (!measured.allFinite()) throw DomainError("phase row contains a non-finite entry");
  Eigen::VectorXd rel = measured.array() - measured(0);
  return linear_phase_transform(unwrap_phase(rel));
}

Eigen::MatrixXd sanitize_phase_matrix(const PhaseMatrix& phases) {
  if (phases.cols() != static_cast<Eigen::Index>(kSubcarriers)) {
    throw ShapeError("phase matrix must have 30 columns");
  }
  Eigen::MatrixXd out(phases.rows(), phases.cols());
  for (Eigen::Index r = 0; r < phases.rows(); ++r) {
    out.row(r) = sanitize_phase(phases.row(r).transpose()).transpose();
  }
  return out;
}

}  // namespace wtraffic
