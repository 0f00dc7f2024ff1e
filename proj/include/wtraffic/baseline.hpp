#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/detect.hpp"

namespace wtraffic {

/// Hand-crafted features of the pair-0 amplitude row of an event.
struct FeatureVector {
  double normalized_std = 0.0;          ///< std / mean(|row|)
  double signal_strength_offset = 0.0;  ///< mean(row) - trace baseline mean
  double motion_period = 0.0;           ///< seconds
  double mad = 0.0;                     ///< scaled MAD
  double iqr = 0.0;                     ///< linear-interpolation quantiles

  static constexpr Eigen::Index kSize = 5;
  Eigen::Matrix<double, kSize, 1> as_vector() const;
};

FeatureVector extract_baseline_features(const DetectionEvent& event);

/// k-nearest-neighbour vote in z-scored feature space.
class KnnClassifier {
 public:
  /// Standardization uses the training mean and population deviation; a
  /// constant feature keeps unit scale.
  void fit(std::span<const FeatureVector> features, std::span<const VehicleClass> labels);

  /// Majority of the k nearest; ties go to the smallest mean distance, then the
  /// lowest class ordinal. Equal distances are ordered by training index.
  VehicleClass classify(const FeatureVector& query, std::size_t k) const;

  std::size_t size() const noexcept { return labels_.size(); }
  Eigen::VectorXd standardize(const FeatureVector& f) const;

 private:
  Eigen::MatrixXd points_;  ///< kSize x n, standardized
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  std::vector<VehicleClass> labels_;
};

}  // namespace wtraffic
