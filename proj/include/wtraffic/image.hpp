#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Core>

#include "wtraffic/detect.hpp"

namespace wtraffic {

inline constexpr Eigen::Index kWindowSize = 2500;
inline constexpr Eigen::Index kImagePairs = 3;
inline constexpr Eigen::Index kImageRows = 2 * kImagePairs;

struct RowNormalization {
  double offset = 0.0;  ///< row mean before standardization
  double scale = 0.0;   ///< row standard deviation; 0 for a constant row
};

/// Rows 0-2: amplitude of pairs 0-2; rows 3-5: phase of pairs 0-2.
struct ClassifierImage {
  Eigen::MatrixXd pixels;
  std::array<RowNormalization, kImageRows> normalization{};
};

/// Linear interpolation of `row` onto `length` evenly spaced points spanning
/// the same interval; both end samples are kept.
Eigen::VectorXd resample_linear(const Eigen::Ref<const Eigen::VectorXd>& row, Eigen::Index length);

/// Resamples each row to `window` columns and standardizes it to zero mean and
/// unit (population) variance.
ClassifierImage form_image(const DetectionEvent& event, Eigen::Index window = kWindowSize);

}  // namespace wtraffic
