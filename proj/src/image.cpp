#include "wtraffic/image.hpp"

#include <cmath>

namespace wtraffic {

Eigen::VectorXd resample_linear(const Eigen::Ref<const Eigen::VectorXd>& row, Eigen::Index length) {
  const Eigen::Index n = row.size();
  if (n < 2) throw DegenerateInputError("resampling needs at least 2 samples");
  if (length < 2) throw DomainError("resampled length must be at least 2");
  if (n == length) return row;
  Eigen::VectorXd out(length);
  const Eigen::Index span = length - 1;
  for (Eigen::Index i = 0; i < length; ++i) {
    // Source position i * (n - 1) / (length - 1), split into exact integer parts.
    const Eigen::Index num = i * (n - 1);
    const Eigen::Index k = num / span;
    const Eigen::Index rem = num % span;
    if (rem == 0) {
      out(i) = row(k);
    } else {
      const double f = static_cast<double>(rem) / static_cast<double>(span);
      out(i) = row(k) + f * (row(k + 1) - row(k));
    }
  }
  return out;
}

ClassifierImage form_image(const DetectionEvent& event, Eigen::Index window) {
  if (event.amplitude_rows.rows() != kImagePairs || event.phase_rows.rows() != kImagePairs) {
    throw ShapeError("classifier image needs 3 amplitude and 3 phase rows");
  }
  if (event.amplitude_rows.cols() != event.phase_rows.cols()) {
    throw ShapeError("amplitude and phase rows differ in length");
  }
  if (event.amplitude_rows.cols() < 2) throw DegenerateInputError("event shorter than 2 samples");

  ClassifierImage image;
  image.pixels.resize(kImageRows, window);
  for (Eigen::Index r = 0; r < kImageRows; ++r) {
    const Eigen::VectorXd src = r < kImagePairs ? event.amplitude_rows.row(r).transpose()
                                                : event.phase_rows.row(r - kImagePairs).transpose();
    if (!src.allFinite()) throw DomainError("event row contains non-finite values");
    Eigen::VectorXd row = resample_linear(src, window);
    const double mean = row.mean();
    row.array() -= mean;
    const double sd = std::sqrt(row.squaredNorm() / static_cast<double>(window));
    auto& meta = image.normalization[static_cast<std::size_t>(r)];
    meta.offset = mean;
    if (sd > 0.0 && sd > 1e-12 * std::abs(mean)) {
      meta.scale = sd;
      image.pixels.row(r) = (row / sd).transpose();
    } else {
      meta.scale = 0.0;
      image.pixels.row(r).setZero();
    }
  }
  return image;
}

}  // namespace wtraffic
