#include "wtraffic/baseline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "wtraffic/stats.hpp"

namespace wtraffic {

Eigen::Matrix<double, FeatureVector::kSize, 1> FeatureVector::as_vector() const {
  return {normalized_std, signal_strength_offset, motion_period, mad, iqr};
}

FeatureVector extract_baseline_features(const DetectionEvent& event) {
  if (event.amplitude_rows.rows() < 1) throw ShapeError("event has no amplitude rows");
  const Eigen::VectorXd row = event.amplitude_rows.row(0).transpose();
  if (row.size() < 4) throw DegenerateInputError("baseline features need at least 4 samples");
  if (!(event.sample_rate_hz > 0.0)) throw DomainError("event sample rate must be positive");
  const double mean = row.mean();
  const double magnitude = row.cwiseAbs().mean();
  if (magnitude == 0.0) throw DegenerateInputError("event row has zero mean magnitude");
  const double sd = std::sqrt((row.array() - mean).square().mean());
  FeatureVector f;
  f.normalized_std = sd / magnitude;
  f.signal_strength_offset = mean - event.baseline_mean;
  f.motion_period = static_cast<double>(row.size()) / event.sample_rate_hz;
  f.mad = scaled_mad(row);
  f.iqr = quantile(row, 0.75) - quantile(row, 0.25);
  return f;
}

void KnnClassifier::fit(std::span<const FeatureVector> features, std::span<const VehicleClass> labels) {
  if (features.empty()) throw DataError("kNN needs a non-empty training set");
  if (features.size() != labels.size()) throw DataError("features and labels differ in count");
  const auto n = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd raw(FeatureVector::kSize, n);
  for (Eigen::Index i = 0; i < n; ++i) raw.col(i) = features[static_cast<std::size_t>(i)].as_vector();
  if (!raw.allFinite()) throw DataError("non-finite training feature");
  mean_ = raw.rowwise().mean();
  const Eigen::MatrixXd centred = raw.colwise() - mean_;
  scale_ = (centred.array().square().rowwise().sum() / static_cast<double>(n)).sqrt().matrix();
  for (Eigen::Index i = 0; i < scale_.size(); ++i) {
    if (!(scale_(i) > 0.0)) scale_(i) = 1.0;
  }
  points_ = scale_.cwiseInverse().asDiagonal() * centred;
  labels_.assign(labels.begin(), labels.end());
}

Eigen::VectorXd KnnClassifier::standardize(const FeatureVector& f) const {
  return (f.as_vector() - mean_).cwiseQuotient(scale_);
}

VehicleClass KnnClassifier::classify(const FeatureVector& query, std::size_t k) const {
  if (labels_.empty()) throw DataError("kNN classifier has no training data");
  if (k < 1 || k > labels_.size()) throw DomainError("k must be in [1, training size]");
  const Eigen::VectorXd q = standardize(query);
  const Eigen::VectorXd dist = (points_.colwise() - q).colwise().norm().transpose();
  std::vector<std::size_t> order(labels_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist(static_cast<Eigen::Index>(a)) < dist(static_cast<Eigen::Index>(b));
  });
  std::array<std::size_t, kNumClasses> votes{};
  std::array<double, kNumClasses> total{};
  for (std::size_t i = 0; i < k; ++i) {
    const auto c = static_cast<std::size_t>(ordinal(labels_[order[i]]));
    ++votes[c];
    total[c] += dist(static_cast<Eigen::Index>(order[i]));
  }
  std::size_t best = kNumClasses;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (votes[c] == 0) continue;
    if (best == kNumClasses || votes[c] > votes[best]) {
      best = c;
    } else if (votes[c] == votes[best]) {
      const double mc = total[c] / static_cast<double>(votes[c]);
      const double mb = total[best] / static_cast<double>(votes[best]);
      if (mc < mb) best = c;
    }
  }
  return class_from_ordinal(static_cast<int>(best));
}

}  // namespace wtraffic
