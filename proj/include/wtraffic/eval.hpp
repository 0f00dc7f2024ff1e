#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/detect.hpp"

namespace wtraffic {

/// A detection window with its predicted class.
struct ClassifiedEvent {
  std::string trace_id;
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  VehicleClass predicted = VehicleClass::PassengerCar;
  Eigen::VectorXd probabilities;  ///< may be empty (e.g. kNN predictions)
  std::optional<int> lane;
};

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< (detection, label), by label
  std::vector<std::size_t> false_positives;                 ///< unmatched detections
  std::vector<std::size_t> misses;                          ///< unmatched labels
};

/// Greedy one-to-one matching of overlapping intervals: candidate pairs are
/// taken in order of decreasing overlap, then detection index, then label index.
Matching match_events(std::span<const IndexWindow> detected, std::span<const IndexWindow> truth);

struct LaneBreakdown {
  int lane = 1;
  std::size_t n_passing = 0;
  std::size_t n_detected = 0;
  std::size_t n_correct = 0;  ///< five-class
  double detection_accuracy = 0.0;
  double classification_accuracy = 0.0;
  friend bool operator==(const LaneBreakdown&, const LaneBreakdown&) = default;
};

struct RepeatSummary {
  std::size_t repeats = 0;
  double fraction = 0.3;
  std::uint64_t seed = 1;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const RepeatSummary&, const RepeatSummary&) = default;
};

using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct EvalReport {
  GroupingScheme scheme = GroupingScheme::Five;
  std::size_t n_passing = 0;
  std::size_t n_detected = 0;
  std::size_t n_false_positive = 0;
  double detection_accuracy = 0.0;
  double classification_accuracy = 0.0;  ///< under `scheme`
  std::map<std::string, double> scheme_accuracy;  ///< every grouping scheme
  ConfusionMatrix confusion{};  ///< [true class][predicted class], five-class
  std::vector<LaneBreakdown> lanes;
  std::optional<RepeatSummary> repeat;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Truth keyed by trace id; predictions are matched within their own trace.
using TruthSet = std::map<std::string, std::vector<GroundTruthLabel>>;

EvalReport evaluate(std::span<const ClassifiedEvent> predictions, const TruthSet& truth,
                    GroupingScheme scheme);

/// Accuracy over `repeats` random draws of `fraction` of the detected vehicles.
RepeatSummary repeat_accuracy(std::span<const ClassifiedEvent> predictions, const TruthSet& truth,
                              GroupingScheme scheme, std::size_t repeats, double fraction,
                              std::uint64_t seed);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// Prediction files: one JSON object per line.
void save_predictions(std::span<const ClassifiedEvent> predictions, const std::filesystem::path& path);
std::vector<ClassifiedEvent> load_predictions(const std::filesystem::path& path);

}  // namespace wtraffic
