#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/cnn.hpp"
#include "wtraffic/detect.hpp"
#include "wtraffic/eval.hpp"
#include "wtraffic/filter.hpp"
#include "wtraffic/pca.hpp"

namespace wtraffic {

/// A failure inside one pipeline stage; the message names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PreprocessConfig {
  FilterSpec filter;
  int pca_k = 1;
};

struct PreprocessedPair {
  PcaResult pca;  ///< over the filtered N x 30 amplitudes of one pair
};

/// Amplitude extraction, filtering and PCA for every antenna pair.
std::vector<PreprocessedPair> preprocess_trace(const CsiTrace& trace, const PreprocessConfig& config);

struct PipelineConfig {
  PreprocessConfig preprocess;
  DetectorParams detector;
};

/// extract -> filter -> PCA -> detect, with phase rows sanitized over each window.
std::vector<DetectionEvent> detect_vehicles(const CsiTrace& trace, const PipelineConfig& config,
                                            const std::string& trace_id = {});

/// Copies lane and class from the ground-truth label each event matches.
void attach_labels(std::vector<DetectionEvent>& events, std::span<const GroundTruthLabel> labels);

/// Full chain through form_image and cnn_forward. With several models the
/// prediction is their max-probability fusion.
std::vector<ClassifiedEvent> classify_events(std::span<const DetectionEvent> events,
                                             std::span<const CnnModel> models);

std::vector<ClassifiedEvent> run_pipeline(const CsiTrace& trace, std::span<const CnnModel> models,
                                          const PipelineConfig& config, const std::string& trace_id = {});

}  // namespace wtraffic
