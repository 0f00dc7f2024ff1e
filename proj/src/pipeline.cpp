#include "wtraffic/pipeline.hpp"

#include "wtraffic/image.hpp"

namespace wtraffic {

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

std::vector<PreprocessedPair> preprocess_trace(const CsiTrace& trace, const PreprocessConfig& config) {
  std::vector<PreprocessedPair> out;
  out.reserve(trace.n_pairs());
  for (std::size_t p = 0; p < trace.n_pairs(); ++p) {
    AmplitudeMatrix a = stage("extract", [&] { return extract_amplitude(trace, p); });
    stage("filter", [&] { filter_columns(a, config.filter); });
    out.push_back({stage("pca", [&] { return pca_denoise(a, config.pca_k); })});
  }
  return out;
}

std::vector<DetectionEvent> detect_vehicles(const CsiTrace& trace, const PipelineConfig& config,
                                            const std::string& trace_id) {
  std::vector<Eigen::VectorXd> streams;
  for (auto& pair : preprocess_trace(trace, config.preprocess)) streams.push_back(pair.pca.stream());
  auto events = stage("detect", [&] {
    return extract_events(streams, trace_phase_source(trace, config.detector), config.detector);
  });
  for (auto& e : events) {
    e.sample_rate_hz = trace.sample_rate_hz();
    e.trace_id = trace_id;
  }
  return events;
}

void attach_labels(std::vector<DetectionEvent>& events, std::span<const GroundTruthLabel> labels) {
  std::vector<IndexWindow> det, tru;
  for (const auto& e : events) det.push_back({e.start_index, e.end_index});
  for (const auto& l : labels) tru.push_back({l.start_index, l.end_index});
  for (const auto& [d, l] : match_events(det, tru).pairs) {
    events[d].lane = labels[l].lane;
    events[d].vehicle_class = labels[l].vehicle_class;
  }
}

std::vector<ClassifiedEvent> classify_events(std::span<const DetectionEvent> events,
                                             std::span<const CnnModel> models) {
  if (models.empty()) throw DomainError("no classification model");
  std::vector<ClassifiedEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    const auto image = stage("form_image", [&] { return form_image(e); });
    std::vector<Eigen::VectorXd> probs;
    for (const auto& m : models) {
      probs.push_back(stage("classify", [&] { return cnn_forward(m, image); }));
    }
    ClassifiedEvent c;
    c.trace_id = e.trace_id;
    c.start_index = e.start_index;
    c.end_index = e.end_index;
    c.probabilities = fuse_max_probability(probs);
    c.predicted = predicted_class(c.probabilities);
    c.lane = e.lane;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ClassifiedEvent> run_pipeline(const CsiTrace& trace, std::span<const CnnModel> models,
                                          const PipelineConfig& config, const std::string& trace_id) {
  const auto events = detect_vehicles(trace, config, trace_id);
  return classify_events(events, models);
}

}  // namespace wtraffic
