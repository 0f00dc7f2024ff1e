#include "wtraffic/detect.hpp"

#include <cmath>

#include "wtraffic/pca.hpp"
#include "wtraffic/phase.hpp"

namespace wtraffic {

std::string_view to_string(Centering c) { return c == Centering::Mean ? "mean" : "median"; }

Centering parse_centering(std::string_view name) {
  if (name == "mean") return Centering::Mean;
  if (name == "median") return Centering::Median;
  throw DomainError("unknown centering '" + std::string(name) + "'");
}

std::string_view to_string(PhaseReduction r) {
  switch (r) {
    case PhaseReduction::Mean: return "mean";
    case PhaseReduction::SingleSubcarrier: return "single-subcarrier";
    case PhaseReduction::FirstPca: return "first-pca";
  }
  throw DomainError("unknown phase reduction");
}

PhaseReduction parse_phase_reduction(std::string_view name) {
  if (name == "mean") return PhaseReduction::Mean;
  if (name == "single-subcarrier") return PhaseReduction::SingleSubcarrier;
  if (name == "first-pca") return PhaseReduction::FirstPca;
  throw DomainError("unknown phase reduction '" + std::string(name) + "'");
}

void validate(const DetectorParams& params) {
  if (!(params.mad_multiplier > 0.0)) throw DomainError("MAD multiplier must be positive");
  if (params.omega < 1) throw DomainError("omega must be at least 1");
  if (params.delta1 < 1 || params.delta2 < 1) throw DomainError("delta1 and delta2 must be positive");
  if (params.phase_subcarrier >= kSubcarriers) throw DomainError("phase subcarrier out of range");
}

std::vector<bool> detect_outliers(const Eigen::Ref<const Eigen::VectorXd>& series,
                                  double mad_multiplier, Centering centering) {
  if (series.size() == 0) throw DomainError("outlier detection on an empty series");
  const double spread = scaled_mad(series);
  if (!std::isfinite(spread)) throw DomainError("scaled MAD is not finite");
  const double centre = centering == Centering::Mean ? series.mean() : median(series);
  const double threshold = mad_multiplier * spread;
  std::vector<bool> mask(static_cast<std::size_t>(series.size()));
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    mask[static_cast<std::size_t>(i)] = std::abs(series(i) - centre) > threshold;
  }
  return mask;
}

std::vector<IndexWindow> extract_windows(const std::vector<bool>& mask,
                                         const DetectorParams& params) {
  validate(params);
  const std::size_t n = mask.size();
  std::vector<IndexWindow> windows;
  bool in_run = false;
  std::size_t s = 0, f = 0;
  auto close_run = [&] {
    in_run = false;
    if (f - s + 1 < params.omega) return;
    // Signed guard: s - delta1 > 0 and f + delta2 < N.
    if (s > params.delta1 && f + params.delta2 < n) {
      windows.push_back({s - params.delta1, f + params.delta2});
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] && !in_run) {
      s = f = i;
      in_run = true;
    } else if (mask[i] && in_run) {
      f = i;
    } else if (!mask[i] && in_run) {
      close_run();
    }
  }
  // A run still open at the end of the scan is never terminated and so never stored.
  return windows;
}

Eigen::VectorXd reduce_phase(const Eigen::MatrixXd& sanitized, PhaseReduction reduction,
                             std::size_t subcarrier) {
  switch (reduction) {
    case PhaseReduction::Mean:
      return sanitized.rowwise().mean();
    case PhaseReduction::SingleSubcarrier:
      if (subcarrier >= static_cast<std::size_t>(sanitized.cols())) {
        throw IndexError("phase subcarrier out of range");
      }
      return sanitized.col(static_cast<Eigen::Index>(subcarrier));
    case PhaseReduction::FirstPca:
      if (sanitized.rows() < 2) return Eigen::VectorXd::Zero(sanitized.rows());
      return pca_denoise(sanitized, 1).stream();
  }
  throw DomainError("unknown phase reduction");
}

PhaseRowSource trace_phase_source(const CsiTrace& trace, const DetectorParams& params) {
  return [&trace, params](std::size_t pair, std::size_t begin, std::size_t end) {
    const auto raw = extract_phase(trace, pair, begin, end + 1);
    return reduce_phase(sanitize_phase_matrix(raw), params.phase_reduction,
                        params.phase_subcarrier);
  };
}

std::vector<DetectionEvent> extract_events(std::span<const Eigen::VectorXd> amplitude_streams,
                                           const PhaseRowSource& phase_rows,
                                           const DetectorParams& params) {
  validate(params);
  if (amplitude_streams.empty()) throw ShapeError("no amplitude streams");
  if (params.detection_pair >= amplitude_streams.size()) {
    throw IndexError("detection pair out of range");
  }
  const Eigen::Index n = amplitude_streams.front().size();
  for (const auto& s : amplitude_streams) {
    if (s.size() != n) throw ShapeError("amplitude streams differ in length");
  }
  const auto& detection = amplitude_streams[params.detection_pair];
  const auto mask = detect_outliers(detection, params.mad_multiplier, params.centering);
  const auto windows = extract_windows(mask, params);
  const double baseline = detection.mean();

  const auto n_pairs = static_cast<Eigen::Index>(amplitude_streams.size());
  std::vector<DetectionEvent> events;
  events.reserve(windows.size());
  for (const auto& w : windows) {
    DetectionEvent e;
    e.start_index = w.start;
    e.end_index = w.end;
    e.baseline_mean = baseline;
    const auto len = static_cast<Eigen::Index>(w.length());
    e.amplitude_rows.resize(n_pairs, len);
    e.phase_rows.resize(n_pairs, len);
    for (Eigen::Index p = 0; p < n_pairs; ++p) {
      e.amplitude_rows.row(p) =
          amplitude_streams[static_cast<std::size_t>(p)].segment(static_cast<Eigen::Index>(w.start), len).transpose();
      const auto phase = phase_rows(static_cast<std::size_t>(p), w.start, w.end);
      if (phase.size() != len) throw ShapeError("phase row length does not match the window");
      e.phase_rows.row(p) = phase.transpose();
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<DetectionEvent> extract_events(std::span<const Eigen::VectorXd> amplitude_streams,
                                           std::span<const Eigen::VectorXd> phase_rows,
                                           const DetectorParams& params) {
  if (phase_rows.size() != amplitude_streams.size()) {
    throw ShapeError("phase and amplitude pair counts differ");
  }
  for (const auto& p : phase_rows) {
    if (amplitude_streams.empty() || p.size() != amplitude_streams.front().size()) {
      throw ShapeError("phase rows differ in length from the amplitude streams");
    }
  }
  return extract_events(
      amplitude_streams,
      [phase_rows](std::size_t pair, std::size_t begin, std::size_t end) -> Eigen::VectorXd {
        return phase_rows[pair].segment(static_cast<Eigen::Index>(begin),
                                        static_cast<Eigen::Index>(end - begin + 1));
      },
      params);
}

}  // namespace wtraffic
