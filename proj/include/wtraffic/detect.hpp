#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/stats.hpp"
#include "wtraffic/trace.hpp"

namespace wtraffic {

/// Reference level the outlier rule measures deviations from.
enum class Centering { Mean, Median };

/// How the 30 sanitized subcarrier phases of a packet collapse to one value.
enum class PhaseReduction { Mean, SingleSubcarrier, FirstPca };

std::string_view to_string(Centering c);
Centering parse_centering(std::string_view name);
std::string_view to_string(PhaseReduction r);
PhaseReduction parse_phase_reduction(std::string_view name);

struct DetectorParams {
  double mad_multiplier = 3.0;
  std::size_t omega = 1250;   ///< minimum outlier-run length (0.5 s at 2500 Hz)
  std::size_t delta1 = 500;   ///< samples kept before the run
  std::size_t delta2 = 500;   ///< samples kept after the run
  std::size_t detection_pair = 0;
  Centering centering = Centering::Mean;
  PhaseReduction phase_reduction = PhaseReduction::Mean;
  std::size_t phase_subcarrier = 0;  ///< used by PhaseReduction::SingleSubcarrier
};

void validate(const DetectorParams& params);

/// Inclusive packet-index interval.
struct IndexWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const IndexWindow&, const IndexWindow&) = default;
};

struct DetectionEvent {
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  /// n_pairs x L, one denoised amplitude segment per antenna pair.
  Eigen::MatrixXd amplitude_rows;
  /// n_pairs x L, one reduced sanitized-phase segment per antenna pair.
  Eigen::MatrixXd phase_rows;
  double sample_rate_hz = 2500.0;
  /// Mean of the detection stream over the whole trace.
  double baseline_mean = 0.0;
  std::optional<int> lane;
  std::optional<VehicleClass> vehicle_class;
  std::string trace_id;

  std::size_t length() const noexcept { return end_index - start_index + 1; }
};

/// mask[i] = |a_i - centre| > multiplier * scaled_mad(a).
std::vector<bool> detect_outliers(const Eigen::Ref<const Eigen::VectorXd>& series,
                                  double mad_multiplier = 3.0,
                                  Centering centering = Centering::Mean);

/// Scans the outlier mask for maximal runs [s, f]. A run of length >= omega
/// whose padded window [s - delta1, f + delta2] passes s - delta1 > 0 and
/// f + delta2 < N yields that window. The in-progress run is reset on every
/// termination, so short runs never merge into later ones.
std::vector<IndexWindow> extract_windows(const std::vector<bool>& mask,
                                         const DetectorParams& params);

/// Supplies the reduced phase row of one pair for packets [begin, end].
using PhaseRowSource =
    std::function<Eigen::VectorXd(std::size_t pair, std::size_t begin, std::size_t end)>;

/// Runs the outlier scan on the detection pair's stream and slices every pair's
/// amplitude stream and phase row over each window.
std::vector<DetectionEvent> extract_events(std::span<const Eigen::VectorXd> amplitude_streams,
                                           const PhaseRowSource& phase_rows,
                                           const DetectorParams& params);

/// Same, with the reduced phase rows supplied in full.
std::vector<DetectionEvent> extract_events(std::span<const Eigen::VectorXd> amplitude_streams,
                                           std::span<const Eigen::VectorXd> phase_rows,
                                           const DetectorParams& params);

/// Collapses an L x 30 sanitized phase block to one value per packet.
Eigen::VectorXd reduce_phase(const Eigen::MatrixXd& sanitized, PhaseReduction reduction,
                             std::size_t subcarrier = 0);

/// Phase row source that sanitizes packets of `trace` on demand.
PhaseRowSource trace_phase_source(const CsiTrace& trace, const DetectorParams& params);

// Event files: one JSON object per line plus a sidecar "<path>.bin" holding, for
// each event in order, each pair's L (amplitude f32, phase f32) records.
void save_events(std::span<const DetectionEvent> events, const std::filesystem::path& path);
std::vector<DetectionEvent> load_events(const std::filesystem::path& path);
std::filesystem::path event_sidecar_path(const std::filesystem::path& path);

}  // namespace wtraffic
