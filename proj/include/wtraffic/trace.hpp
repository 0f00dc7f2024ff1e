#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/types.hpp"

namespace wtraffic {

/// Packet-indexed CSI tensor, laid out packet-major, then antenna pair, then
/// subcarrier. Samples are held at the on-disk precision (32-bit components);
/// everything derived from them is computed in double.
class CsiTrace {
 public:
  using Sample = std::complex<float>;

  CsiTrace(std::size_t n_packets, std::size_t n_pairs, double sample_rate_hz,
           std::vector<Sample> values);

  std::size_t n_packets() const noexcept { return n_packets_; }
  std::size_t n_pairs() const noexcept { return n_pairs_; }
  std::size_t n_sub() const noexcept { return kSubcarriers; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }

  std::span<const Sample> values() const noexcept { return values_; }

  const Sample& at(std::size_t packet, std::size_t pair, std::size_t sub) const {
    return values_[(packet * n_pairs_ + pair) * kSubcarriers + sub];
  }

  /// The 30 subcarrier samples of one packet on one antenna pair.
  std::span<const Sample> row(std::size_t packet, std::size_t pair) const {
    return std::span<const Sample>(values_).subspan(
        (packet * n_pairs_ + pair) * kSubcarriers, kSubcarriers);
  }

  friend bool operator==(const CsiTrace&, const CsiTrace&) = default;

 private:
  std::size_t n_packets_;
  std::size_t n_pairs_;
  double sample_rate_hz_;
  std::vector<Sample> values_;
};

/// N x 30 linear amplitudes, one column per subcarrier stream.
using AmplitudeMatrix = Eigen::MatrixXd;
/// N x 30 principal-value phases in (-pi, pi].
using PhaseMatrix = Eigen::MatrixXd;

struct GroundTruthLabel {
  int event_id = 0;
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  VehicleClass vehicle_class = VehicleClass::PassengerCar;
  int lane = 1;

  friend bool operator==(const GroundTruthLabel&, const GroundTruthLabel&) = default;
};

// Trace file: "CSI1" | u16 version | u32 n_packets | u8 n_pairs | u8 n_sub |
// f64 sample_rate_hz | (f32 re, f32 im) records. All little-endian.
inline constexpr std::size_t kTraceHeaderSize = 20;
inline constexpr std::uint16_t kTraceVersion = 1;

CsiTrace load_trace(const std::filesystem::path& path);
void save_trace(const CsiTrace& trace, const std::filesystem::path& path);

std::vector<GroundTruthLabel> load_labels(const std::filesystem::path& path);
void save_labels(std::span<const GroundTruthLabel> labels,
                 const std::filesystem::path& path);

AmplitudeMatrix extract_amplitude(const CsiTrace& trace, std::size_t pair);
PhaseMatrix extract_phase(const CsiTrace& trace, std::size_t pair);

/// Phases of packets [begin, end) only; same convention as extract_phase.
PhaseMatrix extract_phase(const CsiTrace& trace, std::size_t pair,
                          std::size_t begin, std::size_t end);

/// Principal-value argument, with zero magnitude mapped to 0 and -pi to pi.
inline double principal_phase(double re, double im) {
  if (re == 0.0 && im == 0.0) return 0.0;
  double a = std::atan2(im, re);
  return a == -std::numbers::pi ? std::numbers::pi : a;
}

}  // namespace wtraffic
