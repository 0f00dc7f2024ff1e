#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "wtraffic/trace.hpp"

namespace wtraffic {

struct ScenarioEvent {
  double time_s = 0.0;  ///< burst onset
  VehicleClass vehicle_class = VehicleClass::PassengerCar;
  int lane = 1;
  double speed_mps = 10.0;
};

struct Scenario {
  double duration_s = 60.0;
  double sample_rate_hz = 2500.0;
  std::vector<ScenarioEvent> events;
  double noise_sigma = 0.5;              ///< per-component complex noise std
  double slow_object_amplitude = 0.03;   ///< relative drift / interference amplitude
  std::uint64_t seed = 1;
  std::size_t n_pairs = 3;
};

/// Per-pair parameters of a passing-vehicle signature.
struct PairSignature {
  double depth = 0.0;          ///< fractional amplitude dip at full envelope
  double ripple_amp = 0.0;     ///< relative modulation of the dip
  double ripple_phase = 0.0;   ///< radians
  double phase_tilt = 0.0;     ///< radians of phase slope across the band at full envelope
};

struct SignatureTemplate {
  VehicleClass vehicle_class = VehicleClass::PassengerCar;
  double duration_s = 0.0;
  double ripple_hz = 0.0;
  double taper_fraction = 0.05;
  std::vector<PairSignature> pairs;

  /// Dip shape at normalised position u in [0, 1]: raised-cosine tapers around
  /// a flat top, modulated by the class ripple. Zero outside [0, 1].
  double envelope(double u, std::size_t pair) const;
};

/// Class table loaded from JSON (see data/vehicle_signatures.json).
struct SignatureTable {
  struct ClassEntry {
    double length_m = 4.5;
    double depth = 0.35;
    double ripple_cycles = 2.0;
    double ripple_amp = 0.1;
    std::vector<double> pair_gain;
    std::vector<double> pair_ripple_phase;
    std::vector<double> phase_tilt;
  };
  double zone_m = 7.0;
  double taper_fraction = 0.05;
  std::array<double, 2> lane_depth_factor = {1.0, 0.85};
  double depth_jitter = 0.0;
  std::array<ClassEntry, kNumClasses> classes;

  static SignatureTable from_json(std::string_view text);
  static SignatureTable load(const std::filesystem::path& path);
  /// The table compiled in from data/vehicle_signatures.json.
  static const SignatureTable& defaults();
};

/// Duration is (vehicle length + sensing zone) / speed; lane 1 dips deeper.
SignatureTemplate vehicle_signature(VehicleClass vehicle_class, double speed_mps, int lane,
                                    const SignatureTable& table = SignatureTable::defaults());

struct SyntheticTrace {
  CsiTrace trace;
  std::vector<GroundTruthLabel> labels;
};

/// Deterministic in the scenario (including its seed).
SyntheticTrace generate_trace(const Scenario& scenario,
                              const SignatureTable& table = SignatureTable::defaults());

/// Throws ScenarioError describing the first violated constraint.
void validate(const Scenario& scenario, const SignatureTable& table = SignatureTable::defaults());

/// Parameters for drawing a random, valid event layout.
struct RandomLayout {
  std::size_t count = 10;
  double speed_min_mps = 9.0;
  double speed_max_mps = 14.0;
  double gap_min_s = 5.0;
  double gap_max_s = 9.0;
  double lead_s = 2.0;
  double tail_s = 2.0;
  bool balanced_classes = true;  ///< count/5 of each class, shuffled
  double noise_sigma = 0.5;
  double slow_object_amplitude = 0.03;
  double sample_rate_hz = 2500.0;
  std::size_t n_pairs = 3;
};

Scenario make_random_scenario(const RandomLayout& layout, std::uint64_t seed,
                              const SignatureTable& table = SignatureTable::defaults());

/// Scenario JSON: either explicit "events" or a "random" layout block.
/// A provided seed overrides the file's.
Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario scenario_from_json(std::string_view text,
                            std::optional<std::uint64_t> seed_override = std::nullopt);

/// Intel 5300 grouped subcarrier indices for a 20 MHz channel.
inline constexpr std::array<int, kSubcarriers> kSubcarrierIndices = {
    -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1,
    1,   3,   5,   7,   9,   11,  13,  15,  17,  19,  21,  23, 25, 27, 28};

}  // namespace wtraffic
