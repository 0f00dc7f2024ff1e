#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wtraffic/types.hpp"

namespace wtraffic {

enum class FilterMode { Lowpass, Highpass };

std::string_view to_string(FilterMode m);
FilterMode parse_filter_mode(std::string_view name);

/// Amplitude smoothing filter. The default cutoff corresponds to the Doppler
/// frequency of a 2 m/s mover at a 5.64 cm carrier wavelength (5.32 GHz).
struct FilterSpec {
  double cutoff_hz = 38.0;
  double sample_rate_hz = 2500.0;
  FilterMode mode = FilterMode::Lowpass;
  int order = 4;
};

void validate(const FilterSpec& spec);

/// One second-order section in transposed direct form II, a0 normalised to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Butterworth design by bilinear transform with prewarping; order must be even.
/// The corner is placed so the forward-backward cascade is -3 dB at cutoff_hz.
std::vector<Biquad> butterworth_sections(const FilterSpec& spec);

/// Number of reflected samples padded on each side before zero-phase filtering.
std::size_t filter_padding(const FilterSpec& spec);

/// Shortest series lowpass_filter accepts.
std::size_t filter_min_length(const FilterSpec& spec);

/// Single forward pass of the cascade from rest (no padding). Used to probe
/// the causal response.
Eigen::VectorXd sos_filter(const std::vector<Biquad>& sections,
                           const Eigen::Ref<const Eigen::VectorXd>& x);

/// Zero-phase (forward-backward) Butterworth filtering with odd reflection
/// padding and steady-state initial conditions. Output length equals input
/// length and a constant input passes unchanged through the lowpass.
Eigen::VectorXd lowpass_filter(const Eigen::Ref<const Eigen::VectorXd>& series,
                               const FilterSpec& spec);

/// Applies lowpass_filter to every column in place.
void filter_columns(Eigen::Ref<Eigen::MatrixXd> columns, const FilterSpec& spec);

}  // namespace wtraffic
