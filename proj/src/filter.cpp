#include "wtraffic/filter.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <string>

namespace wtraffic {

std::string_view to_string(FilterMode m) {
  return m == FilterMode::Lowpass ? "lowpass" : "highpass";
}

FilterMode parse_filter_mode(std::string_view name) {
  if (name == "lowpass") return FilterMode::Lowpass;
  if (name == "highpass") return FilterMode::Highpass;
  throw DomainError("unknown filter mode '" + std::string(name) + "'");
}

void validate(const FilterSpec& spec) {
  if (!(spec.sample_rate_hz > 0.0)) throw DomainError("filter sample rate must be positive");
  if (!(spec.cutoff_hz > 0.0 && spec.cutoff_hz < spec.sample_rate_hz / 2.0)) {
    throw DomainError("filter cutoff must lie in (0, sample_rate / 2)");
  }
  if (spec.order < 2 || spec.order % 2 != 0) {
    throw DomainError("filter order must be even and at least 2");
  }
}

std::vector<Biquad> butterworth_sections(const FilterSpec& spec) {
  validate(spec);
  // cutoff_hz is the -3 dB point of the forward-backward response, so each
  // pass sits at -1.5 dB there: |H|^2 = 1/sqrt(2) gives a corner shifted by
  // (sqrt(2) - 1)^(1/2n) in the prewarped domain.
  const double shift = std::pow(std::numbers::sqrt2 - 1.0, 1.0 / (2.0 * spec.order));
  const double warped = std::tan(std::numbers::pi * spec.cutoff_hz / spec.sample_rate_hz);
  const double k = spec.mode == FilterMode::Lowpass ? warped / shift : warped * shift;
  const double k2 = k * k;
  std::vector<Biquad> sections;
  for (int i = 0; i < spec.order / 2; ++i) {
    // Analog prototype s^2 + 2 zeta s + 1 for the i-th conjugate pole pair.
    const double zeta = std::sin(std::numbers::pi * (2 * i + 1) / (2.0 * spec.order));
    const double norm = 1.0 / (1.0 + 2.0 * zeta * k + k2);
    Biquad q{};
    if (spec.mode == FilterMode::Lowpass) {
      q.b0 = k2 * norm;
      q.b1 = 2.0 * q.b0;
      q.b2 = q.b0;
    } else {
      q.b0 = norm;
      q.b1 = -2.0 * norm;
      q.b2 = norm;
    }
    q.a1 = 2.0 * (k2 - 1.0) * norm;
    q.a2 = (1.0 - 2.0 * zeta * k + k2) * norm;
    sections.push_back(q);
  }
  return sections;
}

std::size_t filter_padding(const FilterSpec& spec) {
  return static_cast<std::size_t>(3 * (spec.order + 1));
}

std::size_t filter_min_length(const FilterSpec& spec) { return filter_padding(spec) + 1; }

namespace {

struct SectionState {
  double z1 = 0.0, z2 = 0.0;
};

// Steady-state states of each section for a unit step at the cascade input.
std::vector<SectionState> step_states(const std::vector<Biquad>& sections) {
  std::vector<SectionState> zi(sections.size());
  double input = 1.0;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& q = sections[i];
    const double gain = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double y = gain * input;
    zi[i].z1 = y - q.b0 * input;
    zi[i].z2 = q.b2 * input - q.a2 * y;
    input = y;
  }
  return zi;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Runs the cascade over m samples of c interleaved channels (row-major m x c),
// starting each section from its step state scaled by the channel's initial value.
void run_cascade(const std::vector<Biquad>& sections, const std::vector<SectionState>& zi,
                 const double* initial, double* data, std::size_t m, std::size_t c) {
  const std::size_t ns = sections.size();
  std::vector<double> state(2 * c * ns);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t j = 0; j < c; ++j) {
      state[2 * c * s + j] = zi[s].z1 * initial[j];
      state[2 * c * s + c + j] = zi[s].z2 * initial[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict row = data + i * c;
    for (std::size_t s = 0; s < ns; ++s) {
      const auto q = sections[s];
      double* __restrict z1 = state.data() + 2 * c * s;
      double* __restrict z2 = z1 + c;
      for (std::size_t j = 0; j < c; ++j) {
        const double x = row[j];
        const double y = q.b0 * x + z1[j];
        z1[j] = q.b1 * x - q.a1 * y + z2[j];
        z2[j] = q.b2 * x - q.a2 * y;
        row[j] = y;
      }
    }
  }
}

// Zero-phase filtering of every column: odd reflection padding at both ends,
// then forward and backward passes started from the scaled step state.
void filtfilt(const std::vector<Biquad>& sections, std::size_t pad,
              Eigen::Ref<Eigen::MatrixXd> columns) {
  const auto zi = step_states(sections);
  const Eigen::Index n = columns.rows();
  const Eigen::Index c = columns.cols();
  const auto p = static_cast<Eigen::Index>(pad);
  const Eigen::Index m = n + 2 * p;
  RowMajor ext(m, c);
  ext.middleRows(p, n) = columns;
  for (Eigen::Index i = 0; i < p; ++i) {
    ext.row(i) = 2.0 * columns.row(0) - columns.row(p - i);
    ext.row(p + n + i) = 2.0 * columns.row(n - 1) - columns.row(n - 2 - i);
  }
  std::vector<double> first(ext.row(0).begin(), ext.row(0).end());
  run_cascade(sections, zi, first.data(), ext.data(), static_cast<std::size_t>(m),
              static_cast<std::size_t>(c));
  ext.colwise().reverseInPlace();
  first.assign(ext.row(0).begin(), ext.row(0).end());
  run_cascade(sections, zi, first.data(), ext.data(), static_cast<std::size_t>(m),
              static_cast<std::size_t>(c));
  columns = ext.middleRows(p, n).colwise().reverse();
}

void check_length(std::size_t n, const FilterSpec& spec) {
  if (n < filter_min_length(spec)) {
    throw LengthError("series of length " + std::to_string(n) + " is shorter than the filter warm-up (" +
                      std::to_string(filter_min_length(spec)) + ")");
  }
}

}  // namespace

Eigen::VectorXd sos_filter(const std::vector<Biquad>& sections,
                           const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd y = x;
  const double zero = 0.0;
  run_cascade(sections, std::vector<SectionState>(sections.size()), &zero, y.data(),
              static_cast<std::size_t>(y.size()), 1);
  return y;
}

Eigen::VectorXd lowpass_filter(const Eigen::Ref<const Eigen::VectorXd>& series,
                               const FilterSpec& spec) {
  const auto sections = butterworth_sections(spec);
  check_length(static_cast<std::size_t>(series.size()), spec);
  Eigen::VectorXd out = series;
  filtfilt(sections, filter_padding(spec), out);
  return out;
}

void filter_columns(Eigen::Ref<Eigen::MatrixXd> columns, const FilterSpec& spec) {
  const auto sections = butterworth_sections(spec);
  check_length(static_cast<std::size_t>(columns.rows()), spec);
  filtfilt(sections, filter_padding(spec), columns);
}

}  // namespace wtraffic
