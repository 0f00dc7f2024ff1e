#include "wtraffic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "binio.hpp"

namespace wtraffic {

namespace detail {
extern const std::string_view kDefaultSignatureTable;
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBaseAmplitude = 20.0;
constexpr double kTimingOffsetSigma = 0.002;
constexpr double kMinBurstSeconds = 0.5;
constexpr double kMinGapSeconds = 1.0;

// Noise source: a seeded table of normal deviates indexed by a seeded
// 64-bit engine, three indices per draw.
class GaussianTable {
 public:
  explicit GaussianTable(std::uint64_t seed) : engine_(seed) {
    std::normal_distribution<double> normal(0.0, 1.0);
    table_.resize(kSize);
    for (auto& v : table_) v = static_cast<float>(normal(engine_));
  }

  float next() {
    if (left_ == 0) {
      bits_ = engine_();
      left_ = 3;
    }
    const auto idx = static_cast<std::size_t>(bits_ & (kSize - 1));
    bits_ >>= kBits;
    --left_;
    return table_[idx];
  }

 private:
  static constexpr int kBits = 20;
  static constexpr std::size_t kSize = std::size_t{1} << kBits;
  std::mt19937_64 engine_;
  std::vector<float> table_;
  std::uint64_t bits_ = 0;
  int left_ = 0;
};

std::vector<double> number_list(const nlohmann::json& j, const char* key, std::size_t min_size) {
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() < min_size) {
    throw FormatError(std::string("signature field '") + key + "' needs at least " +
                      std::to_string(min_size) + " entries");
  }
  return v;
}

std::size_t to_samples(double seconds, double rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

}  // namespace

double SignatureTemplate::envelope(double u, std::size_t pair) const {
  if (u < 0.0 || u > 1.0) return 0.0;
  double taper = 1.0;
  if (taper_fraction > 0.0) {
    if (u < taper_fraction) {
      taper = 0.5 * (1.0 - std::cos(kPi * u / taper_fraction));
    } else if (u > 1.0 - taper_fraction) {
      taper = 0.5 * (1.0 - std::cos(kPi * (1.0 - u) / taper_fraction));
    }
  }
  const auto& p = pairs.at(pair);
  const double cycles = ripple_hz * duration_s;
  return taper * (1.0 + p.ripple_amp * std::sin(2.0 * kPi * cycles * u + p.ripple_phase));
}

SignatureTable SignatureTable::from_json(std::string_view text) {
  SignatureTable t;
  try {
    const auto j = nlohmann::json::parse(text);
    t.zone_m = j.at("zone_m").get<double>();
    t.taper_fraction = j.at("taper_fraction").get<double>();
    const auto lanes = number_list(j, "lane_depth_factor", 2);
    t.lane_depth_factor = {lanes[0], lanes[1]};
    t.depth_jitter = j.value("depth_jitter", 0.0);
    const auto& classes = j.at("classes");
    for (auto c : kAllClasses) {
      const auto& e = classes.at(std::string(to_string(c)));
      auto& out = t.classes[static_cast<std::size_t>(ordinal(c))];
      out.length_m = e.at("length_m").get<double>();
      out.depth = e.at("depth").get<double>();
      out.ripple_cycles = e.at("ripple_cycles").get<double>();
      out.ripple_amp = e.at("ripple_amp").get<double>();
      out.pair_gain = number_list(e, "pair_gain", 1);
      out.pair_ripple_phase = number_list(e, "pair_ripple_phase", out.pair_gain.size());
      out.phase_tilt = number_list(e, "phase_tilt", out.pair_gain.size());
      if (out.depth * (1.0 + out.ripple_amp) >= 1.0) {
        throw FormatError("signature for '" + std::string(to_string(c)) +
                          "' would drive the amplitude negative");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad signature table: ") + e.what());
  }
  if (t.taper_fraction < 0.0 || t.taper_fraction >= 0.5) {
    throw FormatError("taper_fraction must be in [0, 0.5)");
  }
  return t;
}

SignatureTable SignatureTable::load(const std::filesystem::path& path) {
  return from_json(binio::read_text(path.string()));
}

const SignatureTable& SignatureTable::defaults() {
  static const SignatureTable table = from_json(detail::kDefaultSignatureTable);
  return table;
}

SignatureTemplate vehicle_signature(VehicleClass vehicle_class, double speed_mps, int lane,
                                    const SignatureTable& table) {
  if (ordinal(vehicle_class) < 0 || ordinal(vehicle_class) >= kNumClasses) {
    throw DomainError("unknown vehicle class");
  }
  if (!(speed_mps > 2.0)) throw DomainError("vehicle speed must exceed 2 m/s");
  if (lane != 1 && lane != 2) throw DomainError("lane must be 1 or 2");
  const auto& e = table.classes[static_cast<std::size_t>(ordinal(vehicle_class))];
  SignatureTemplate s;
  s.vehicle_class = vehicle_class;
  s.duration_s = (e.length_m + table.zone_m) / speed_mps;
  s.ripple_hz = e.ripple_cycles / s.duration_s;
  s.taper_fraction = table.taper_fraction;
  const double lane_factor = table.lane_depth_factor[static_cast<std::size_t>(lane - 1)];
  for (std::size_t p = 0; p < e.pair_gain.size(); ++p) {
    PairSignature ps;
    ps.depth = e.depth * e.pair_gain[p] * lane_factor;
    ps.ripple_amp = e.ripple_amp;
    ps.ripple_phase = e.pair_ripple_phase[p];
    ps.phase_tilt = e.phase_tilt[p];
    s.pairs.push_back(ps);
  }
  return s;
}

void validate(const Scenario& sc, const SignatureTable& table) {
  if (!(sc.sample_rate_hz > 0.0)) throw ScenarioError("sample rate must be positive");
  if (!(sc.duration_s > 0.0)) throw ScenarioError("duration must be positive");
  if (sc.noise_sigma < 0.0 || sc.slow_object_amplitude < 0.0) {
    throw ScenarioError("noise levels must be non-negative");
  }
  if (sc.n_pairs < 1 || sc.n_pairs > 255) throw ScenarioError("antenna pair count must be in [1, 255]");
  const std::size_t n = to_samples(sc.duration_s, sc.sample_rate_hz);
  std::size_t prev_end = 0;
  bool have_prev = false;
  for (std::size_t i = 0; i < sc.events.size(); ++i) {
    const auto& ev = sc.events[i];
    const std::string tag = "event " + std::to_string(i) + ": ";
    if (ev.time_s < 0.0 || ev.time_s >= sc.duration_s) throw ScenarioError(tag + "time outside [0, duration)");
    if (!(ev.speed_mps > 2.0)) throw ScenarioError(tag + "speed must exceed 2 m/s");
    if (ev.lane != 1 && ev.lane != 2) throw ScenarioError(tag + "lane must be 1 or 2");
    const auto sig = vehicle_signature(ev.vehicle_class, ev.speed_mps, ev.lane, table);
    if (sig.pairs.size() < sc.n_pairs) throw ScenarioError(tag + "signature table has too few pairs");
    const std::size_t start = to_samples(ev.time_s, sc.sample_rate_hz);
    const std::size_t len = to_samples(sig.duration_s, sc.sample_rate_hz);
    if (static_cast<double>(len) * (1.0 - 2.0 * sig.taper_fraction) <=
        kMinBurstSeconds * sc.sample_rate_hz) {
      throw ScenarioError(tag + "burst too short for detection (vehicle too fast)");
    }
    if (have_prev) {
      if (start <= prev_end ||
          static_cast<double>(start - prev_end - 1) < kMinGapSeconds * sc.sample_rate_hz) {
        throw ScenarioError(tag + "overlaps the previous event (events need 1 s separation)");
      }
    }
    const std::size_t end = start + len - 1;
    if (end >= n) throw ScenarioError(tag + "duration too short to hold the event");
    prev_end = end;
    have_prev = true;
  }
}

SyntheticTrace generate_trace(const Scenario& sc, const SignatureTable& table) {
  validate(sc, table);
  const double fs = sc.sample_rate_hz;
  const std::size_t n = to_samples(sc.duration_s, fs);
  const std::size_t n_pairs = sc.n_pairs;

  std::mt19937_64 setup(sc.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Static frequency-selective line-of-sight channel per pair and subcarrier.
  std::vector<std::complex<double>> los(n_pairs * kSubcarriers);
  std::vector<double> dip_shape(n_pairs * kSubcarriers);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const double pd = static_cast<double>(p);
    for (std::size_t c = 0; c < kSubcarriers; ++c) {
      const double cd = static_cast<double>(c);
      const double amp = kBaseAmplitude * (1.0 + 0.25 * std::sin(0.35 * cd + 1.3 * pd) +
                                           0.10 * std::cos(0.9 * cd - pd));
      const double phase = 0.08 * kSubcarrierIndices[c] + 0.7 * pd;
      los[p * kSubcarriers + c] = std::polar(amp, phase);
      dip_shape[p * kSubcarriers + c] = 1.0 + 0.15 * std::sin(0.5 * cd + pd);
    }
  }

  // Slow-object drift below 2 Hz plus interference above the smoothing cutoff.
  const double drift_hz = 0.2 + 1.6 * unit(setup);
  const double drift_phase = 2.0 * kPi * unit(setup);
  const double hum_hz = 60.0 + 140.0 * unit(setup);
  const double hum_phase = 2.0 * kPi * unit(setup);

  struct Active {
    std::size_t start, len;
    SignatureTemplate sig;
    double jitter;
  };
  std::vector<Active> active;
  std::vector<GroundTruthLabel> labels;
  for (std::size_t i = 0; i < sc.events.size(); ++i) {
    const auto& ev = sc.events[i];
    auto sig = vehicle_signature(ev.vehicle_class, ev.speed_mps, ev.lane, table);
    const double jitter = 1.0 + table.depth_jitter * (2.0 * unit(setup) - 1.0);
    const std::size_t start = to_samples(ev.time_s, fs);
    const std::size_t len = to_samples(sig.duration_s, fs);
    active.push_back({start, len, std::move(sig), jitter});
    labels.push_back({static_cast<int>(i), start, start + len - 1, ev.vehicle_class, ev.lane});
  }

  GaussianTable noise(setup());
  std::vector<CsiTrace::Sample> values(n * n_pairs * kSubcarriers);
  std::array<std::complex<double>, 29> powers{};
  std::vector<double> env(n_pairs);
  std::size_t next_event = 0;

  for (std::size_t t = 0; t < n; ++t) {
    const double ts = static_cast<double>(t) / fs;
    const double interference =
        sc.slow_object_amplitude * (std::sin(2.0 * kPi * drift_hz * ts + drift_phase) +
                                    0.5 * std::sin(2.0 * kPi * hum_hz * ts + hum_phase));
    const std::complex<double> offset = std::polar(1.0, kPi * (2.0 * unit(setup) - 1.0));
    const double timing = kTimingOffsetSigma * noise.next();

    while (next_event < active.size() && t > active[next_event].start + active[next_event].len - 1) {
      ++next_event;
    }
    const Active* ev = nullptr;
    if (next_event < active.size() && t >= active[next_event].start) ev = &active[next_event];

    for (std::size_t p = 0; p < n_pairs; ++p) {
      double depth = 0.0, tilt = 0.0;
      if (ev) {
        const double u = static_cast<double>(t - ev->start) / static_cast<double>(ev->len - 1);
        const double e = ev->sig.envelope(u, p);
        depth = ev->sig.pairs[p].depth * ev->jitter * e;
        tilt = ev->sig.pairs[p].phase_tilt * e;
      }
      const double theta = -2.0 * kPi * timing / 64.0 + tilt / 28.0;
      const std::complex<double> w = std::polar(1.0, theta);
      powers[0] = 1.0;
      for (std::size_t k = 1; k < powers.size(); ++k) powers[k] = powers[k - 1] * w;

      auto* out = &values[(t * n_pairs + p) * kSubcarriers];
      for (std::size_t c = 0; c < kSubcarriers; ++c) {
        const int k = kSubcarrierIndices[c];
        const auto rot = k >= 0 ? powers[static_cast<std::size_t>(k)]
                                : std::conj(powers[static_cast<std::size_t>(-k)]);
        const double gain = 1.0 + interference - depth * dip_shape[p * kSubcarriers + c];
        const std::complex<double> clean = los[p * kSubcarriers + c] * gain * rot * offset;
        out[c] = {static_cast<float>(clean.real() + sc.noise_sigma * noise.next()),
                  static_cast<float>(clean.imag() + sc.noise_sigma * noise.next())};
      }
    }
  }

  return {CsiTrace(n, n_pairs, fs, std::move(values)), std::move(labels)};
}

Scenario make_random_scenario(const RandomLayout& layout, std::uint64_t seed,
                              const SignatureTable& table) {
  if (layout.speed_min_mps <= 2.0 || layout.speed_max_mps < layout.speed_min_mps) {
    throw ScenarioError("invalid speed range");
  }
  if (layout.gap_min_s < kMinGapSeconds || layout.gap_max_s < layout.gap_min_s) {
    throw ScenarioError("gaps must be at least 1 s");
  }
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<VehicleClass> classes;
  if (layout.balanced_classes) {
    for (std::size_t i = 0; i < layout.count; ++i) classes.push_back(kAllClasses[i % kNumClasses]);
    std::shuffle(classes.begin(), classes.end(), rng);
  } else {
    std::uniform_int_distribution<int> pick(0, kNumClasses - 1);
    for (std::size_t i = 0; i < layout.count; ++i) classes.push_back(class_from_ordinal(pick(rng)));
  }

  Scenario sc;
  sc.sample_rate_hz = layout.sample_rate_hz;
  sc.noise_sigma = layout.noise_sigma;
  sc.slow_object_amplitude = layout.slow_object_amplitude;
  sc.seed = seed;
  sc.n_pairs = layout.n_pairs;
  double t = layout.lead_s;
  for (std::size_t i = 0; i < layout.count; ++i) {
    ScenarioEvent ev;
    ev.vehicle_class = classes[i];
    ev.lane = unit(rng) < 0.5 ? 1 : 2;
    ev.speed_mps = layout.speed_min_mps + (layout.speed_max_mps - layout.speed_min_mps) * unit(rng);
    // Snap onset to the sample grid so the spacing check sees what was intended.
    ev.time_s = std::round(t * layout.sample_rate_hz) / layout.sample_rate_hz;
    sc.events.push_back(ev);
    const double dur = vehicle_signature(ev.vehicle_class, ev.speed_mps, ev.lane, table).duration_s;
    t = ev.time_s + dur;
    if (i + 1 < layout.count) t += layout.gap_min_s + (layout.gap_max_s - layout.gap_min_s) * unit(rng);
  }
  sc.duration_s = t + layout.tail_s;
  validate(sc, table);
  return sc;
}

Scenario scenario_from_json(std::string_view text, std::optional<std::uint64_t> seed_override) {
  try {
    const auto j = nlohmann::json::parse(text);
    const std::uint64_t seed = seed_override ? *seed_override : j.value("seed", std::uint64_t{1});
    if (j.contains("random")) {
      const auto& r = j.at("random");
      RandomLayout l;
      l.count = r.value("count", l.count);
      l.speed_min_mps = r.value("speed_min_mps", l.speed_min_mps);
      l.speed_max_mps = r.value("speed_max_mps", l.speed_max_mps);
      l.gap_min_s = r.value("gap_min_s", l.gap_min_s);
      l.gap_max_s = r.value("gap_max_s", l.gap_max_s);
      l.lead_s = r.value("lead_s", l.lead_s);
      l.tail_s = r.value("tail_s", l.tail_s);
      l.balanced_classes = r.value("balanced_classes", l.balanced_classes);
      l.noise_sigma = j.value("noise_sigma", l.noise_sigma);
      l.slow_object_amplitude = j.value("slow_object_amplitude", l.slow_object_amplitude);
      l.sample_rate_hz = j.value("sample_rate_hz", l.sample_rate_hz);
      l.n_pairs = j.value("n_pairs", l.n_pairs);
      return make_random_scenario(l, seed);
    }
    Scenario sc;
    sc.duration_s = j.at("duration_s").get<double>();
    sc.sample_rate_hz = j.value("sample_rate_hz", sc.sample_rate_hz);
    sc.noise_sigma = j.value("noise_sigma", sc.noise_sigma);
    sc.slow_object_amplitude = j.value("slow_object_amplitude", sc.slow_object_amplitude);
    sc.n_pairs = j.value("n_pairs", sc.n_pairs);
    sc.seed = seed;
    for (const auto& e : j.at("events")) {
      ScenarioEvent ev;
      ev.time_s = e.at("time_s").get<double>();
      ev.vehicle_class = parse_vehicle_class(e.at("class").get<std::string>());
      ev.lane = e.at("lane").get<int>();
      ev.speed_mps = e.at("speed_mps").get<double>();
      sc.events.push_back(ev);
    }
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad scenario: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("bad scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed_override) {
  return scenario_from_json(binio::read_text(path.string()), seed_override);
}

}  // namespace wtraffic
