#include <doctest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "wtraffic/detect.hpp"
#include "wtraffic/phase.hpp"
#include "wtraffic/stats.hpp"

using namespace wtraffic;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

std::vector<bool> run_mask(std::size_t n, std::size_t start, std::size_t length) {
  std::vector<bool> m(n, false);
  for (std::size_t i = start; i < start + length; ++i) m[i] = true;
  return m;
}

/// Unit-Gaussian series with a +12 plateau over [start, start + length).
VectorXd stream_with_plateau(std::size_t n, std::size_t start, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = g(rng);
  v.segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(length)).array() += 12.0;
  return v;
}

/// Median centring keeps a long plateau from dragging the centre toward it.
DetectorParams median_params() {
  DetectorParams p;
  p.centering = Centering::Median;
  return p;
}

}  // namespace

TEST_CASE("constant series has no outliers") {
  const auto m = detect_outliers(VectorXd::Constant(100, 2.0));
  CHECK(std::none_of(m.begin(), m.end(), [](bool b) { return b; }));
}

TEST_CASE("a single spike is flagged") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  VectorXd a(10000);
  for (auto& x : a) x = g(rng);
  a(5000) += 20.0;
  const auto m = detect_outliers(a);
  CHECK(m[5000]);
  // Direct evaluation of the rule.
  const double centre = a.mean(), spread = scaled_mad(a);
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(m[static_cast<std::size_t>(i)] == (std::abs(a(i) - centre) > 3.0 * spread));
}

TEST_CASE("zero MAD flags every deviating point") {
  VectorXd a(5);
  a << 0, 0, 0, 0, 100;
  const auto m = detect_outliers(a);
  CHECK(std::all_of(m.begin(), m.end(), [](bool b) { return b; }));
  const auto med = detect_outliers(a, 3.0, Centering::Median);
  CHECK(med == std::vector<bool>{false, false, false, false, true});
}

TEST_CASE("window extraction fixtures") {
  const DetectorParams p;
  SUBCASE("one long run") {
    const auto w = extract_windows(run_mask(10000, 5000, 2000), p);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == IndexWindow{4500, 7499});
    CHECK(w[0].length() == 3000);
  }
  SUBCASE("run shorter than omega") { CHECK(extract_windows(run_mask(10000, 5000, 1000), p).empty()); }
  SUBCASE("run of exactly omega") { CHECK(extract_windows(run_mask(10000, 5000, 1250), p).size() == 1); }
  SUBCASE("run too close to the start") { CHECK(extract_windows(run_mask(10000, 100, 2000), p).empty()); }
  SUBCASE("start guard is strict") {
    CHECK(extract_windows(run_mask(10000, 500, 2000), p).empty());
    CHECK(extract_windows(run_mask(10000, 501, 2000), p).size() == 1);
  }
  SUBCASE("run too close to the end") { CHECK(extract_windows(run_mask(10000, 7600, 2000), p).empty()); }
  SUBCASE("run reaching the last sample") { CHECK(extract_windows(run_mask(10000, 8000, 2000), p).empty()); }
  SUBCASE("short run does not merge into the next") {
    auto m = run_mask(20000, 3000, 600);
    for (std::size_t i = 3700; i < 4700; ++i) m[i] = true;  // 1000 long, separated by a gap
    CHECK(extract_windows(m, p).empty());
  }
  SUBCASE("two runs give two ordered windows") {
    auto m = run_mask(20000, 2000, 1500);
    for (std::size_t i = 10000; i < 12000; ++i) m[i] = true;
    const auto w = extract_windows(m, p);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == IndexWindow{1500, 3999});
    CHECK(w[1] == IndexWindow{9500, 12499});
  }
}

TEST_CASE("window length property") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> start(600, 9000), len(1250, 5000);
  DetectorParams p;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t s = start(rng), l = len(rng), n = 16000;
    const auto w = extract_windows(run_mask(n, s, l), p);
    if (s + l - 1 + p.delta2 < n) {
      REQUIRE(w.size() == 1);
      CHECK(w[0].length() == l + p.delta1 + p.delta2);
      CHECK(w[0].end < n);
    } else {
      CHECK(w.empty());
    }
  }
}

TEST_CASE("extract_events slices every pair") {
  const std::size_t n = 12000;
  std::vector<VectorXd> amps, phases;
  for (int p = 0; p < 3; ++p) {
    amps.push_back(stream_with_plateau(n, 5000, 2000, 10 + p));
    phases.push_back(VectorXd::LinSpaced(static_cast<Eigen::Index>(n), p, p + 1));
  }
  const auto events = extract_events(amps, phases, median_params());
  REQUIRE(events.size() == 1);
  const auto& e = events[0];
  CHECK(e.start_index == 4500);
  CHECK(e.end_index == 7499);
  REQUIRE(e.amplitude_rows.rows() == 3);
  REQUIRE(e.amplitude_rows.cols() == 3000);
  REQUIRE(e.phase_rows.cols() == 3000);
  for (int p = 0; p < 3; ++p) {
    CHECK(e.amplitude_rows.row(p).transpose() == amps[p].segment(4500, 3000));
    CHECK(e.phase_rows.row(p).transpose() == phases[p].segment(4500, 3000));
  }
  CHECK(e.baseline_mean == doctest::Approx(amps[0].mean()).epsilon(1e-12));

  const auto again = extract_events(amps, phases, median_params());
  CHECK(again[0].amplitude_rows == e.amplitude_rows);

  amps[2].conservativeResize(static_cast<Eigen::Index>(n - 1));
  CHECK_THROWS_AS(extract_events(amps, phases, median_params()), ShapeError);
}

TEST_CASE("phase reductions") {
  std::mt19937_64 rng(4);
  const MatrixXd s = oracle::random_matrix(20, 30, rng);
  CHECK((reduce_phase(s, PhaseReduction::Mean) - s.rowwise().mean()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(reduce_phase(s, PhaseReduction::SingleSubcarrier, 7) == s.col(7));
  const VectorXd first = reduce_phase(s, PhaseReduction::FirstPca);
  CHECK(first.size() == 20);
}

TEST_CASE("detector parameter validation") {
  DetectorParams p;
  p.omega = 0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p = {};
  p.mad_multiplier = -1;
  CHECK_THROWS_AS(validate(p), DomainError);
  CHECK(parse_centering("median") == Centering::Median);
  CHECK(parse_phase_reduction("first-pca") == PhaseReduction::FirstPca);
  CHECK_THROWS_AS(parse_centering("mode"), DomainError);
}

TEST_CASE("event files round-trip byte for byte") {
  const std::size_t n = 12000;
  std::vector<VectorXd> amps, phases;
  for (int p = 0; p < 3; ++p) {
    amps.push_back(stream_with_plateau(n, 3000, 1500, 20 + p));
    amps.back().segment(8000, 1500).array() += 12.0;
    phases.push_back(stream_with_plateau(n, 0, 0, 30 + p));
  }
  auto events = extract_events(amps, phases, median_params());
  REQUIRE(events.size() == 2);
  events[0].lane = 2;
  events[0].vehicle_class = VehicleClass::Suv;
  events[1].trace_id = "trace_007";

  const auto dir = fs::temp_directory_path() / "wtraffic_test_detect";
  fs::create_directories(dir);
  save_events(events, dir / "a.jsonl");
  const auto loaded = load_events(dir / "a.jsonl");
  save_events(loaded, dir / "b.jsonl");
  CHECK(oracle::file_bytes(dir / "a.jsonl") == oracle::file_bytes(dir / "b.jsonl"));
  CHECK(oracle::file_bytes(dir / "a.jsonl.bin") == oracle::file_bytes(dir / "b.jsonl.bin"));

  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].lane == 2);
  CHECK(loaded[0].vehicle_class == VehicleClass::Suv);
  CHECK_FALSE(loaded[1].lane.has_value());
  CHECK(loaded[1].trace_id == "trace_007");
  CHECK(loaded[0].start_index == events[0].start_index);
  // Rows are stored at 32-bit precision.
  CHECK((loaded[0].amplitude_rows - events[0].amplitude_rows).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK(event_sidecar_path(dir / "a.jsonl") == dir / "a.jsonl.bin");
}
