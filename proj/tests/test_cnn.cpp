#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "wtraffic/cnn.hpp"
#include "wtraffic/image.hpp"

using namespace wtraffic;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "wtraffic_test_cnn";
  fs::create_directories(dir);
  return dir / name;
}

DetectionEvent event_from_rows(const MatrixXd& amp, const MatrixXd& phase) {
  DetectionEvent e;
  e.start_index = 1000;
  e.end_index = 1000 + static_cast<std::size_t>(amp.cols()) - 1;
  e.amplitude_rows = amp;
  e.phase_rows = phase;
  return e;
}

/// Standardized copy of a row (population deviation).
VectorXd standardized(const VectorXd& v) {
  const double m = v.mean();
  const double sd = std::sqrt((v.array() - m).square().mean());
  return ((v.array() - m) / sd).matrix();
}

ClassifierImage image_of(const MatrixXd& pixels) {
  ClassifierImage im;
  im.pixels = pixels;
  return im;
}

}  // namespace

// ------------------------------------------------------------------ image

TEST_CASE("full-length events are only standardized") {
  std::mt19937_64 rng(1);
  const MatrixXd amp = oracle::random_matrix(3, 2500, rng), ph = oracle::random_matrix(3, 2500, rng);
  const auto im = form_image(event_from_rows(amp, ph));
  REQUIRE(im.pixels.rows() == 6);
  REQUIRE(im.pixels.cols() == 2500);
  for (int r = 0; r < 3; ++r) {
    CHECK((im.pixels.row(r).transpose() - standardized(amp.row(r).transpose())).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((im.pixels.row(r + 3).transpose() - standardized(ph.row(r).transpose())).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(im.normalization[0].offset == doctest::Approx(amp.row(0).mean()).epsilon(1e-12));
}

TEST_CASE("linear ramps stay linear after resampling") {
  const VectorXd ramp = VectorXd::LinSpaced(1250, 0, 1249);
  const VectorXd r = resample_linear(ramp, 2500);
  REQUIRE(r.size() == 2500);
  const VectorXd exact = VectorXd::LinSpaced(2500, 0, 1249);
  CHECK((r - exact).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(r(0) == 0.0);
  CHECK(r(2499) == 1249.0);
  CHECK(resample_linear(ramp, 1250) == ramp);

  MatrixXd rows = ramp.transpose().replicate(3, 1);
  const auto im = form_image(event_from_rows(rows, rows));
  CHECK((im.pixels.row(0).transpose() - standardized(exact)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("constant rows become zero rows") {
  std::mt19937_64 rng(2);
  MatrixXd amp = oracle::random_matrix(3, 700, rng);
  amp.row(1).setConstant(4.2);
  const auto im = form_image(event_from_rows(amp, oracle::random_matrix(3, 700, rng)));
  CHECK(im.pixels.row(1).isZero(0.0));
  CHECK(im.normalization[1].scale == 0.0);
  CHECK(im.pixels.allFinite());
}

TEST_CASE("images are invariant to positive row scaling") {
  std::mt19937_64 rng(3);
  const MatrixXd amp = oracle::random_matrix(3, 1800, rng), ph = oracle::random_matrix(3, 1800, rng);
  const auto a = form_image(event_from_rows(amp, ph));
  const auto b = form_image(event_from_rows(3.5 * amp, 3.5 * ph));
  CHECK((a.pixels - b.pixels).cwiseAbs().maxCoeff() <= 1e-12);
  const auto model = CnnModel::initialize(CnnArchitecture{}, 4);
  CHECK(predicted_class(cnn_forward(model, a)) == predicted_class(cnn_forward(model, b)));
}

TEST_CASE("image argument errors") {
  CHECK_THROWS_AS(form_image(event_from_rows(MatrixXd::Ones(2, 100), MatrixXd::Ones(3, 100))), ShapeError);
  CHECK_THROWS_AS(form_image(event_from_rows(MatrixXd::Ones(3, 1), MatrixXd::Ones(3, 1))), DegenerateInputError);
}

// ---------------------------------------------------------------- forward

TEST_CASE("tiny network matches the straight-line oracle") {
  std::mt19937_64 rng(5);
  for (auto [f1, f2] : {std::pair<Eigen::Index, Eigen::Index>{1, 1}, {3, 2}}) {
    const auto arch = oracle::tiny_architecture(f1, f2);
    const auto model = oracle::random_model(arch, 6 + static_cast<std::uint64_t>(f1));
    for (int trial = 0; trial < 3; ++trial) {
      const MatrixXd img = oracle::random_matrix(4, 12, rng);
      const VectorXd p = cnn_forward(model, image_of(img));
      CHECK((p - oracle::cnn_forward(model, img)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("default network output is a deterministic distribution") {
  std::mt19937_64 rng(7);
  const auto model = oracle::random_model(CnnArchitecture{}, 8);
  const auto im = image_of(oracle::random_matrix(6, 2500, rng));
  const VectorXd a = cnn_forward(model, im), b = cnn_forward(model, im);
  CHECK(a == b);
  CHECK(std::abs(a.sum() - 1.0) <= 1e-9);
  CHECK((a.array() >= 0).all());
  CHECK((a - oracle::cnn_forward(model, im.pixels)).cwiseAbs().maxCoeff() <= 1e-10);

  auto shifted = model;
  shifted.fc_bias.array() += 17.0;
  CHECK((cnn_forward(shifted, im) - a).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(predicted_class(cnn_forward(shifted, im)) == predicted_class(a));

  CHECK_THROWS_AS(cnn_forward(model, image_of(MatrixXd::Zero(6, 2000))), ShapeError);
}

TEST_CASE("architecture shapes") {
  const CnnArchitecture a;
  const auto s = a.map_shapes();
  REQUIRE(s.size() == 3);
  CHECK(s[1] == nn::MapShape{8, 4, 623});
  CHECK(s[2] == nn::MapShape{16, 2, 154});
  CHECK(a.feature_size() == 16 * 2 * 154);
  auto bad = a;
  bad.p_drop = 1.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

// --------------------------------------------------------------- gradients

TEST_CASE("backprop matches central differences on every parameter") {
  std::mt19937_64 rng(9);
  std::vector<MatrixXd> images;
  for (int i = 0; i < 4; ++i) images.push_back(oracle::random_matrix(4, 12, rng));
  const std::vector<int> labels{0, 3, 1, 4};
  for (auto [f1, f2] : {std::pair<Eigen::Index, Eigen::Index>{1, 1}, {2, 3}}) {
    const auto model = oracle::random_model(oracle::tiny_architecture(f1, f2), 10);
    const auto r = oracle::gradient_check(model, images, labels);
    CAPTURE(r.worst_name);
    CHECK(r.checked > 0);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("backprop through a fixed dropout mask") {
  std::mt19937_64 rng(11);
  std::vector<MatrixXd> images;
  for (int i = 0; i < 3; ++i) images.push_back(oracle::random_matrix(4, 12, rng));
  auto arch = oracle::tiny_architecture(2, 2);
  arch.p_drop = 0.5;
  const auto r = oracle::gradient_check(oracle::random_model(arch, 12), images, {2, 2, 0});
  CAPTURE(r.worst_name);
  CHECK(r.worst < 1e-4);
}

// ----------------------------------------------------------------- training

namespace {

struct Dataset {
  std::vector<ClassifierImage> images;
  std::vector<VehicleClass> labels;
};

/// `copies` identical images per class over a 6 x 64 grid.
Dataset memorization_set(int copies) {
  std::mt19937_64 rng(13);
  Dataset d;
  for (auto c : kAllClasses) {
    const MatrixXd proto = oracle::random_matrix(6, 64, rng);
    for (int i = 0; i < copies; ++i) {
      d.images.push_back(image_of(proto));
      d.labels.push_back(c);
    }
  }
  return d;
}

TrainConfig small_config(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.arch.input_height = 6;
  cfg.arch.input_width = 64;
  cfg.arch.blocks = {{4, {3, 5}, {1, 4, 1, 4}}, {8, {3, 3}, {1, 2, 1, 2}}};
  return cfg;
}

}  // namespace

TEST_CASE("memorizes ten copies of one image per class") {
  const auto d = memorization_set(10);
  auto cfg = small_config(200);
  int reached = -1;
  std::vector<EpochRecord> history;
  const auto r = cnn_train(d.images, d.labels, cfg, [&](const EpochRecord& e) {
    history.push_back(e);
    if (reached < 0 && e.validation_accuracy == 1.0) reached = e.epoch;
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.images.size(); ++i) correct += predicted_class(cnn_forward(r.model, d.images[i])) == d.labels[i];
  CHECK(correct == d.images.size());
  CHECK(reached >= 1);
  CHECK(reached <= 200);
  CHECK(r.history.size() == 200);

  // Accepted losses never rise under the halve-on-increase schedule.
  double last = INFINITY;
  for (const auto& e : history) {
    if (e.epoch > 10) break;
    if (e.rejected) continue;
    CHECK(e.train_loss <= last);
    last = e.train_loss;
  }
  // A rejected epoch records the rate it tried; the next epoch runs at half.
  for (std::size_t i = 0; i + 1 < history.size(); ++i) {
    if (history[i].rejected) CHECK(history[i + 1].learning_rate * 2 == doctest::Approx(history[i].learning_rate));
  }
}

TEST_CASE("training is deterministic in its seed") {
  const auto d = memorization_set(4);
  const auto cfg = small_config(3);
  save_model(cnn_train(d.images, d.labels, cfg).model, scratch("a.wtcn"));
  save_model(cnn_train(d.images, d.labels, cfg).model, scratch("b.wtcn"));
  CHECK(oracle::file_bytes(scratch("a.wtcn")) == oracle::file_bytes(scratch("b.wtcn")));
  auto other = cfg;
  other.seed = 2;
  save_model(cnn_train(d.images, d.labels, other).model, scratch("c.wtcn"));
  CHECK(oracle::file_bytes(scratch("a.wtcn")) != oracle::file_bytes(scratch("c.wtcn")));
}

TEST_CASE("training argument errors") {
  auto d = memorization_set(2);
  d.labels[0] = VehicleClass::PassengerCar;  // leaves one bike
  CHECK_THROWS_AS(cnn_train(d.images, d.labels, small_config(1)), DataError);

  const auto ok = memorization_set(4);
  auto cfg = small_config(2);
  cfg.learning_rate = 1e300;
  cfg.halve_on_increase = false;
  try {
    cnn_train(ok.images, ok.labels, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() >= 1);
  }
  cfg = small_config(1);
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("stratified split") {
  std::vector<VehicleClass> labels;
  for (auto c : kAllClasses)
    for (int i = 0; i < 10 + ordinal(c); ++i) labels.push_back(c);
  std::vector<std::size_t> train, val;
  stratified_split(labels, 0.3, 5, train, val);
  CHECK(train.size() + val.size() == labels.size());
  std::vector<int> seen(labels.size(), 0);
  for (auto i : train) ++seen[i];
  for (auto i : val) ++seen[i];
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  for (auto c : kAllClasses) {
    const auto n = static_cast<double>(10 + ordinal(c));
    const auto in_val = std::count_if(val.begin(), val.end(), [&](std::size_t i) { return labels[i] == c; });
    CHECK(in_val == std::llround(0.3 * n));
  }
}

TEST_CASE("prediction helpers") {
  CHECK(predicted_class((VectorXd(5) << 0.1, 0.3, 0.3, 0.2, 0.1).finished()) == VehicleClass::PassengerCar);
  const std::vector<VectorXd> cands{(VectorXd(5) << 0.5, 0.2, 0.1, 0.1, 0.1).finished(),
                                    (VectorXd(5) << 0.05, 0.05, 0.1, 0.1, 0.7).finished()};
  CHECK(fuse_max_probability(cands) == cands[1]);
}

// -------------------------------------------------------------- model files

TEST_CASE("model files round-trip byte for byte") {
  const auto model = oracle::random_model(CnnArchitecture{}, 21);
  save_model(model, scratch("m1.wtcn"));
  const auto back = load_model(scratch("m1.wtcn"));
  save_model(back, scratch("m2.wtcn"));
  const auto bytes = oracle::file_bytes(scratch("m1.wtcn"));
  CHECK(bytes == oracle::file_bytes(scratch("m2.wtcn")));
  CHECK(bytes.substr(0, 4) == "WTCN");
  CHECK(back.fc_weight == model.fc_weight);
  CHECK(back.blocks[1].running_var == model.blocks[1].running_var);

  std::mt19937_64 rng(22);
  const auto im = image_of(oracle::random_matrix(6, 2500, rng));
  CHECK(cnn_forward(back, im) == cnn_forward(model, im));

  std::ofstream(scratch("short.wtcn"), std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(load_model(scratch("short.wtcn")), LengthError);
  std::ofstream(scratch("magic.wtcn"), std::ios::binary) << "XXXX" << bytes.substr(4);
  CHECK_THROWS_AS(load_model(scratch("magic.wtcn")), FormatError);
  std::ofstream(scratch("long.wtcn"), std::ios::binary) << bytes << "z";
  CHECK_THROWS(load_model(scratch("long.wtcn")));
}
