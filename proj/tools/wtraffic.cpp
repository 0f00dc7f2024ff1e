// Command-line front end: generate, preprocess, detect, train, classify,
// evaluate and plot.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wtraffic/baseline.hpp"
#include "wtraffic/cnn.hpp"
#include "wtraffic/eval.hpp"
#include "wtraffic/image.hpp"
#include "wtraffic/pipeline.hpp"
#include "wtraffic/plot.hpp"
#include "wtraffic/synth.hpp"

namespace fs = std::filesystem;
using namespace wtraffic;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

std::string trace_id_of(const fs::path& trace) { return trace.stem().string(); }

const std::string& ensure_parent(const std::string& out) {
  const auto parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return out;
}

/// Event files are .jsonl files that have a binary sidecar.
std::vector<fs::path> event_files(const fs::path& where) {
  if (fs::is_regular_file(where)) return {where};
  if (!fs::is_directory(where)) throw IoError("'" + where.string() + "' is neither a file nor a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(where)) {
    const auto& p = entry.path();
    if (p.extension() == ".jsonl" && fs::exists(event_sidecar_path(p))) files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no event files in '" + where.string() + "'");
  return files;
}

std::vector<DetectionEvent> load_all_events(const fs::path& where) {
  std::vector<DetectionEvent> all;
  for (const auto& f : event_files(where)) {
    auto events = load_events(f);
    for (auto& e : events) all.push_back(std::move(e));
  }
  return all;
}

std::optional<int> parse_lane(const std::string& lane) {
  if (lane == "all") return std::nullopt;
  if (lane == "1") return 1;
  if (lane == "2") return 2;
  throw DomainError("lane must be 1, 2 or all");
}

// ------------------------------------------------------------------ commands

struct GenerateArgs {
  std::string scenario;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out;
  int count = 1;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.count < 1) throw DomainError("--count must be positive");
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    std::optional<std::uint64_t> seed;
    if (a.seed_given) seed = a.seed + static_cast<std::uint64_t>(i);
    Scenario sc = load_scenario(a.scenario, seed);
    if (!a.seed_given && a.count > 1) sc.seed += static_cast<std::uint64_t>(i);
    const auto synth = generate_trace(sc);
    char name[32];
    std::snprintf(name, sizeof name, "trace_%03d", i);
    save_trace(synth.trace, fs::path(a.out) / (std::string(name) + ".csi"));
    save_labels(synth.labels, fs::path(a.out) / (std::string(name) + ".labels.jsonl"));
    std::cerr << name << ": " << synth.trace.n_packets() << " packets, " << synth.labels.size()
              << " events\n";
  }
  return 0;
}

struct PreprocessArgs {
  std::string trace, out, filter_mode = "lowpass";
  double cutoff = 38.0;
  int pca_k = 1;
};

int cmd_preprocess(const PreprocessArgs& a) {
  const auto trace = load_trace(a.trace);
  PreprocessConfig cfg;
  cfg.filter.cutoff_hz = a.cutoff;
  cfg.filter.sample_rate_hz = trace.sample_rate_hz();
  cfg.filter.mode = parse_filter_mode(a.filter_mode);
  cfg.pca_k = a.pca_k;
  const auto pairs = preprocess_trace(trace, cfg);
  SeriesTable t;
  t.names.push_back("time_s");
  std::vector<double> time(trace.n_packets());
  for (std::size_t i = 0; i < time.size(); ++i) time[i] = static_cast<double>(i) / trace.sample_rate_hz();
  t.columns.push_back(std::move(time));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& proj = pairs[p].pca.projected;
    for (Eigen::Index k = 0; k < proj.cols(); ++k) {
      t.names.push_back("pair" + std::to_string(p) + "_pc" + std::to_string(k + 1));
      t.columns.emplace_back(proj.col(k).data(), proj.col(k).data() + proj.rows());
    }
  }
  save_series_csv(t, ensure_parent(a.out));
  return 0;
}

struct DetectArgs {
  std::string trace, labels, out;
  std::size_t omega = 1250, delta1 = 500, delta2 = 500;
  double mad_multiplier = 3.0;
  std::string centering = "mean", phase_reduction = "mean", filter_mode = "lowpass";
};

int cmd_detect(const DetectArgs& a) {
  const auto trace = load_trace(a.trace);
  PipelineConfig cfg;
  cfg.preprocess.filter.sample_rate_hz = trace.sample_rate_hz();
  cfg.preprocess.filter.mode = parse_filter_mode(a.filter_mode);
  cfg.detector.omega = a.omega;
  cfg.detector.delta1 = a.delta1;
  cfg.detector.delta2 = a.delta2;
  cfg.detector.mad_multiplier = a.mad_multiplier;
  cfg.detector.centering = parse_centering(a.centering);
  cfg.detector.phase_reduction = parse_phase_reduction(a.phase_reduction);
  auto events = detect_vehicles(trace, cfg, trace_id_of(a.trace));
  if (!a.labels.empty()) attach_labels(events, load_labels(a.labels));
  save_events(events, ensure_parent(a.out));
  std::cerr << events.size() << " events\n";
  return 0;
}

struct TrainArgs {
  std::string events, out, lane = "all", history;
  std::uint64_t seed = 1;
  int epochs = 100;
  double lr = 0.01, momentum = 0.9;
  std::size_t batch = 16;
};

int cmd_train(const TrainArgs& a) {
  const auto lane = parse_lane(a.lane);
  std::vector<ClassifierImage> images;
  std::vector<VehicleClass> labels;
  for (const auto& f : event_files(a.events)) {
    for (const auto& e : load_events(f)) {
      if (!e.vehicle_class) continue;
      if (lane && e.lane != lane) continue;
      images.push_back(form_image(e));
      labels.push_back(*e.vehicle_class);
    }
  }
  TrainConfig cfg;
  cfg.seed = a.seed;
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.batch_size = a.batch;
  std::cerr << "training on " << images.size() << " labelled events\n";
  std::string history = "epoch,learning_rate,train_loss,validation_loss,validation_accuracy,rejected\n";
  const auto result = cnn_train(images, labels, cfg, [&](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%d\n", r.epoch, r.learning_rate,
                  r.train_loss, r.validation_loss, r.validation_accuracy, r.rejected ? 1 : 0);
    history += line;
    std::fprintf(stderr, "epoch %3d  lr %.5f  loss %.5f  val_loss %.5f  val_acc %.4f%s\n", r.epoch,
                 r.learning_rate, r.train_loss, r.validation_loss, r.validation_accuracy,
                 r.rejected ? "  (rolled back)" : "");
  });
  save_model(result.model, ensure_parent(a.out));
  if (!a.history.empty()) {
    std::FILE* f = std::fopen(a.history.c_str(), "wb");
    if (!f) throw IoError("cannot open '" + a.history + "' for writing");
    std::fwrite(history.data(), 1, history.size(), f);
    std::fclose(f);
  }
  std::fprintf(stderr, "best epoch %d, validation accuracy %.4f\n", result.best_epoch,
               result.best_validation_accuracy);
  return 0;
}

struct ClassifyArgs {
  std::string events, model, model2, fuse = "max-prob", out, knn_train;
  std::size_t k = 5;
};

int cmd_classify(const ClassifyArgs& a) {
  const auto events = load_all_events(a.events);
  std::vector<ClassifiedEvent> predictions;
  if (!a.knn_train.empty()) {
    std::vector<FeatureVector> features;
    std::vector<VehicleClass> labels;
    for (const auto& e : load_all_events(a.knn_train)) {
      if (!e.vehicle_class) continue;
      features.push_back(extract_baseline_features(e));
      labels.push_back(*e.vehicle_class);
    }
    KnnClassifier knn;
    knn.fit(features, labels);
    for (const auto& e : events) {
      ClassifiedEvent c;
      c.trace_id = e.trace_id;
      c.start_index = e.start_index;
      c.end_index = e.end_index;
      c.predicted = knn.classify(extract_baseline_features(e), a.k);
      c.lane = e.lane;
      predictions.push_back(std::move(c));
    }
  } else {
    if (a.model.empty()) throw DomainError("--model is required unless --knn-train is given");
    if (a.fuse != "max-prob") throw DomainError("unknown fusion rule '" + a.fuse + "'");
    std::vector<CnnModel> models{load_model(a.model)};
    if (!a.model2.empty()) models.push_back(load_model(a.model2));
    predictions = classify_events(events, models);
  }
  save_predictions(predictions, ensure_parent(a.out));
  return 0;
}

struct EvaluateArgs {
  std::string pred, truth, scheme = "five", report;
  std::size_t repeat = 0;
  std::uint64_t repeat_seed = 1;
  double fraction = 0.3;
};

int cmd_evaluate(const EvaluateArgs& a) {
  auto predictions = load_predictions(a.pred);
  TruthSet truth;
  if (fs::is_directory(a.truth)) {
    const std::string suffix = ".labels.jsonl";
    for (const auto& entry : fs::directory_iterator(a.truth)) {
      const auto name = entry.path().filename().string();
      if (name.size() > suffix.size() && name.ends_with(suffix)) {
        truth[name.substr(0, name.size() - suffix.size())] = load_labels(entry.path());
      }
    }
    if (truth.empty()) throw DataError("no *.labels.jsonl files in '" + a.truth + "'");
  } else {
    // A single label file covers every prediction.
    truth[""] = load_labels(a.truth);
    for (auto& p : predictions) p.trace_id.clear();
  }
  const auto scheme = parse_grouping_scheme(a.scheme);
  auto report = evaluate(predictions, truth, scheme);
  if (a.repeat > 0) report.repeat = repeat_accuracy(predictions, truth, scheme, a.repeat, a.fraction, a.repeat_seed);
  save_report(report, ensure_parent(a.report));
  std::fprintf(stderr, "detection %zu/%zu (%.4f), false positives %zu, %s accuracy %.4f\n",
               report.n_detected, report.n_passing, report.detection_accuracy,
               report.n_false_positive, a.scheme.c_str(), report.classification_accuracy);
  return 0;
}

struct PlotArgs {
  std::string series, out, title;
  int width = 960, height = 360;
};

int cmd_plot(const PlotArgs& a) {
  PlotOptions opt;
  opt.title = a.title;
  opt.width = a.width;
  opt.height = a.height;
  const auto svg = render_svg(load_series_csv(a.series), opt);
  std::FILE* f = std::fopen(ensure_parent(a.out).c_str(), "wb");
  if (!f) throw IoError("cannot open '" + a.out + "' for writing");
  std::fwrite(svg.data(), 1, svg.size(), f);
  std::fclose(f);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Roadside vehicle detection and classification from WiFi CSI traces"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write synthetic traces and their ground-truth labels");
  g->add_option("--scenario", gen.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = g->add_option("--seed", gen.seed, "Seed (overrides the scenario file's)");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.count, "Number of traces; trace i uses seed + i");

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Filter and PCA-reduce a trace; write the streams as CSV");
  p->add_option("--trace", pre.trace)->required()->check(CLI::ExistingFile);
  p->add_option("--out", pre.out)->required();
  p->add_option("--filter-mode", pre.filter_mode)->check(CLI::IsMember({"lowpass", "highpass"}));
  p->add_option("--cutoff", pre.cutoff, "Filter cutoff in Hz");
  p->add_option("--pca-k", pre.pca_k, "Principal components kept per pair")->check(CLI::Range(1, 30));

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "Detect vehicles and write event files");
  d->add_option("--trace", det.trace)->required()->check(CLI::ExistingFile);
  d->add_option("--labels", det.labels, "Ground-truth labels to attach")->check(CLI::ExistingFile);
  d->add_option("--out", det.out)->required();
  d->add_option("--omega", det.omega);
  d->add_option("--delta1", det.delta1);
  d->add_option("--delta2", det.delta2);
  d->add_option("--mad-multiplier", det.mad_multiplier);
  d->add_option("--centering", det.centering)->check(CLI::IsMember({"mean", "median"}));
  d->add_option("--phase-reduction", det.phase_reduction)
      ->check(CLI::IsMember({"mean", "single-subcarrier", "first-pca"}));
  d->add_option("--filter-mode", det.filter_mode)->check(CLI::IsMember({"lowpass", "highpass"}));

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the CNN on labelled events");
  t->add_option("--events", tr.events, "Event file or directory")->required()->check(CLI::ExistingPath);
  t->add_option("--out", tr.out)->required();
  t->add_option("--lane", tr.lane)->check(CLI::IsMember({"1", "2", "all"}));
  t->add_option("--seed", tr.seed);
  t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  t->add_option("--momentum", tr.momentum);
  t->add_option("--batch", tr.batch)->check(CLI::Range(2, 1 << 20));
  t->add_option("--history", tr.history, "Write per-epoch metrics as CSV");

  ClassifyArgs cl;
  auto* c = app.add_subcommand("classify", "Classify events with one or two models");
  c->add_option("--events", cl.events)->required()->check(CLI::ExistingPath);
  c->add_option("--model", cl.model)->check(CLI::ExistingFile);
  c->add_option("--model2", cl.model2)->check(CLI::ExistingFile);
  c->add_option("--fuse", cl.fuse)->check(CLI::IsMember({"max-prob"}));
  c->add_option("--out", cl.out)->required();
  c->add_option("--knn-train", cl.knn_train, "Use the kNN baseline trained on these events")
      ->check(CLI::ExistingPath);
  c->add_option("--k", cl.k)->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score predictions against ground truth");
  e->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  e->add_option("--truth", ev.truth, "Label file, or directory of <trace>.labels.jsonl")
      ->required()
      ->check(CLI::ExistingPath);
  e->add_option("--scheme", ev.scheme)->check(CLI::IsMember({"five", "sml", "car_truck"}));
  e->add_option("--report", ev.report)->required();
  e->add_option("--repeat", ev.repeat, "Resample the test split this many times");
  e->add_option("--repeat-seed", ev.repeat_seed);
  e->add_option("--fraction", ev.fraction, "Test fraction for --repeat");

  PlotArgs pl;
  auto* l = app.add_subcommand("plot", "Render a CSV series file as an SVG line chart");
  l->add_option("--series", pl.series)->required()->check(CLI::ExistingFile);
  l->add_option("--out", pl.out)->required();
  l->add_option("--title", pl.title);
  l->add_option("--width", pl.width)->check(CLI::Range(100, 10000));
  l->add_option("--height", pl.height)->check(CLI::Range(100, 10000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }
  gen.seed_given = seed_opt->count() > 0;

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (p->parsed()) return cmd_preprocess(pre);
    if (d->parsed()) return cmd_detect(det);
    if (t->parsed()) return cmd_train(tr);
    if (c->parsed()) return cmd_classify(cl);
    if (e->parsed()) return cmd_evaluate(ev);
    if (l->parsed()) return cmd_plot(pl);
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
