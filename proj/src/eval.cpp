#include "wtraffic/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "binio.hpp"

namespace wtraffic {

Matching match_events(std::span<const IndexWindow> detected, std::span<const IndexWindow> truth) {
  struct Candidate {
    std::size_t overlap, det, label;
  };
  std::vector<Candidate> candidates;
  for (std::size_t d = 0; d < detected.size(); ++d) {
    for (std::size_t l = 0; l < truth.size(); ++l) {
      const std::size_t lo = std::max(detected[d].start, truth[l].start);
      const std::size_t hi = std::min(detected[d].end, truth[l].end);
      if (lo <= hi) candidates.push_back({hi - lo + 1, d, l});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    return std::tie(a.det, a.label) < std::tie(b.det, b.label);
  });
  std::vector<bool> det_used(detected.size()), label_used(truth.size());
  Matching m;
  for (const auto& c : candidates) {
    if (det_used[c.det] || label_used[c.label]) continue;
    det_used[c.det] = label_used[c.label] = true;
    m.pairs.emplace_back(c.det, c.label);
  }
  std::sort(m.pairs.begin(), m.pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  for (std::size_t d = 0; d < detected.size(); ++d) {
    if (!det_used[d]) m.false_positives.push_back(d);
  }
  for (std::size_t l = 0; l < truth.size(); ++l) {
    if (!label_used[l]) m.misses.push_back(l);
  }
  return m;
}

namespace {

constexpr std::array<GroupingScheme, 3> kSchemes = {GroupingScheme::Five, GroupingScheme::Sml,
                                                    GroupingScheme::CarTruck};

/// A detected vehicle: its true label and its prediction.
struct Hit {
  const GroundTruthLabel* label;
  const ClassifiedEvent* prediction;
};

struct Matched {
  std::vector<Hit> hits;
  std::size_t n_passing = 0;
  std::size_t n_false_positive = 0;
  std::map<int, std::size_t> passing_by_lane;
};

Matched match_all(std::span<const ClassifiedEvent> predictions, const TruthSet& truth) {
  std::map<std::string, std::vector<const ClassifiedEvent*>> by_trace;
  for (const auto& p : predictions) {
    if (!truth.contains(p.trace_id)) {
      throw DataError("prediction for trace '" + p.trace_id + "' has no ground truth");
    }
    by_trace[p.trace_id].push_back(&p);
  }
  Matched out;
  for (const auto& [id, labels] : truth) {
    out.n_passing += labels.size();
    for (const auto& l : labels) ++out.passing_by_lane[l.lane];
    const auto& preds = by_trace[id];
    std::vector<IndexWindow> det, tru;
    for (const auto* p : preds) det.push_back({p->start_index, p->end_index});
    for (const auto& l : labels) tru.push_back({l.start_index, l.end_index});
    const auto m = match_events(det, tru);
    for (const auto& [d, l] : m.pairs) out.hits.push_back({&labels[l], preds[d]});
    out.n_false_positive += m.false_positives.size();
  }
  return out;
}

bool correct(const Hit& h, GroupingScheme scheme) {
  return group_prediction(h.label->vehicle_class, scheme) ==
         group_prediction(h.prediction->predicted, scheme);
}

double accuracy(std::span<const Hit> hits, GroupingScheme scheme) {
  if (hits.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& h : hits) n += correct(h, scheme);
  return static_cast<double>(n) / static_cast<double>(hits.size());
}

}  // namespace

EvalReport evaluate(std::span<const ClassifiedEvent> predictions, const TruthSet& truth,
                    GroupingScheme scheme) {
  const auto m = match_all(predictions, truth);
  if (m.n_passing == 0) throw DomainError("no passing vehicles: accuracy is undefined");
  EvalReport r;
  r.scheme = scheme;
  r.n_passing = m.n_passing;
  r.n_detected = m.hits.size();
  r.n_false_positive = m.n_false_positive;
  r.detection_accuracy = static_cast<double>(r.n_detected) / static_cast<double>(r.n_passing);
  for (auto s : kSchemes) r.scheme_accuracy[std::string(to_string(s))] = accuracy(m.hits, s);
  r.classification_accuracy = accuracy(m.hits, scheme);
  for (const auto& h : m.hits) {
    ++r.confusion[static_cast<std::size_t>(ordinal(h.label->vehicle_class))]
                 [static_cast<std::size_t>(ordinal(h.prediction->predicted))];
  }
  for (const auto& [lane, passing] : m.passing_by_lane) {
    LaneBreakdown b;
    b.lane = lane;
    b.n_passing = passing;
    for (const auto& h : m.hits) {
      if (h.label->lane != lane) continue;
      ++b.n_detected;
      b.n_correct += correct(h, GroupingScheme::Five);
    }
    b.detection_accuracy = static_cast<double>(b.n_detected) / static_cast<double>(b.n_passing);
    b.classification_accuracy =
        b.n_detected == 0 ? 0.0 : static_cast<double>(b.n_correct) / static_cast<double>(b.n_detected);
    r.lanes.push_back(b);
  }
  return r;
}

RepeatSummary repeat_accuracy(std::span<const ClassifiedEvent> predictions, const TruthSet& truth,
                              GroupingScheme scheme, std::size_t repeats, double fraction,
                              std::uint64_t seed) {
  if (repeats < 1) throw DomainError("repeat count must be positive");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("test fraction must be in (0, 1]");
  auto m = match_all(predictions, truth);
  if (m.hits.empty()) throw DomainError("no detected vehicles to resample");
  const auto n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m.hits.size()))));
  std::mt19937_64 engine(seed);
  std::vector<double> acc;
  acc.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    std::shuffle(m.hits.begin(), m.hits.end(), engine);
    acc.push_back(accuracy(std::span<const Hit>(m.hits).first(n_test), scheme));
  }
  RepeatSummary s;
  s.repeats = repeats;
  s.fraction = fraction;
  s.seed = seed;
  double sum = 0.0;
  for (double a : acc) sum += a;
  s.mean = sum / static_cast<double>(repeats);
  double sq = 0.0;
  for (double a : acc) sq += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(repeats));
  s.min = *std::min_element(acc.begin(), acc.end());
  s.max = *std::max_element(acc.begin(), acc.end());
  return s;
}

// --------------------------------------------------------------------- I/O

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["scheme"] = std::string(to_string(r.scheme));
  j["n_passing"] = r.n_passing;
  j["n_detected"] = r.n_detected;
  j["n_false_positive"] = r.n_false_positive;
  j["detection_accuracy"] = r.detection_accuracy;
  j["classification_accuracy"] = r.classification_accuracy;
  nlohmann::ordered_json schemes;
  for (auto s : kSchemes) {
    const std::string name(to_string(s));
    if (r.scheme_accuracy.contains(name)) schemes[name] = r.scheme_accuracy.at(name);
  }
  j["scheme_accuracy"] = schemes;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (auto c : kAllClasses) classes.push_back(std::string(to_string(c)));
  j["classes"] = classes;
  j["confusion"] = r.confusion;
  nlohmann::ordered_json lanes = nlohmann::ordered_json::array();
  for (const auto& b : r.lanes) {
    nlohmann::ordered_json jl;
    jl["lane"] = b.lane;
    jl["n_passing"] = b.n_passing;
    jl["n_detected"] = b.n_detected;
    jl["n_correct"] = b.n_correct;
    jl["detection_accuracy"] = b.detection_accuracy;
    jl["classification_accuracy"] = b.classification_accuracy;
    lanes.push_back(jl);
  }
  j["lanes"] = lanes;
  if (r.repeat) {
    nlohmann::ordered_json jr;
    jr["repeats"] = r.repeat->repeats;
    jr["fraction"] = r.repeat->fraction;
    jr["seed"] = r.repeat->seed;
    jr["mean"] = r.repeat->mean;
    jr["std"] = r.repeat->std;
    jr["min"] = r.repeat->min;
    jr["max"] = r.repeat->max;
    j["repeat"] = jr;
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.scheme = parse_grouping_scheme(j.at("scheme").get<std::string>());
    r.n_passing = j.at("n_passing").get<std::size_t>();
    r.n_detected = j.at("n_detected").get<std::size_t>();
    r.n_false_positive = j.at("n_false_positive").get<std::size_t>();
    r.detection_accuracy = j.at("detection_accuracy").get<double>();
    r.classification_accuracy = j.at("classification_accuracy").get<double>();
    for (const auto& [k, v] : j.at("scheme_accuracy").items()) {
      (void)parse_grouping_scheme(k);
      r.scheme_accuracy[k] = v.get<double>();
    }
    r.confusion = j.at("confusion").get<ConfusionMatrix>();
    for (const auto& jl : j.at("lanes")) {
      LaneBreakdown b;
      b.lane = jl.at("lane").get<int>();
      b.n_passing = jl.at("n_passing").get<std::size_t>();
      b.n_detected = jl.at("n_detected").get<std::size_t>();
      b.n_correct = jl.at("n_correct").get<std::size_t>();
      b.detection_accuracy = jl.at("detection_accuracy").get<double>();
      b.classification_accuracy = jl.at("classification_accuracy").get<double>();
      r.lanes.push_back(b);
    }
    if (j.contains("repeat")) {
      const auto& jr = j.at("repeat");
      RepeatSummary s;
      s.repeats = jr.at("repeats").get<std::size_t>();
      s.fraction = jr.at("fraction").get<double>();
      s.seed = jr.at("seed").get<std::uint64_t>();
      s.mean = jr.at("mean").get<double>();
      s.std = jr.at("std").get<double>();
      s.min = jr.at("min").get<double>();
      s.max = jr.at("max").get<double>();
      r.repeat = s;
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("bad report: ") + e.what());
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  binio::write_text(path.string(), report_to_json(report));
}

EvalReport load_report(const std::filesystem::path& path) {
  return report_from_json(binio::read_text(path.string()));
}

void save_predictions(std::span<const ClassifiedEvent> predictions, const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    if (!p.trace_id.empty()) j["trace"] = p.trace_id;
    j["start_index"] = p.start_index;
    j["end_index"] = p.end_index;
    j["class"] = std::string(to_string(p.predicted));
    if (p.probabilities.size() != 0) {
      j["probabilities"] = std::vector<double>(p.probabilities.data(),
                                               p.probabilities.data() + p.probabilities.size());
    }
    if (p.lane) j["lane"] = *p.lane;
    text += j.dump();
    text += '\n';
  }
  binio::write_text(path.string(), text);
}

std::vector<ClassifiedEvent> load_predictions(const std::filesystem::path& path) {
  std::istringstream in(binio::read_text(path.string()));
  std::vector<ClassifiedEvent> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClassifiedEvent p;
      p.trace_id = j.value("trace", std::string());
      p.start_index = j.at("start_index").get<std::size_t>();
      p.end_index = j.at("end_index").get<std::size_t>();
      if (p.end_index < p.start_index) throw DomainError("end_index precedes start_index");
      p.predicted = parse_vehicle_class(j.at("class").get<std::string>());
      if (j.contains("probabilities")) {
        const auto v = j.at("probabilities").get<std::vector<double>>();
        p.probabilities = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      if (j.contains("lane")) p.lane = j.at("lane").get<int>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DomainError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace wtraffic
