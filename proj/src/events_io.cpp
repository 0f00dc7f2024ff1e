#include <sstream>

#include <json.hpp>

#include "binio.hpp"
#include "wtraffic/detect.hpp"

namespace wtraffic {

std::filesystem::path event_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".bin";
  return p;
}

void save_events(std::span<const DetectionEvent> events, const std::filesystem::path& path) {
  std::string text;
  std::vector<unsigned char> rows;
  for (const auto& e : events) {
    if (e.amplitude_rows.rows() != e.phase_rows.rows() ||
        e.amplitude_rows.cols() != e.phase_rows.cols() ||
        e.amplitude_rows.cols() != static_cast<Eigen::Index>(e.length())) {
      throw InvariantError("event rows do not match the event window");
    }
    nlohmann::ordered_json j;
    j["start_index"] = e.start_index;
    j["end_index"] = e.end_index;
    if (e.lane) j["lane"] = *e.lane;
    if (e.vehicle_class) j["class"] = std::string(to_string(*e.vehicle_class));
    j["n_pairs"] = e.amplitude_rows.rows();
    j["sample_rate_hz"] = e.sample_rate_hz;
    j["baseline_mean"] = e.baseline_mean;
    if (!e.trace_id.empty()) j["trace"] = e.trace_id;
    text += j.dump();
    text += '\n';
    for (Eigen::Index p = 0; p < e.amplitude_rows.rows(); ++p) {
      for (Eigen::Index t = 0; t < e.amplitude_rows.cols(); ++t) {
        binio::put_f32(rows, static_cast<float>(e.amplitude_rows(p, t)));
        binio::put_f32(rows, static_cast<float>(e.phase_rows(p, t)));
      }
    }
  }
  binio::write_text(path.string(), text);
  binio::write_file(event_sidecar_path(path).string(), rows);
}

std::vector<DetectionEvent> load_events(const std::filesystem::path& path) {
  std::istringstream in(binio::read_text(path.string()));
  const auto bytes = binio::read_file(event_sidecar_path(path).string());
  binio::Reader rows(bytes.data(), bytes.size());
  std::vector<DetectionEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    DetectionEvent e;
    Eigen::Index n_pairs = 0;
    try {
      const auto j = nlohmann::json::parse(line);
      e.start_index = j.at("start_index").get<std::size_t>();
      e.end_index = j.at("end_index").get<std::size_t>();
      if (e.end_index < e.start_index) throw DomainError("end_index precedes start_index");
      if (j.contains("lane")) e.lane = j.at("lane").get<int>();
      if (j.contains("class")) e.vehicle_class = parse_vehicle_class(j.at("class").get<std::string>());
      n_pairs = j.at("n_pairs").get<Eigen::Index>();
      e.sample_rate_hz = j.at("sample_rate_hz").get<double>();
      e.baseline_mean = j.value("baseline_mean", 0.0);
      e.trace_id = j.value("trace", std::string());
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    } catch (const DomainError& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    const auto len = static_cast<Eigen::Index>(e.length());
    e.amplitude_rows.resize(n_pairs, len);
    e.phase_rows.resize(n_pairs, len);
    for (Eigen::Index p = 0; p < n_pairs; ++p) {
      for (Eigen::Index t = 0; t < len; ++t) {
        e.amplitude_rows(p, t) = rows.get_f32();
        e.phase_rows(p, t) = rows.get_f32();
      }
    }
    events.push_back(std::move(e));
  }
  if (rows.remaining() != 0) throw LengthError("event sidecar has trailing data");
  return events;
}

}  // namespace wtraffic
