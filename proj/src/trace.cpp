#include "wtraffic/trace.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "binio.hpp"

namespace wtraffic {

namespace binio {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace binio

CsiTrace::CsiTrace(std::size_t n_packets, std::size_t n_pairs, double sample_rate_hz,
                   std::vector<Sample> values)
    : n_packets_(n_packets),
      n_pairs_(n_pairs),
      sample_rate_hz_(sample_rate_hz),
      values_(std::move(values)) {
  if (n_packets_ < 1) throw InvariantError("trace must hold at least one packet");
  if (n_pairs_ < 1 || n_pairs_ > 255) throw InvariantError("antenna pair count must be in [1, 255]");
  if (!(sample_rate_hz_ > 0.0)) throw InvariantError("sample rate must be positive");
  if (values_.size() != n_packets_ * n_pairs_ * kSubcarriers) {
    throw InvariantError("value count does not match n_packets x n_pairs x 30");
  }
}

CsiTrace load_trace(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path.string());
  binio::Reader in(bytes.data(), bytes.size());
  if (bytes.size() < 4 || in.get_bytes(4) != "CSI1") {
    throw FormatError("'" + path.string() + "' is not a CSI trace (bad magic)");
  }
  const auto version = in.get_uint<std::uint16_t>();
  if (version != kTraceVersion) {
    throw FormatError("unsupported trace version " + std::to_string(version));
  }
  const auto n_packets = in.get_uint<std::uint32_t>();
  const auto n_pairs = in.get_uint<std::uint8_t>();
  const auto n_sub = in.get_uint<std::uint8_t>();
  const double rate = in.get_f64();
  if (n_sub != kSubcarriers) {
    throw ShapeError("unsupported shape: " + std::to_string(n_sub) + " subcarriers");
  }
  const std::size_t count = std::size_t{n_packets} * n_pairs * kSubcarriers;
  if (in.remaining() < count * 8) {
    throw LengthError("trace payload truncated: header declares " +
                      std::to_string(n_packets) + " packets");
  }
  std::vector<CsiTrace::Sample> values(count);
  for (auto& v : values) {
    const float re = in.get_f32();
    const float im = in.get_f32();
    v = {re, im};
  }
  return CsiTrace(n_packets, n_pairs, rate, std::move(values));
}

void save_trace(const CsiTrace& trace, const std::filesystem::path& path) {
  std::vector<unsigned char> out;
  out.reserve(kTraceHeaderSize + trace.values().size() * 8);
  binio::put_bytes(out, "CSI1");
  binio::put_uint<std::uint16_t>(out, kTraceVersion);
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(trace.n_packets()));
  binio::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(trace.n_pairs()));
  binio::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(trace.n_sub()));
  binio::put_f64(out, trace.sample_rate_hz());
  for (const auto& v : trace.values()) {
    binio::put_f32(out, v.real());
    binio::put_f32(out, v.imag());
  }
  binio::write_file(path.string(), out);
}

std::vector<GroundTruthLabel> load_labels(const std::filesystem::path& path) {
  std::istringstream in(binio::read_text(path.string()));
  std::vector<GroundTruthLabel> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GroundTruthLabel l;
      l.event_id = j.at("event_id").get<int>();
      l.start_index = j.at("start_index").get<std::size_t>();
      l.end_index = j.at("end_index").get<std::size_t>();
      l.vehicle_class = parse_vehicle_class(j.at("class").get<std::string>());
      l.lane = j.at("lane").get<int>();
      if (l.lane != 1 && l.lane != 2) throw DomainError("lane must be 1 or 2");
      if (l.start_index >= l.end_index) throw DomainError("start_index must precede end_index");
      labels.push_back(l);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DomainError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

void save_labels(std::span<const GroundTruthLabel> labels,
                 const std::filesystem::path& path) {
  std::string text;
  for (const auto& l : labels) {
    nlohmann::ordered_json j;
    j["event_id"] = l.event_id;
    j["start_index"] = l.start_index;
    j["end_index"] = l.end_index;
    j["class"] = std::string(to_string(l.vehicle_class));
    j["lane"] = l.lane;
    text += j.dump();
    text += '\n';
  }
  binio::write_text(path.string(), text);
}

namespace {

void check_pair(const CsiTrace& trace, std::size_t pair) {
  if (pair >= trace.n_pairs()) {
    throw IndexError("antenna pair " + std::to_string(pair) + " out of range (trace has " +
                     std::to_string(trace.n_pairs()) + ")");
  }
}

}  // namespace

AmplitudeMatrix extract_amplitude(const CsiTrace& trace, std::size_t pair) {
  check_pair(trace, pair);
  const auto n = static_cast<Eigen::Index>(trace.n_packets());
  AmplitudeMatrix a(n, static_cast<Eigen::Index>(kSubcarriers));
  for (Eigen::Index p = 0; p < n; ++p) {
    const auto row = trace.row(static_cast<std::size_t>(p), pair);
    for (std::size_t s = 0; s < kSubcarriers; ++s) {
      const double re = row[s].real();
      const double im = row[s].imag();
      a(p, static_cast<Eigen::Index>(s)) = std::sqrt(re * re + im * im);
    }
  }
  return a;
}

PhaseMatrix extract_phase(const CsiTrace& trace, std::size_t pair) {
  return extract_phase(trace, pair, 0, trace.n_packets());
}

PhaseMatrix extract_phase(const CsiTrace& trace, std::size_t pair, std::size_t begin,
                          std::size_t end) {
  check_pair(trace, pair);
  if (begin > end || end > trace.n_packets()) {
    throw IndexError("packet range out of bounds");
  }
  PhaseMatrix ph(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(kSubcarriers));
  for (std::size_t p = begin; p < end; ++p) {
    const auto row = trace.row(p, pair);
    for (std::size_t s = 0; s < kSubcarriers; ++s) {
      ph(static_cast<Eigen::Index>(p - begin), static_cast<Eigen::Index>(s)) =
          principal_phase(row[s].real(), row[s].imag());
    }
  }
  return ph;
}

}  // namespace wtraffic
