#include "wtraffic/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "binio.hpp"

namespace wtraffic {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

SeriesTable load_series_csv(const std::filesystem::path& path) {
  std::istringstream in(binio::read_text(path.string()));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV file");
  SeriesTable t;
  t.names = split_csv(line);
  if (t.names.size() < 2) throw FormatError(path.string() + ": need an x column and at least one series");
  t.columns.resize(t.names.size());
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != t.names.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.names.size()) + " fields");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto* b = cells[c].data();
      const auto* e = b + cells[c].size();
      const auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || ptr != e) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cells[c] + "'");
      }
      t.columns[c].push_back(v);
    }
  }
  return t;
}

void save_series_csv(const SeriesTable& table, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    if (c) out += ',';
    out += table.names[c];
  }
  out += '\n';
  char buf[40];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, table.columns[c][r]);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  binio::write_text(path.string(), out);
}

std::string render_svg(const SeriesTable& table, const PlotOptions& options) {
  if (table.columns.size() < 2 || table.rows() < 2) {
    throw DomainError("plot needs an x column, one series and two rows");
  }
  const auto& xs = table.columns.front();
  const std::size_t n = xs.size();
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (double x : xs) {
    if (std::isfinite(x)) xmin = std::min(xmin, x), xmax = std::max(xmax, x);
  }
  for (std::size_t c = 1; c < table.columns.size(); ++c) {
    for (double y : table.columns[c]) {
      if (std::isfinite(y)) ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;

  const double left = 70, right = 20, top = options.title.empty() ? 20 : 40, bottom = 40;
  const double pw = options.width - left - right, ph = options.height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "<text x=\"" << options.width / 2 << "\" y=\"24\" text-anchor=\"middle\">"
        << escape_xml(options.title) << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x=\"" << px(fx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
        << format_number(fx) << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">"
        << format_number(fy) << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << options.height - 6
      << "\" text-anchor=\"middle\">" << escape_xml(table.names.front()) << "</text>\n";

  const std::size_t buckets = std::max<std::size_t>(1, options.max_points / 2);
  for (std::size_t c = 1; c < table.columns.size(); ++c) {
    const auto& ys = table.columns[c];
    std::ostringstream pts;
    auto emit = [&](std::size_t i) {
      if (std::isfinite(xs[i]) && std::isfinite(ys[i])) pts << format_number(px(xs[i])) << ',' << format_number(py(ys[i])) << ' ';
    };
    if (n <= options.max_points) {
      for (std::size_t i = 0; i < n; ++i) emit(i);
    } else {
      for (std::size_t b = 0; b < buckets; ++b) {
        const std::size_t s = b * n / buckets, e = (b + 1) * n / buckets;
        std::size_t lo = s, hi = s;
        for (std::size_t i = s; i < e; ++i) {
          if (ys[i] < ys[lo]) lo = i;
          if (ys[i] > ys[hi]) hi = i;
        }
        emit(std::min(lo, hi));
        if (lo != hi) emit(std::max(lo, hi));
      }
    }
    const char* colour = kColours[(c - 1) % std::size(kColours)];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\""
        << pts.str() << "\"/>\n";
    svg << "<text x=\"" << left + 8 << "\" y=\"" << top + 14 * static_cast<double>(c) << "\" fill=\""
        << colour << "\">" << escape_xml(table.names[c]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace wtraffic
