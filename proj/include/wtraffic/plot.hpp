#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wtraffic {

/// Columns of a CSV file with a header row; the first column is the x axis.
struct SeriesTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
};

SeriesTable load_series_csv(const std::filesystem::path& path);
void save_series_csv(const SeriesTable& table, const std::filesystem::path& path);

struct PlotOptions {
  int width = 960;
  int height = 360;
  std::string title;
  /// Longer series are reduced to per-bucket minima and maxima.
  std::size_t max_points = 2000;
};

/// Line chart of every column against the first.
std::string render_svg(const SeriesTable& table, const PlotOptions& options = {});

}  // namespace wtraffic
