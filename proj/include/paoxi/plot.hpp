#pragma once

// CSV tables and deterministic SVG line plots.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace paoxi {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws ParseError when the column is absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Plain comma-separated text; lines starting with '#' are comments. No quoting.
CsvTable parse_csv(std::string_view text);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  int width = 640;
  int height = 420;
};

/// Same input, same bytes. Throws ConfigError when there is nothing to draw.
std::string line_plot_svg(const std::vector<Series>& series, const PlotSpec& spec);

}  // namespace paoxi
