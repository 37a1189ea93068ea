#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nrl {

enum class PlotKind { learning_curve, final_bar, approx_error };

std::string_view to_string(PlotKind kind);
PlotKind parse_plot_kind(std::string_view name);

/// One labeled series: a mean line with a min–max band.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;

  friend bool operator==(const PlotSeries&, const PlotSeries&) = default;
};

struct PlotData {
  PlotKind kind = PlotKind::learning_curve;
  std::vector<PlotSeries> series;

  friend bool operator==(const PlotData&, const PlotData&) = default;
};

/// Series label for a metrics file: the file stem up to `_seed`.
std::string series_label(const std::filesystem::path& metrics_file);

/// learning_curve and final_bar read `episode,return,steps` metrics files and
/// group them by series label; approx_error reads `passes,error` files.
/// Curves are smoothed with a trailing moving average of `window` episodes.
PlotData build_plot_data(PlotKind kind, const std::vector<std::filesystem::path>& inputs,
                         std::size_t window = 50);

/// `series,x,mean,min,max`, round-trip precision.
void write_plot_csv(std::ostream& out, const PlotData& data);
PlotData read_plot_csv(std::istream& in, PlotKind kind);

void write_svg(std::ostream& out, const PlotData& data, std::string_view title = {});

/// Builds the plot, writes the SVG to `svg_path` and the data next to it with
/// a .csv extension.
PlotData emit_plot(PlotKind kind, const std::vector<std::filesystem::path>& inputs,
                   const std::filesystem::path& svg_path, std::size_t window = 50);

/// `passes,error` rows as produced by clean_pass_error_curve.
void write_error_curve_csv(std::ostream& out,
                           const std::vector<std::pair<std::size_t, double>>& curve);

}  // namespace nrl
