#include "nrl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nrl/harness.hpp"

namespace nrl {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

std::string px(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

PlotSeries band_over(const std::string& label, const std::vector<std::vector<double>>& rows) {
  PlotSeries s;
  s.label = label;
  std::size_t len = rows.front().size();
  for (const auto& r : rows) len = std::min(len, r.size());
  for (std::size_t i = 0; i < len; ++i) {
    double total = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : rows) {
      total += r[i];
      lo = std::min(lo, r[i]);
      hi = std::max(hi, r[i]);
    }
    s.x.push_back(static_cast<double>(i));
    s.mean.push_back(total / static_cast<double>(rows.size()));
    s.min.push_back(lo);
    s.max.push_back(hi);
  }
  return s;
}

std::vector<std::pair<double, double>> read_error_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("passes,error", 0) != 0) {
    throw std::runtime_error(path.string() + ": expected a passes,error header");
  }
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double passes = 0.0, error = 0.0;
    char comma = 0;
    if (!(row >> passes >> comma >> error) || comma != ',') {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    rows.emplace_back(passes, error);
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no rows");
  return rows;
}

}  // namespace

std::string_view to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::learning_curve: return "learning_curve";
    case PlotKind::final_bar: return "final_bar";
    case PlotKind::approx_error: return "approx_error";
  }
  return "?";
}

PlotKind parse_plot_kind(std::string_view name) {
  if (name == "learning_curve") return PlotKind::learning_curve;
  if (name == "final_bar") return PlotKind::final_bar;
  if (name == "approx_error") return PlotKind::approx_error;
  throw std::invalid_argument("unknown plot kind '" + std::string(name) + "'");
}

std::string series_label(const std::filesystem::path& metrics_file) {
  std::string stem = metrics_file.stem().string();
  if (auto pos = stem.rfind("_seed"); pos != std::string::npos) stem.erase(pos);
  std::replace(stem.begin(), stem.end(), ',', '_');
  return stem;
}

PlotData build_plot_data(PlotKind kind, const std::vector<std::filesystem::path>& inputs,
                         std::size_t window) {
  if (inputs.empty()) throw std::invalid_argument("plot: no input files");
  PlotData data;
  data.kind = kind;

  if (kind == PlotKind::approx_error) {
    for (const auto& path : inputs) {
      PlotSeries s;
      s.label = series_label(path);
      for (const auto& [passes, error] : read_error_curve(path)) {
        s.x.push_back(passes);
        s.mean.push_back(error);
        s.min.push_back(error);
        s.max.push_back(error);
      }
      data.series.push_back(std::move(s));
    }
    return data;
  }

  // Group seeds by label, keeping first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunMetrics>> groups;
  for (const auto& path : inputs) {
    const std::string label = series_label(path);
    if (!groups.contains(label)) order.push_back(label);
    RunMetrics run = load_metrics_csv(path);
    if (run.returns.empty()) throw std::runtime_error(path.string() + ": failed run has no returns");
    groups[label].push_back(std::move(run));
  }

  for (std::size_t g = 0; g < order.size(); ++g) {
    const auto& runs = groups[order[g]];
    if (kind == PlotKind::learning_curve) {
      std::vector<std::vector<double>> smoothed;
      for (const auto& r : runs) smoothed.push_back(moving_average(r.returns, window));
      data.series.push_back(band_over(order[g], smoothed));
    } else {
      std::vector<std::vector<double>> finals;
      for (const auto& r : runs) finals.push_back({final_performance(r.returns)});
      PlotSeries s = band_over(order[g], finals);
      s.x = {static_cast<double>(g)};
      data.series.push_back(std::move(s));
    }
  }
  return data;
}

void write_plot_csv(std::ostream& out, const PlotData& data) {
  out << "series,x,mean,min,max\n";
  for (const auto& s : data.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << s.label << ',' << fmt(s.x[i]) << ',' << fmt(s.mean[i]) << ',' << fmt(s.min[i]) << ','
          << fmt(s.max[i]) << '\n';
    }
  }
}

PlotData read_plot_csv(std::istream& in, PlotKind kind) {
  PlotData data;
  data.kind = kind;
  std::string line;
  if (!std::getline(in, line) || line != "series,x,mean,min,max") {
    throw std::runtime_error("plot csv: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string label, field;
    std::getline(row, label, ',');
    double values[4];
    for (double& v : values) {
      if (!std::getline(row, field, ',')) throw std::runtime_error("plot csv: short row '" + line + "'");
      v = std::stod(field);
    }
    if (data.series.empty() || data.series.back().label != label) {
      data.series.push_back(PlotSeries{label, {}, {}, {}, {}});
    }
    auto& s = data.series.back();
    s.x.push_back(values[0]);
    s.mean.push_back(values[1]);
    s.min.push_back(values[2]);
    s.max.push_back(values[3]);
  }
  return data;
}

void write_svg(std::ostream& out, const PlotData& data, std::string_view title) {
  constexpr double width = 800, height = 480;
  constexpr double left = 70, right = 200, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : data.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.min[i]);
      y_hi = std::max(y_hi, s.max[i]);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  const bool bars = data.kind == PlotKind::final_bar;
  const bool log_x = data.kind == PlotKind::approx_error && x_lo > 0.0;
  if (bars) {
    x_lo = -0.5;
    x_hi = static_cast<double>(data.series.size()) - 0.5;
    y_lo = std::min(0.0, y_lo);
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) {
    y_hi += 0.5 * std::max(1.0, std::abs(y_hi));
    y_lo -= 0.5 * std::max(1.0, std::abs(y_lo));
  }
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_hi += y_pad;
  if (!bars) y_lo -= y_pad;

  const auto sx = [&](double x) {
    if (log_x) return left + plot_w * (std::log(x) - std::log(x_lo)) / (std::log(x_hi) - std::log(x_lo));
    return left + plot_w * (x - x_lo) / (x_hi - x_lo);
  };
  const auto sy = [&](double y) { return top + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo)); };

  out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << width << R"(" height=")" << height
      << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  out << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  if (!title.empty()) {
    out << R"(<text x=")" << px(left + plot_w / 2) << R"(" y="22" text-anchor="middle" font-size="15">)"
        << escape_xml(title) << "</text>\n";
  }
  // axes and ticks
  out << R"(<g stroke="black" fill="none"><line x1=")" << px(left) << R"(" y1=")" << px(top + plot_h)
      << R"(" x2=")" << px(left + plot_w) << R"(" y2=")" << px(top + plot_h) << R"("/><line x1=")"
      << px(left) << R"(" y1=")" << px(top) << R"(" x2=")" << px(left) << R"(" y2=")"
      << px(top + plot_h) << R"("/></g>)" << '\n';
  for (int t = 0; t <= 5; ++t) {
    const double yv = y_lo + (y_hi - y_lo) * t / 5.0;
    out << R"(<text x=")" << px(left - 6) << R"(" y=")" << px(sy(yv) + 4)
        << R"(" text-anchor="end">)" << std::setprecision(3) << yv << "</text>\n";
  }
  if (!bars) {
    for (int t = 0; t <= 5; ++t) {
      const double xv = log_x ? std::exp(std::log(x_lo) + (std::log(x_hi) - std::log(x_lo)) * t / 5.0)
                              : x_lo + (x_hi - x_lo) * t / 5.0;
      out << R"(<text x=")" << px(sx(xv)) << R"(" y=")" << px(top + plot_h + 18)
          << R"(" text-anchor="middle">)" << std::setprecision(3) << xv << "</text>\n";
    }
  }
  const char* x_name = data.kind == PlotKind::approx_error ? "noisy passes" : "episode";
  const char* y_name = data.kind == PlotKind::approx_error ? "mean absolute error" : "return";
  if (!bars) {
    out << R"(<text x=")" << px(left + plot_w / 2) << R"(" y=")" << px(height - 15)
        << R"(" text-anchor="middle">)" << x_name << "</text>\n";
  }
  out << "<text transform=\"translate(18," << px(top + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << (bars ? "final performance" : y_name)
      << "</text>\n";

  for (std::size_t k = 0; k < data.series.size(); ++k) {
    const auto& s = data.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (bars) {
      const double cx = sx(s.x.front());
      const double half = 0.3 * plot_w / static_cast<double>(data.series.size());
      out << R"(<rect x=")" << px(cx - half) << R"(" y=")" << px(sy(s.mean.front())) << R"(" width=")"
          << px(2 * half) << R"(" height=")" << px(sy(y_lo) - sy(s.mean.front())) << R"(" fill=")"
          << color << R"("/>)" << '\n';
      out << R"(<line x1=")" << px(cx) << R"(" y1=")" << px(sy(s.min.front())) << R"(" x2=")"
          << px(cx) << R"(" y2=")" << px(sy(s.max.front())) << R"(" stroke="black"/>)" << '\n';
    } else {
      out << R"(<polygon fill=")" << color << R"(" fill-opacity="0.2" stroke="none" points=")";
      for (std::size_t i = 0; i < s.x.size(); ++i) out << px(sx(s.x[i])) << ',' << px(sy(s.max[i])) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) out << px(sx(s.x[i])) << ',' << px(sy(s.min[i])) << ' ';
      out << R"("/>)" << '\n';
      out << R"(<polyline fill="none" stroke=")" << color << R"(" stroke-width="1.5" points=")";
      for (std::size_t i = 0; i < s.x.size(); ++i) out << px(sx(s.x[i])) << ',' << px(sy(s.mean[i])) << ' ';
      out << R"("/>)" << '\n';
    }
    const double ly = top + 10 + 20.0 * static_cast<double>(k);
    out << R"(<rect x=")" << px(left + plot_w + 15) << R"(" y=")" << px(ly - 8)
        << R"(" width="12" height="12" fill=")" << color << R"("/>)" << '\n';
    out << R"(<text x=")" << px(left + plot_w + 32) << R"(" y=")" << px(ly + 2) << R"(">)"
        << escape_xml(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

PlotData emit_plot(PlotKind kind, const std::vector<std::filesystem::path>& inputs,
                   const std::filesystem::path& svg_path, std::size_t window) {
  PlotData data = build_plot_data(kind, inputs, window);
  if (svg_path.has_parent_path()) std::filesystem::create_directories(svg_path.parent_path());
  std::ofstream svg(svg_path);
  if (!svg) throw std::runtime_error("cannot write " + svg_path.string());
  write_svg(svg, data, to_string(kind));
  std::filesystem::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  write_plot_csv(csv, data);
  return data;
}

void write_error_curve_csv(std::ostream& out,
                           const std::vector<std::pair<std::size_t, double>>& curve) {
  out << "passes,error\n";
  for (const auto& [passes, error] : curve) out << passes << ',' << fmt(error) << '\n';
}

}  // namespace nrl
