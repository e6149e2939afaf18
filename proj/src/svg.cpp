#include "mgtad/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mgtad::svg {

namespace {

constexpr double kWidth = 360, kHeight = 260;
constexpr double kLeft = 48, kRight = 12, kTop = 30, kBottom = 56;
const char* const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double chart_max(const BarChart& c) {
  if (c.y_max) return *c.y_max;
  double m = 0.0;
  for (std::size_t i = 0; i < c.categories.size(); ++i) {
    double stack = 0.0;
    for (const auto& s : c.series) {
      const double v = i < s.values.size() && s.values[i] ? *s.values[i] : 0.0;
      if (c.stacked) {
        stack += v;
      } else {
        m = std::max(m, v);
      }
    }
    m = std::max(m, stack);
  }
  return m > 0.0 ? m : 1.0;
}

void panel(std::ostringstream& out, const BarChart& c, double x0) {
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  const double y_max = chart_max(c);
  const double base_y = kTop + plot_h;
  auto y_of = [&](double v) { return base_y - plot_h * std::clamp(v / y_max, 0.0, 1.0); };

  out << "<g transform=\"translate(" << num(x0) << ",0)\">\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\" "
      << "font-size=\"13\">" << escape(c.title) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_max * i / 4.0, y = y_of(v);
    out << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + plot_w) << "\" y1=\""
        << num(y) << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << num(kLeft - 4) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_tick(v) << "</text>\n";
  }
  if (!c.y_label.empty()) {
    out << "<text transform=\"translate(12," << num(kTop + plot_h / 2)
        << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"11\">" << escape(c.y_label)
        << "</text>\n";
  }

  const std::size_t n = c.categories.size();
  const double slot = n ? plot_w / n : plot_w;
  const std::size_t per_slot = c.stacked || c.series.empty() ? 1 : c.series.size();
  const double bar_w = slot * 0.8 / per_slot;
  for (std::size_t i = 0; i < n; ++i) {
    const double sx = kLeft + slot * i + slot * 0.1;
    double stack = 0.0;
    for (std::size_t s = 0; s < c.series.size(); ++s) {
      const auto& vals = c.series[s].values;
      if (i >= vals.size() || !vals[i]) continue;
      const double v = *vals[i];
      const double top = y_of(c.stacked ? stack + v : v);
      const double bottom = c.stacked ? y_of(stack) : base_y;
      const double x = c.stacked ? sx : sx + bar_w * s;
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\"" << num(bar_w)
          << "\" height=\"" << num(std::max(0.0, bottom - top)) << "\" fill=\""
          << kPalette[s % std::size(kPalette)] << "\"><title>" << escape(c.series[s].name)
          << ": " << fmt_tick(v) << "</title></rect>\n";
      stack += v;
    }
    out << "<text x=\"" << num(kLeft + slot * (i + 0.5)) << "\" y=\"" << num(base_y + 14)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(c.categories[i])
        << "</text>\n";
  }
  out << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kLeft + plot_w) << "\" y1=\""
      << num(base_y) << "\" y2=\"" << num(base_y) << "\" stroke=\"#333\"/>\n";

  if (c.series.size() > 1) {
    double lx = kLeft;
    const double ly = kHeight - 18;
    for (std::size_t s = 0; s < c.series.size(); ++s) {
      out << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"8\" height=\"8\" fill=\""
          << kPalette[s % std::size(kPalette)] << "\"/>\n";
      out << "<text x=\"" << num(lx + 11) << "\" y=\"" << num(ly) << "\" font-size=\"9\">"
          << escape(c.series[s].name) << "</text>\n";
      lx += 14 + 5.5 * static_cast<double>(c.series[s].name.size());
    }
  }
  out << "</g>\n";
}

}  // namespace

std::string render(const BarChart& chart) { return render_row({chart}); }

std::string render_row(const std::vector<BarChart>& charts) {
  std::ostringstream out;
  const double w = kWidth * static_cast<double>(std::max<std::size_t>(1, charts.size()));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\""
      << num(kHeight) << "\" viewBox=\"0 0 " << num(w) << " " << num(kHeight)
      << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i) panel(out, charts[i], kWidth * i);
  out << "</svg>\n";
  return out.str();
}

}  // namespace mgtad::svg
