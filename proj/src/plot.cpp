#include "facepsy/plot.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "facepsy/common.hpp"

namespace facepsy {

namespace {

constexpr double kW = 520, kH = 420, kLeft = 60, kRight = 170, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 9> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                                 "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

std::string escape(std::string_view s) {
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

std::string num(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::fixed << v;
  return s.str();
}

struct Frame {
  double x0, x1, y0, y1;  // data ranges
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void axes(std::ostringstream& o, const Frame& f, std::string_view title, std::string_view xl, std::string_view yl,
          std::span<const double> xticks, std::span<const double> yticks) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW - kLeft - kRight << "\" height=\""
    << kH - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xticks)
    o << "<text x=\"" << f.px(t) << "\" y=\"" << kH - kBottom + 15 << "\" text-anchor=\"middle\">"
      << (t == static_cast<int>(t) && f.x1 > 1.0 ? std::to_string(static_cast<int>(t)) : num(t)) << "</text>\n";
  for (double t : yticks)
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(t) + 4 << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  o << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << escape(xl)
    << "</text>\n";
  o << "<text x=\"15\" y=\"" << (kTop + kH - kBottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
    << (kTop + kH - kBottom) / 2 << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string roc_svg(std::span<const RocSeries> series, std::string_view title) {
  std::ostringstream o;
  const Frame f{0.0, 1.0, 0.0, 1.0};
  const std::array<double, 6> ticks = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  axes(o, f, title, "False positive rate", "True positive rate", ticks, ticks);
  o << "<line x1=\"" << f.px(0) << "\" y1=\"" << f.py(0) << "\" x2=\"" << f.px(1) << "\" y2=\"" << f.py(1)
    << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : series[i].points) o << f.px(p.fpr) << ',' << f.py(p.tpr) << ' ';
    o << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(i) + 8.0;
    o << "<line x1=\"" << kW - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 28 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kW - kRight + 32 << "\" y=\"" << ly + 4 << "\">" << escape(series[i].label)
      << (series[i].auroc ? " (" + num(*series[i].auroc) + ")" : std::string()) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string min_days_svg(const MinDaysCurve& curve, std::string_view title) {
  std::ostringstream o;
  const double kmax = curve.points.empty() ? 1.0 : static_cast<double>(curve.points.back().k);
  const Frame f{1.0, std::max(2.0, kmax), 0.0, 1.0};
  std::vector<double> xt;
  for (double k = 1; k <= f.x1; k += (f.x1 > 14 ? 3 : 1)) xt.push_back(k);
  const std::array<double, 6> yt = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  axes(o, f, title, "Days of data per participant (k)", "Pooled AUROC", xt, yt);
  o << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(0.5) << "\" x2=\"" << f.px(f.x1) << "\" y2=\"" << f.py(0.5)
    << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  std::string run;
  auto flush = [&] {
    if (!run.empty()) o << "<polyline fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"1.5\" points=\"" << run << "\"/>\n";
    run.clear();
  };
  for (const auto& p : curve.points) {
    const double x = f.px(static_cast<double>(p.k));
    if (!p.auroc) {
      flush();
      o << "<text x=\"" << x << "\" y=\"" << f.py(0.0) - 4 << "\" text-anchor=\"middle\" fill=\"#d62728\">×</text>\n";
      continue;
    }
    const double y = f.py(*p.auroc);
    run += std::to_string(x) + "," + std::to_string(y) + " ";
    o << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.5\" fill=\"" << kPalette[0] << "\"/>\n";
  }
  flush();
  o << "<text x=\"" << kW - kRight + 10 << "\" y=\"" << kTop + 12 << "\">subset " << escape(to_string(curve.subset))
    << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace facepsy
