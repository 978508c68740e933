#pragma once

// Accuracy/fairness trade-off scatter as a standalone SVG, plus the CSV of
// plotted values. Micro F1 runs along x, imparity along y, and a dashed
// horizontal line marks the vanilla imparity: points above it amplify bias.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "infofair/report.hpp"

namespace infofair {

struct PlotPoint {
  std::string label;
  std::string variant;
  double alpha = 0.0;
  double micro_f1 = 0.0;
  double imparity = 0.0;
  std::optional<double> reduction;
};

inline PlotPoint plot_point(const ResultRecord& r, std::string label) {
  return {std::move(label), to_string(r.variant), r.alpha, r.aggregate.micro_f1, r.aggregate.imparity,
          r.aggregate.reduction};
}

/// Mean vanilla imparity over the records that carry one; a VANILLA record
/// counts as its own reference.
inline std::optional<double> vanilla_reference(const std::vector<ResultRecord>& records) {
  double total = 0.0;
  int n = 0;
  for (const auto& r : records) {
    if (r.vanilla) {
      total += r.vanilla->imparity;
      ++n;
    } else if (r.variant == Variant::VANILLA) {
      total += r.aggregate.imparity;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / n;
}

struct PlotLayout {
  double width = 640, height = 480, margin = 64;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  double px(double x) const { return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin); }
  double py(double y) const {
    return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin);
  }
};

inline PlotLayout layout_for(const std::vector<PlotPoint>& pts, std::optional<double> ref) {
  PlotLayout l;
  if (pts.empty()) return l;
  double lo = pts.front().micro_f1, hi = lo, top = 0.0;
  for (const auto& p : pts) {
    lo = std::min(lo, p.micro_f1);
    hi = std::max(hi, p.micro_f1);
    top = std::max(top, p.imparity);
  }
  if (ref) top = std::max(top, *ref);
  const double pad = std::max(0.02, 0.1 * (hi - lo));
  l.x_min = std::max(0.0, lo - pad);
  l.x_max = std::min(1.0, hi + pad);
  if (l.x_max <= l.x_min) l.x_max = l.x_min + 0.05;
  l.y_min = 0.0;
  l.y_max = top > 0.0 ? top * 1.15 : 1.0;
  return l;
}

inline void write_plot_csv(std::ostream& out, const std::vector<PlotPoint>& pts) {
  out.precision(17);
  out << "label,variant,alpha,micro_f1,imparity,reduction\n";
  for (const auto& p : pts) {
    out << p.label << ',' << p.variant << ',' << p.alpha << ',' << p.micro_f1 << ',' << p.imparity << ',';
    if (p.reduction) out << *p.reduction;
    out << '\n';
  }
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string variant_color(const std::string& v) {
  if (v == "tsd") return "#d62728";
  if (v == "ts") return "#1f77b4";
  if (v == "td") return "#2ca02c";
  if (v == "eo") return "#9467bd";
  return "#444444";
}

}  // namespace detail

inline void write_plot_svg(std::ostream& out, const std::vector<PlotPoint>& pts, std::optional<double> ref) {
  const PlotLayout l = layout_for(pts, ref);
  std::ostringstream s;
  s.precision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << l.width << "\" height=\"" << l.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double left = l.margin, right = l.width - l.margin, top = l.margin, bottom = l.height - l.margin;
  s << "<line class=\"axis\" x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
    << bottom << "\" stroke=\"black\"/>\n";
  s << "<line class=\"axis\" x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << left << "\" y2=\"" << top
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = l.x_min + (l.x_max - l.x_min) * i / 4.0;
    const double yv = l.y_min + (l.y_max - l.y_min) * i / 4.0;
    s << "<text x=\"" << l.px(xv) << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">" << xv
      << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << l.py(yv) + 4 << "\" text-anchor=\"end\">" << yv
      << "</text>\n";
  }
  s << "<text x=\"" << (left + right) / 2 << "\" y=\"" << l.height - 16
    << "\" text-anchor=\"middle\">Micro F1</text>\n";
  s << "<text x=\"16\" y=\"" << (top + bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (top + bottom) / 2 << ")\">Imparity</text>\n";
  if (ref) {
    s << "<line class=\"vanilla\" x1=\"" << left << "\" y1=\"" << l.py(*ref) << "\" x2=\"" << right
      << "\" y2=\"" << l.py(*ref) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (const auto& p : pts) {
    s << "<circle class=\"point\" cx=\"" << l.px(p.micro_f1) << "\" cy=\"" << l.py(p.imparity)
      << "\" r=\"5\" fill=\"" << detail::variant_color(p.variant) << "\"><title>"
      << detail::xml_escape(p.label) << "</title></circle>\n";
    s << "<text x=\"" << l.px(p.micro_f1) + 8 << "\" y=\"" << l.py(p.imparity) - 6 << "\">"
      << detail::xml_escape(p.label) << "</text>\n";
  }
  s << "</svg>\n";
  out << s.str();
}

}  // namespace infofair
