#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace msrlab::svg {

inline std::string escape(const std::string& s) {
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return p;
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

enum class Style { line, points };

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string metadata;  // embedded verbatim (escaped) in <metadata>
  std::vector<std::pair<Series, Style>> layers;
};

// Fixed-size chart with linear axes fitted to all layers.
inline std::string render(const Chart& c) {
  constexpr double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& [s, style] : c.layers)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) + "\" viewBox=\"0 0 " +
         num(W) + " " + num(H) + "\">\n";
  out += "<metadata>" + escape(c.metadata) + "</metadata>\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         escape(c.title) + "</text>\n";
  out += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(H - B + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + label(xv) + "</text>\n";
    out += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + label(yv) + "</text>\n";
  }
  out += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(c.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + num((T + H - B) / 2) + "\" transform=\"rotate(-90 16 " + num((T + H - B) / 2) +
         ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(c.y_label) + "</text>\n";

  for (std::size_t li = 0; li < c.layers.size(); ++li) {
    const auto& [s, style] = c.layers[li];
    const auto& colour = palette()[li % palette().size()];
    if (style == Style::line) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
      if (!pts.empty()) pts.pop_back();
      out += "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" + colour +
                 "\"/>\n";
    }
    double ly = T + 14 + 18 * static_cast<double>(li);
    out += "<rect x=\"" + num(W - R + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           colour + "\"/>\n";
    out += "<text x=\"" + num(W - R + 28) + "\" y=\"" + num(ly) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
           escape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

// Samples f on [lo, hi] at n+1 evenly spaced points.
template <typename F>
Series curve(const std::string& name, double lo, double hi, F&& f, int n = 60) {
  Series s{name, {}, {}};
  for (int i = 0; i <= n; ++i) {
    double x = lo + (hi - lo) * i / n;
    s.x.push_back(x);
    s.y.push_back(f(x));
  }
  return s;
}

}  // namespace msrlab::svg
