#pragma once

// Minimal self-contained SVG line charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace netres::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

struct Chart {
    std::string title;
    std::string x_label = "t [s]";
    std::string y_label;
    std::vector<Series> series;
    std::vector<double> markers; // vertical lines, e.g. controller swaps
    int width = 720;
    int height = 360;
};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

inline std::string render(const Chart& c) {
    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = c.width - left - right;
    const double ph = c.height - top - bottom;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : c.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) {
        x0 = std::isfinite(x0) ? x0 : 0.0;
        x1 = x0 + 1.0;
    }
    if (!(y1 > y0)) {
        y0 = std::isfinite(y0) ? y0 - 1.0 : -1.0;
        y1 = y0 + 2.0;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << c.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(c.title)
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">"
          << num(xv) << "</text>\n";
        o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
          << "</text>\n";
        o << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + pw) << "\" y1=\"" << num(py(yv)) << "\" y2=\""
          << num(py(yv)) << "\" stroke=\"#ddd\"/>\n";
    }
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << c.height - 10 << "\" text-anchor=\"middle\">"
      << escape(c.x_label) << "</text>\n";
    o << "<text x=\"15\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << num(top + ph / 2) << ")\">" << escape(c.y_label) << "</text>\n";
    for (double m : c.markers) {
        if (m < x0 || m > x1)
            continue;
        o << "<line x1=\"" << num(px(m)) << "\" x2=\"" << num(px(m)) << "\" y1=\"" << num(top) << "\" y2=\""
          << num(top + ph) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (std::size_t si = 0; si < c.series.size(); ++si) {
        const auto& s = c.series[si];
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]))
                continue;
            o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
        }
        o << "\"/>\n";
        o << "<text x=\"" << num(left + 8) << "\" y=\"" << num(top + 14 + 14.0 * static_cast<double>(si))
          << "\" fill=\"" << s.color << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline void write(const std::string& path, const Chart& c) {
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("svg::write: cannot open " + path);
    f << render(c);
}

} // namespace netres::svg
