#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace entrain::io {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string label;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

}  // namespace detail

/// Line plot in a fixed 800x500 viewBox, axis ranges from the data padded by
/// 5% on each side. Non-finite points break the polyline.
inline std::string render_svg(const PlotSpec& spec) {
    constexpr double W = 800, H = 500, left = 70, right = 20, top = 40, bottom = 50;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : spec.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double px = 0.05 * (xmax - xmin), py = 0.05 * (ymax - ymin);
    xmin -= px, xmax += px, ymin -= py, ymax += py;
    const double pw = W - left - right, ph = H - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    using detail::svg_num;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" width=\"800\" height=\"500\">\n";
    os << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
    os << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << detail::escape(spec.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x=\"" << svg_num(sx(fx)) << "\" y=\"" << svg_num(top + ph + 18)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << svg_num(fx) << "</text>\n";
        os << "<text x=\"" << svg_num(left - 6) << "\" y=\"" << svg_num(sy(fy) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << svg_num(fy) << "</text>\n";
    }
    os << "<text x=\"" << svg_num(left + pw / 2) << "\" y=\"" << svg_num(H - 8)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << detail::escape(spec.x_label)
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << svg_num(top + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"13\" transform=\"rotate(-90 16 " << svg_num(top + ph / 2) << ")\">"
       << detail::escape(spec.y_label) << "</text>\n";
    for (std::size_t k = 0; k < spec.series.size(); ++k) {
        const auto& s = spec.series[k];
        std::ostringstream pts;
        std::size_t count = 0;
        auto flush = [&] {
            if (count > 1) {
                os << "<polyline fill=\"none\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"1.2\" points=\""
                   << pts.str() << "\"><title>" << detail::escape(s.label) << "</title></polyline>\n";
            }
            pts.str("");
            count = 0;
        };
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                flush();
                continue;
            }
            pts << (count ? " " : "") << svg_num(sx(s.x[i])) << "," << svg_num(sy(s.y[i]));
            ++count;
        }
        flush();
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace entrain::io
