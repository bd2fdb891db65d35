#include "pupilfield/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pupilfield::svg {

namespace {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (lo > hi) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

}  // namespace

std::string render(const Plot& plot, int width, int height) {
    const int ml = 64, mr = 16, mt = 32, mb = 44;  // margins
    Range rx, ry;
    for (const auto& s : plot.series) {
        for (double v : s.x) rx.add(plot.log_x ? std::log10(std::max(v, 1e-12)) : v);
        for (double v : s.y) ry.add(v);
    }
    rx.pad();
    ry.pad();

    const auto px = [&](double x) {
        const double v = plot.log_x ? std::log10(std::max(x, 1e-12)) : x;
        return ml + (v - rx.lo) / (rx.hi - rx.lo) * (width - ml - mr);
    };
    const auto py = [&](double y) {
        return height - mb - (y - ry.lo) / (ry.hi - ry.lo) * (height - mt - mb);
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << plot.title << "</text>\n";

    // Axes with a handful of ticks.
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = rx.lo + t * (rx.hi - rx.lo) / 4.0;
        const double label_x = plot.log_x ? std::pow(10.0, fx) : fx;
        const double gx = ml + t * (width - ml - mr) / 4.0;
        out << "<line x1=\"" << gx << "\" y1=\"" << height - mb << "\" x2=\"" << gx
            << "\" y2=\"" << height - mb + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << gx << "\" y=\"" << height - mb + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(label_x) << "</text>\n";
        const double fy = ry.lo + t * (ry.hi - ry.lo) / 4.0;
        const double gy = height - mb - t * (height - mt - mb) / 4.0;
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << gy << "\" x2=\"" << ml
            << "\" y2=\"" << gy << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << gy + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(fy) << "</text>\n";
    }
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << plot.x_label << (plot.log_x ? " (log)" : "") << "</text>\n";
    out << "<text x=\"14\" y=\"" << (mt + height - mb) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << (mt + height - mb) / 2 << ")\">"
        << plot.y_label << "</text>\n";

    for (const auto& s : plot.series) {
        if (s.line && s.x.size() > 1) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t p = 0; p < s.x.size(); ++p) {
                if (!std::isfinite(s.y[p])) continue;
                out << fmt(px(s.x[p])) << "," << fmt(py(s.y[p])) << " ";
            }
            out << "\"/>\n";
        }
        if (s.markers) {
            for (std::size_t p = 0; p < s.x.size(); ++p) {
                if (!std::isfinite(s.y[p])) continue;
                out << "<circle cx=\"" << fmt(px(s.x[p])) << "\" cy=\""
                    << fmt(py(s.y[p])) << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
            }
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace pupilfield::svg
