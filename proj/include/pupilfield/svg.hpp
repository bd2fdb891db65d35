#pragma once

#include <string>
#include <vector>

namespace pupilfield::svg {

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool line = true;    ///< polyline through the points
    bool markers = false;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<Series> series;
};

/// Minimal standalone SVG line/scatter chart.
std::string render(const Plot& plot, int width = 640, int height = 420);

}  // namespace pupilfield::svg
