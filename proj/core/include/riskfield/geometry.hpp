#pragma once

#include <cmath>

#include "riskfield/errors.hpp"

namespace riskfield {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned observation window in metres (planar projection assumed).
struct Window {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;

    Window() = default;
    Window(double x0, double y0, double x1, double y1)
        : xmin(x0), ymin(y0), xmax(x1), ymax(y1) {
        if (!(xmax > xmin) || !(ymax > ymin)) {
            throw ConfigError("window: require xmax > xmin and ymax > ymin");
        }
    }

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    double diameter() const { return std::hypot(width(), height()); }

    bool contains(Point p) const {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
};

} // namespace riskfield
