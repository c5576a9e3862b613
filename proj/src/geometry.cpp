#include "fwavg/geometry.hpp"

namespace fwavg {

bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
    // Crossing-number test with the usual half-open edge convention.
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

}  // namespace fwavg
