#pragma once

#include <cmath>
#include <vector>

namespace fwavg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

// 2x2 matrix, row-major.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 zero() { return {}; }
    static Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

    Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
    Mat2 operator*(Mat2 o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }
    Mat2 operator+(Mat2 o) const { return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22}; }
    Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    Mat2 transpose() const { return {a11, a21, a12, a22}; }
    double trace() const { return a11 + a22; }
    double det() const { return a11 * a22 - a12 * a21; }

    // Row vector times matrix: (v^T M) as a Vec2.
    Vec2 left_mul(Vec2 v) const { return {v.x * a11 + v.y * a21, v.x * a12 + v.y * a22}; }

    // Solve M u = rhs; caller must ensure det is well away from zero.
    Vec2 solve(Vec2 rhs) const {
        double d = det();
        return {(a22 * rhs.x - a12 * rhs.y) / d, (-a21 * rhs.x + a11 * rhs.y) / d};
    }
};

// Quadratic form v^T M v.
inline double quad_form(Vec2 v, Mat2 m) {
    return v.x * (m.a11 * v.x + m.a12 * v.y) + v.y * (m.a21 * v.x + m.a22 * v.y);
}

struct Box {
    double x_lo = -1.0, x_hi = 1.0;
    double y_lo = -1.0, y_hi = 1.0;

    double width() const { return x_hi - x_lo; }
    double height() const { return y_hi - y_lo; }
    bool contains(Vec2 z) const {
        return z.x >= x_lo && z.x <= x_hi && z.y >= y_lo && z.y <= y_hi;
    }
};

// Winding-number point-in-polygon test (closed polygon, last->first edge implied).
// Robust for the smooth sampled orbits used here; exact boundary hits count as inside.
bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly);

}  // namespace fwavg
