#pragma once

// Cubic spline on strictly increasing nodes with not-a-knot end conditions,
// so polynomials up to cubic are reproduced exactly and there is no
// flat-curvature boundary layer.  Queries outside the node range continue
// linearly with the boundary slope, so tabulated coefficients degrade
// gracefully near vertex levels that the tables deliberately exclude.

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fwavg {

class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("spline: need >= 2 nodes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("spline: nodes must increase");
        m_.assign(n, 0.0);
        if (n == 2) return;
        if (n == 3) {
            // The single parabola through three points.
            const double d0 = (y_[1] - y_[0]) / (x_[1] - x_[0]);
            const double d1 = (y_[2] - y_[1]) / (x_[2] - x_[1]);
            m_[0] = m_[1] = m_[2] = 2.0 * (d1 - d0) / (x_[2] - x_[0]);
            return;
        }

        // Tridiagonal solve for the interior second derivatives.  The
        // not-a-knot conditions (third derivative continuous across the
        // first and last interior nodes) express m_0 and m_{n-1} through
        // their neighbours and fold into the first and last interior rows.
        std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0), lower(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            lower[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        {
            const double h0 = x_[1] - x_[0];
            const double h1 = x_[2] - x_[1];
            diag[1] += h0 * (1.0 + h0 / h1);
            upper[1] -= h0 * h0 / h1;
            lower[1] = 0.0;
        }
        {
            const std::size_t i = n - 2;
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            diag[i] += h1 * (1.0 + h1 / h0);
            lower[i] -= h1 * h1 / h0;
            upper[i] = 0.0;
        }
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
            if (i == 1) break;
        }
        m_[0] = m_[1] + (x_[1] - x_[0]) / (x_[2] - x_[1]) * (m_[1] - m_[2]);
        m_[n - 1] =
            m_[n - 2] + (x_[n - 1] - x_[n - 2]) / (x_[n - 2] - x_[n - 3]) * (m_[n - 2] - m_[n - 3]);
    }

    double operator()(double x) const { return eval(x); }

    double eval(double x) const {
        if (x <= x_.front()) return y_.front() + slope_at(0) * (x - x_.front());
        if (x >= x_.back()) {
            const std::size_t k = x_.size() - 2;
            return y_.back() + slope_end(k) * (x - x_.back());
        }
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double x) const {
        if (x <= x_.front()) return slope_at(0);
        if (x >= x_.back()) return slope_end(x_.size() - 2);
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        const double b = (x - x_[i]) / h;
        return (y_[i + 1] - y_[i]) / h +
               ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    const std::vector<double>& nodes() const { return x_; }
    const std::vector<double>& values() const { return y_; }

  private:
    std::size_t segment(double x) const {
        std::size_t lo = 0, hi = x_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= x ? lo : hi) = mid;
        }
        return lo;
    }

    double slope_at(std::size_t i) const {
        const double h = x_[i + 1] - x_[i];
        return (y_[i + 1] - y_[i]) / h - (2.0 * m_[i] + m_[i + 1]) * h / 6.0;
    }

    double slope_end(std::size_t i) const {
        const double h = x_[i + 1] - x_[i];
        return (y_[i + 1] - y_[i]) / h + (m_[i] + 2.0 * m_[i + 1]) * h / 6.0;
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace fwavg
