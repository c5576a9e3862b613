#pragma once

// Adaptive fourth-order Runge-Kutta for planar autonomous fields.
// Step-size control is by step doubling with Richardson error estimate.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "fwavg/geometry.hpp"

namespace fwavg {

using PlanarField = std::function<Vec2(Vec2)>;

inline Vec2 rk4_step(const PlanarField& f, Vec2 z, double h) {
    const Vec2 k1 = f(z);
    const Vec2 k2 = f(z + k1 * (h / 2.0));
    const Vec2 k3 = f(z + k2 * (h / 2.0));
    const Vec2 k4 = f(z + k3 * h);
    return z + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
}

struct AdaptiveOptions {
    double tol = 1e-10;       // local error per step, relative to (1 + |z|)
    double h_init = 1e-2;
    double h_min_factor = 1e-14;  // stall threshold relative to requested span
};

// Advance z by exactly `span` in time (span > 0), adapting internal steps.
// `on_step(z_prev, z_next, t_prev, h)` is invoked for every accepted step;
// it may be a no-op.  Throws when step control collapses, which in practice
// means the trajectory stalled against a critical point of the field.
template <class StepCb>
Vec2 integrate_flow(const PlanarField& f, Vec2 z, double span, const AdaptiveOptions& opt,
                    StepCb&& on_step) {
    double t = 0.0;
    double h = std::min(opt.h_init, span);
    const double h_min = opt.h_min_factor * span;
    while (t < span) {
        if (h < h_min) throw std::runtime_error("flow integration stalled near a critical point");
        if (t + h > span) h = span - t;
        const Vec2 full = rk4_step(f, z, h);
        const Vec2 half = rk4_step(f, rk4_step(f, z, h / 2.0), h / 2.0);
        const double err = (full - half).norm() / 15.0;
        const double scale = opt.tol * (1.0 + z.norm());
        if (err <= scale || h <= h_min * 2.0) {
            const Vec2 z_new = half + (half - full) * (1.0 / 15.0);  // 5th-order combination
            on_step(z, z_new, t, h);
            z = z_new;
            t += h;
            if (err > 0.0) h *= std::min(5.0, 0.9 * std::pow(scale / err, 0.2));
            else h *= 5.0;
        } else {
            h *= std::max(0.1, 0.9 * std::pow(scale / err, 0.25));
        }
    }
    return z;
}

inline Vec2 integrate_flow(const PlanarField& f, Vec2 z, double span, const AdaptiveOptions& opt) {
    return integrate_flow(f, z, span, opt, [](Vec2, Vec2, double, double) {});
}

}  // namespace fwavg
