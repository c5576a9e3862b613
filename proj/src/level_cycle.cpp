#include "fwavg/level_cycle.hpp"

#include <cmath>
#include <stdexcept>

#include "fwavg/ode.hpp"
#include "fwavg/reeb_graph.hpp"

namespace fwavg {

namespace {

// Integrate until the orbit re-crosses the section through z0 (normal n,
// positive direction) close to z0 itself.  Returns the period.
double detect_period(const HamiltonianSystem& sys, Vec2 z0, double ode_tol, double max_time,
                     double close_tol) {
    const Vec2 g0 = sys.fast_field(z0);
    const double g0n = g0.norm();
    if (!(g0n > 0.0)) throw std::runtime_error("cannot trace an orbit from a critical point");
    const Vec2 n = g0 / g0n;
    const PlanarField& f = sys.fast_field;

    double t = 0.0;
    double h = std::min(0.05 * (1.0 + z0.norm()) / g0n, 1.0);
    Vec2 z = z0;
    bool armed = false;
    double s = 0.0;

    while (t < max_time) {
        const Vec2 full = rk4_step(f, z, h);
        const Vec2 half = rk4_step(f, rk4_step(f, z, h / 2.0), h / 2.0);
        const double err = (full - half).norm() / 15.0;
        const double scale = ode_tol * (1.0 + z.norm());
        if (err > scale && h > 1e-12) {
            h *= std::max(0.1, 0.9 * std::pow(scale / err, 0.25));
            continue;
        }
        const Vec2 z_new = half + (half - full) * (1.0 / 15.0);
        const double s_new = (z_new - z0).dot(n);

        if (armed && s < 0.0 && s_new >= 0.0) {
            // Bisection on the crossing fraction within this step.
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const Vec2 zm = rk4_step(f, z, mid * h);
                ((zm - z0).dot(n) < 0.0 ? lo : hi) = mid;
            }
            const double t_cross = t + hi * h;
            const Vec2 z_cross = rk4_step(f, z, hi * h);
            if ((z_cross - z0).norm() <= close_tol * (1.0 + z0.norm()) * 10.0) return t_cross;
            // A far crossing of the full section line (non-convex orbit);
            // disarm and keep integrating.
            armed = false;
        }
        if (s_new < 0.0) armed = true;
        z = z_new;
        s = s_new;
        t += h;
        if (err > 0.0) h *= std::min(5.0, 0.9 * std::pow(scale / err, 0.2));
        else h *= 5.0;
    }
    throw std::runtime_error("cycle did not return before max_time (period overflow near separatrix)");
}

}  // namespace

double LevelCycle::integral(const std::function<double(Vec2)>& f) const {
    double acc = 0.0;
    for (const Vec2& z : samples) acc += f(z);
    return acc * time_step();
}

double LevelCycle::average(const std::function<double(Vec2)>& f) const {
    return integral(f) / period;
}

Vec2 LevelCycle::at_time(double t) const {
    const double dt = time_step();
    double u = std::fmod(t, period);
    if (u < 0.0) u += period;
    const std::size_t n = samples.size();
    const auto k = static_cast<std::size_t>(u / dt);
    const double frac = u / dt - static_cast<double>(k);
    const Vec2 a = samples[k % n];
    const Vec2 b = samples[(k + 1) % n];
    return a + (b - a) * frac;
}

double orbit_period(const HamiltonianSystem& sys, Vec2 z0, double ode_tol, double max_time) {
    return detect_period(sys, z0, ode_tol, max_time, 1e-5);
}

LevelCycle trace_orbit_from(const HamiltonianSystem& sys, Vec2 z0, const TraceOptions& opt) {
    LevelCycle cycle;
    cycle.h = sys.h(z0);
    cycle.period = detect_period(sys, z0, opt.ode_tol, opt.max_time, opt.close_tol);

    int n = opt.n_samples;
    if (opt.adapt_samples) {
        const int factor = std::min(16, std::max(1, static_cast<int>(std::ceil(cycle.period / 10.0))));
        n *= factor;
    }
    cycle.samples.reserve(static_cast<std::size_t>(n));
    cycle.samples.push_back(z0);

    AdaptiveOptions aopt;
    aopt.tol = opt.ode_tol;
    const double dt = cycle.period / static_cast<double>(n);
    Vec2 z = z0;
    for (int k = 1; k < n; ++k) {
        z = integrate_flow(sys.fast_field, z, dt, aopt);
        cycle.samples.push_back(z);
    }
    z = integrate_flow(sys.fast_field, z, dt, aopt);
    if ((z - z0).norm() > opt.close_tol * (1.0 + z0.norm()))
        throw std::runtime_error("traced cycle failed to close");
    return cycle;
}

Vec2 point_on_level(const HamiltonianSystem& sys, Vec2 from, double h_target, double tol) {
    Vec2 z = from;
    double r = sys.h(z) - h_target;
    const double scale = tol * (1.0 + std::abs(h_target));
    for (int it = 0; it < 300; ++it) {
        if (std::abs(r) <= scale) return z;
        const Vec2 g = sys.grad(z);
        const double n2 = g.norm2();
        if (n2 < 1e-24) throw std::runtime_error("level search stalled at a critical point");
        double step = r;
        for (int damp = 0; damp < 60; ++damp) {
            const Vec2 z_try = z - g * (step / n2);
            const double r_try = sys.h(z_try) - h_target;
            if (std::abs(r_try) <= 0.9 * std::abs(r) || std::abs(r_try) <= scale) {
                z = z_try;
                r = r_try;
                break;
            }
            step *= 0.5;
        }
    }
    if (std::abs(r) <= 1e3 * scale) return z;  // accept near-misses from slow damping
    throw std::runtime_error("level search failed to converge");
}

LevelCycle trace_cycle(const HamiltonianSystem& sys, const ReebGraph& graph, int edge, double h,
                       const TraceOptions& opt) {
    const ReebEdge& e = graph.edge(edge);
    if (!(h > e.h_lo && h < e.h_hi))
        throw std::invalid_argument("trace_cycle: level not interior to the edge");
    const int band = graph.band_of(h);
    const BandComponent* bc = graph.component(band, edge);
    if (!bc) throw std::invalid_argument("trace_cycle: edge has no component in this band");
    const Vec2 start = point_on_level(sys, bc->polygon.front(), h);
    LevelCycle cycle = trace_orbit_from(sys, start, opt);
    cycle.edge = edge;
    return cycle;
}

}  // namespace fwavg
