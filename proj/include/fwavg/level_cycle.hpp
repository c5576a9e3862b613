#pragma once

// Closed-orbit tracing for the fast flow dz/dt = g(z) (unit clock).
//
// A traced cycle carries samples at N uniformly spaced times, so closed
// line integrals with the natural weight dl/|g| reduce to plain averages:
//   oint f dl/|g| = int_0^T f(z_t) dt  ~=  (T/N) sum_k f(z_k),
// the periodic trapezoid rule, which converges rapidly for smooth orbits.

#include <functional>
#include <vector>

#include "fwavg/geometry.hpp"
#include "fwavg/hamiltonian.hpp"

namespace fwavg {

struct ReebGraph;  // defined in reeb_graph.hpp

struct TraceOptions {
    double ode_tol = 1e-11;    // local error control for the flow
    double max_time = 2e4;     // give up beyond this (period overflow near separatrix)
    int n_samples = 256;       // baseline samples per cycle
    bool adapt_samples = true; // grow the sample count for long (near-saddle) periods
    double close_tol = 1e-6;   // |z(T) - z(0)| tolerance, relative to (1 + |z0|)
};

struct LevelCycle {
    int edge = -1;              // owning edge, -1 when traced free-form
    double h = 0.0;             // level, recomputed from the start point
    double period = 0.0;        // return time of the fast flow
    std::vector<Vec2> samples;  // z(k T / N), k = 0..N-1

    double time_step() const { return period / static_cast<double>(samples.size()); }

    // (T/N) sum f(z_k)  ==  oint f dl/|g|
    double integral(const std::function<double(Vec2)>& f) const;
    // integral / period  (orbit-time average)
    double average(const std::function<double(Vec2)>& f) const;
    // Point at orbit time t (linear interpolation between samples, periodic).
    Vec2 at_time(double t) const;
};

// Trace the closed orbit through z0.  Return detection uses the Poincare
// section through z0 with normal g(z0)/|g(z0)|; the crossing is refined by
// bisection to ~1e-12 relative accuracy in time.
LevelCycle trace_orbit_from(const HamiltonianSystem& sys, Vec2 z0, const TraceOptions& opt = {});

// Period only (skips resampling).
double orbit_period(const HamiltonianSystem& sys, Vec2 z0, double ode_tol = 1e-9,
                    double max_time = 2e4);

// Move a point to the target level along the gradient flow dz/dh =
// grad H / |grad H|^2 (staged Newton with step capping), staying in the
// same level-set component.
Vec2 point_on_level(const HamiltonianSystem& sys, Vec2 from, double h_target,
                    double tol = 1e-12);

// Trace the cycle of a Reeb edge at interior level h (h strictly inside the
// edge's level interval).
LevelCycle trace_cycle(const HamiltonianSystem& sys, const ReebGraph& graph, int edge, double h,
                       const TraceOptions& opt = {});

}  // namespace fwavg
