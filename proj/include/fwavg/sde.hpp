#pragma once

// Euler-Maruyama simulation of the fast-slow system
//
//   dq = (1/eps) g dt + (b + b_eps) dt + (sigma + sigma_eps) dW,
//
// plus the coupled slow-scale construction used to compare H(q_t) against
// the limiting edge diffusion, and exit statistics near interior vertices.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "fwavg/edge_coefficients.hpp"
#include "fwavg/ensemble.hpp"
#include "fwavg/hamiltonian.hpp"
#include "fwavg/reeb_graph.hpp"
#include "fwavg/rng.hpp"

namespace fwavg {

// The step must resolve the fast rotation: dt <= kFastStepFraction * eps.
inline constexpr double kFastStepFraction = 0.02;
void check_time_step(double dt, double epsilon);

// Step actually used at a given epsilon: the configured value capped at
// kFastStepFraction * eps^2.  The explicit Euler step inflates H along the
// fast rotation at rate dt/eps^2 per unit time, so an eps^2 cap keeps that
// bias uniformly small across an epsilon-ladder (the eps cap above is only
// the validity threshold, not an accuracy target).
inline double resolved_time_step(double dt_config, double epsilon) {
    return std::min(dt_config, kFastStepFraction * epsilon * epsilon);
}

enum class StopReason { none, horizon, lower_exit, upper_exit, blowup };
const char* stop_reason_name(StopReason r);

struct StopCondition {
    double h_lo = -std::numeric_limits<double>::infinity();
    double h_hi = std::numeric_limits<double>::infinity();
    double horizon = std::numeric_limits<double>::infinity();
};

struct SimOptions {
    double dt = 1e-3;
    int record_stride = 0;      // 0: endpoint only; k>0: keep every k-th step
    double refine_frac = 1e-3;  // exit-time bisection tolerance, fraction of dt
    bool track_edges = false;   // label records with Reeb edge ids (needs graph)
};

struct PathRecord {
    std::vector<double> t;
    std::vector<Vec2> z;
    std::vector<double> h;
    std::vector<int> edge;  // parallel to t when track_edges is set (-1 at a vertex)

    StopReason reason = StopReason::none;
    double t_end = 0.0;
    Vec2 z_end;
    double h_end = 0.0;
    double h_sup = -std::numeric_limits<double>::infinity();
};

// One Euler-Maruyama step in place; returns the Brownian increment used.
Vec2 em_step(const HamiltonianSystem& sys, Vec2& z, double dt, CounterRng& rng);

// Observer called with the state at the START of each step together with the
// actual step length (partial final and exit steps included), matching the
// left-point quadrature the Euler scheme itself uses.
using StepObserver = std::function<void(double t, Vec2 z, double h, double dt_step)>;

PathRecord simulate_path(const HamiltonianSystem& sys, CounterRng& rng, Vec2 q0,
                         const StopCondition& stop, const SimOptions& opt,
                         const ReebGraph* graph = nullptr,
                         const StepObserver& observer = nullptr);

// --- Coupled slow-scale construction ------------------------------------
//
// Along one full-system path q_t the scalar Brownian motion
//   beta_t = int_0^t (R0 H / |R0 H|)(q_s) dW_s
// drives both the piecewise frozen-coefficient process xi (re-anchored to
// H(q) at period marks T_k, spaced by eps * orbit period) and the limiting
// edge diffusion  dx~ = B(x~) dt + sqrt(A(x~)) dbeta.

struct CoupledOptions {
    double dt = 1e-3;
    double horizon = 1.0;
    double band_lo = 0.0;
    double band_hi = std::numeric_limits<double>::infinity();
    int record_stride = 0;
    double degenerate_tol = 1e-12;  // |R0 H| below this uses a fixed unit direction
};

struct CoupledResult {
    double sup_xi_vs_h = 0.0;      // sup_t |xi_t - H(q_t)|
    double sup_xi_vs_limit = 0.0;  // sup_t |xi_t - x~_t|
    double t_end = 0.0;
    StopReason reason = StopReason::none;
    int marks = 0;  // number of period re-anchorings

    std::vector<double> t, h, xi, x_limit, beta;  // filled when record_stride > 0
};

CoupledResult coupled_simulation(const HamiltonianSystem& sys, const ReebGraph& graph,
                                 const CoefficientSet& coeffs, CounterRng& rng, Vec2 q0,
                                 const CoupledOptions& opt);

// --- Exit statistics at an interior vertex -------------------------------

struct HittingOptions {
    int vertex = -1;
    double delta = 0.05;        // half-width of the H-band around the vertex
    double delta_prime = 0.005; // start-ring offset from the vertex level
    int start_edge = -1;        // edge carrying the start ring
    int n_paths = 1000;
    double dt = 1e-4;
    double horizon = 50.0;
    std::uint64_t seed = 1;
    std::uint64_t stream_offset = 0;
    ExecPolicy policy = ExecPolicy::parallel;
};

struct HittingStats {
    std::vector<int> edges;       // incident edges, graph order
    std::vector<int> counts;      // exits classified per edge
    std::vector<double> prob;     // counts / classified
    std::vector<double> std_err;  // binomial standard errors
    int censored = 0;             // horizon reached before exit
    int unclassified = 0;         // exit landed on a vertex snap (expected 0)
    double mean_exit_time = 0.0;
    double se_exit_time = 0.0;
};

HittingStats hitting_statistics(const HamiltonianSystem& sys, const ReebGraph& graph,
                                const HittingOptions& opt);

}  // namespace fwavg
