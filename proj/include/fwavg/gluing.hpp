#pragma once

// Gluing (routing) probabilities at interior vertices of the Reeb graph and
// the compensating drift that restores the expected H-balance when the fast
// field is not arc-length-normalized.

#include <vector>

#include "fwavg/hamiltonian.hpp"
#include "fwavg/reeb_graph.hpp"

namespace fwavg {

struct GluingOptions {
    double delta_rel = 1e-3;   // ring offset relative to each incident edge's span
    double richardson_tol = 0.05;  // max relative extrapolation gap before erroring
    int n_samples = 512;
    double ode_tol = 1e-11;
};

struct GluingData {
    int vertex = -1;
    std::vector<int> edges;         // incident edge ids, in graph order
    std::vector<double> beta;       // extrapolated ring integrals of (grad H)^T sigma sigma^T grad H / |g|
    std::vector<double> prob;       // beta / sum(beta)
    double extrapolation_gap = 0.0; // max relative Richardson correction
};

// Computes beta_ki for each edge incident to an interior vertex by
// integrating the squared diffusion projection over rings at distance
// delta and delta/2 from the vertex level, then Richardson-extrapolating
// beta* = 2 beta(delta/2) - beta(delta).
GluingData gluing_probabilities(const HamiltonianSystem& sys, const ReebGraph& graph, int vertex,
                                const GluingOptions& opt = {});

struct CompensatorOptions {
    bool use_eps_family = false;  // apply the perturbation generator instead of L0
    double quad_tol = 1e-10;
    int max_depth = 40;
    double min_grad = 1e-9;  // abort if the integration path grazes the critical set
};

// Compensating drift  b_hat(z) = ( a(z) * int_0^{z1} L [a^{-1}](u, z2) du, 0 ),
// the unique horizontal drift with b_hat(0, z2) = 0 that makes the projected
// process on H balance when a = |g|/|grad H| is not identically one.
Vec2 compensating_drift(const HamiltonianSystem& sys, Vec2 z, const CompensatorOptions& opt = {});

}  // namespace fwavg
