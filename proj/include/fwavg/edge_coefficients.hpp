#pragma once

// Averaged coefficients of the limiting diffusion on each Reeb edge.
//
// With orbit-time parameterization of a level cycle C_i(h),
//   T_i(h)     = oint dl/|g|                                   (period)
//   a_bar_i(h) = oint (grad H)^T sigma sigma^T grad H dl/|g|   (= T_i A_i)
//   b_bar_i(h) = oint (L0 H) dl/|g|                            (= T_i B_i)
// The edge generator is L_i f = B_i f' + (1/2) A_i f'', and the natural
// scales of the generalized derivative are u' = 1/a_bar, v' = T.

#include <functional>
#include <vector>

#include "fwavg/hamiltonian.hpp"
#include "fwavg/level_cycle.hpp"
#include "fwavg/reeb_graph.hpp"
#include "fwavg/spline.hpp"

namespace fwavg {

struct CoefficientOptions {
    int levels_per_edge = 64;
    double delta_trace_rel = 1e-4;  // tabulation margin from vertex levels, relative to edge span
    int n_samples = 256;            // baseline cycle samples
    double ode_tol = 1e-11;
    bool parallel = true;
};

// Tabulation grid for one edge: near-uniform, with geometric refinement
// toward saddle endpoints where the period diverges logarithmically.
std::vector<double> edge_level_grid(const ReebGraph& graph, int edge, int n, double delta_trace_rel);

struct EdgeCoefficients {
    int edge = -1;
    std::vector<double> h_grid;
    std::vector<double> period, a_bar, b_bar;
    CubicSpline period_spline, a_bar_spline, b_bar_spline;

    double T(double h) const { return period_spline(h); }
    double A(double h) const { return a_bar_spline(h) / period_spline(h); }
    double B(double h) const { return b_bar_spline(h) / period_spline(h); }
    double u_prime(double h) const { return 1.0 / a_bar_spline(h); }
    double v_prime(double h) const { return period_spline(h); }
    // L_i f at h given f' and f''.
    double generator(double h, double f1, double f2) const {
        return B(h) * f1 + 0.5 * A(h) * f2;
    }
};

struct CoefficientSet {
    std::vector<EdgeCoefficients> edges;  // indexed by edge id
    const EdgeCoefficients& for_edge(int id) const { return edges.at(static_cast<std::size_t>(id)); }
};

CoefficientSet edge_coefficients(const HamiltonianSystem& sys, const ReebGraph& graph,
                                 const CoefficientOptions& opt = {});

// Per-edge table of h -> oint f dl/|g| on the coefficient grid.
std::vector<CubicSpline> edge_cycle_table(const HamiltonianSystem& sys, const ReebGraph& graph,
                                          const ScalarField& f, const CoefficientOptions& opt = {});

// Cumulative region integrals  I_i(x) = int_{D_i(x)} f du  over the region
// enclosed by the edge cycle at level x, assembled by the layer-cake rule
//   d/dx I_i(x) = oint_{C_i(x)} f dl/|grad H|
// with base contributions from the edges below the lower vertex.
class RegionIntegralTable {
  public:
    RegionIntegralTable() = default;
    RegionIntegralTable(const HamiltonianSystem& sys, const ReebGraph& graph, const ScalarField& f,
                        const CoefficientOptions& opt = {});

    double operator()(int edge, double x) const;
    // Boundary derivative d/dx I_i(x) (the cycle integral itself).
    double boundary_rate(int edge, double x) const;

  private:
    std::vector<CubicSpline> cumulative_;  // per edge, includes base offsets
    std::vector<CubicSpline> rate_;        // per edge
};

// Scalar test function with optional analytic derivatives (finite
// differences otherwise).
struct TestFunction1D {
    std::function<double(double)> f;
    std::function<double(double)> f1;  // optional
    std::function<double(double)> f2;  // optional

    double eval(double x) const { return f(x); }
    double d1(double x, double scale = 1.0) const;
    double d2(double x, double scale = 1.0) const;
};

// Residual of the generalized second-derivative identity on edge i:
//   d/dv (df/du) = 2 L_i f + (2/T_i) [int_{D_i(x)} L0^* a^{-1} du] f'.
struct OperatorResidual {
    double lhs = 0.0;
    double rhs = 0.0;
    double correction = 0.0;  // the region-integral term
    double residual = 0.0;    // |lhs - rhs| / max(1, |lhs|)
};

OperatorResidual generalized_operator_residual(const HamiltonianSystem& sys, const ReebGraph& graph,
                                               const CoefficientSet& coeffs,
                                               const RegionIntegralTable& adjoint_region, int edge,
                                               const TestFunction1D& f, double x);

// Region table preloaded with the theorem's integrand L0^* a^{-1}.
RegionIntegralTable adjoint_density_region_table(const HamiltonianSystem& sys,
                                                 const ReebGraph& graph,
                                                 const CoefficientOptions& opt = {});

}  // namespace fwavg
