#pragma once

// Monte Carlo simulation of the limiting diffusion on the Reeb graph:
// scalar Euler-Maruyama with edge coefficients (A_i, B_i) inside edges,
// gluing draws at interior vertices, reflection at exterior (extremum)
// vertices, and absorption at the truncation ceiling.

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "fwavg/edge_coefficients.hpp"
#include "fwavg/ensemble.hpp"
#include "fwavg/gluing.hpp"
#include "fwavg/reeb_graph.hpp"
#include "fwavg/rng.hpp"

namespace fwavg {

struct GraphDiffusionOptions {
    double delta_v_rel = 1e-3;  // re-emission offset relative to the smallest incident edge span
    double a_floor = 1e-14;     // interpolated A below this aborts the path
};

class GraphDiffusion {
  public:
    GraphDiffusion(const ReebGraph& graph, const CoefficientSet& coeffs,
                   std::vector<GluingData> gluing, const GraphDiffusionOptions& opt = {});

    const ReebGraph& graph() const { return *graph_; }
    const CoefficientSet& coeffs() const { return *coeffs_; }
    const GraphDiffusionOptions& options() const { return opt_; }
    const GluingData& gluing_at(int vertex) const;
    double reemission_offset(int vertex) const;

    // Edge coefficients with the evaluation level clamped into the tabulated
    // grid, so near-vertex queries interpolate instead of extrapolating.
    double drift(int edge, double h) const;
    double diffusion_sq(int edge, double h) const;  // A_i, floored check applied by caller
    // Limit generator applied to a scalar test function at (edge, h).
    double generator(int edge, double h, const TestFunction1D& f) const;

  private:
    const ReebGraph* graph_;
    const CoefficientSet* coeffs_;
    std::vector<GluingData> gluing_;
    std::vector<int> gluing_index_;   // per vertex, -1 if none
    std::vector<double> offsets_;     // per vertex re-emission offset
    GraphDiffusionOptions opt_;
};

enum class GraphStopReason { none, horizon, lower_exit, upper_exit, ceiling };
const char* graph_stop_reason_name(GraphStopReason r);

struct GraphStop {
    double h_lo = -std::numeric_limits<double>::infinity();
    double h_hi = std::numeric_limits<double>::infinity();
    double horizon = std::numeric_limits<double>::infinity();
};

struct VertexVisit {
    double t = 0.0;
    int vertex = -1;
    int edge_out = -1;
};

struct GraphPathResult {
    GraphStopReason reason = GraphStopReason::none;
    double t_end = 0.0;
    double h_end = 0.0;
    int edge_end = -1;
    std::vector<VertexVisit> visits;

    std::vector<double> t, h;  // stride records
    std::vector<int> edge;
};

// Observer sees the state at the start of each accepted (partial) step.
using GraphStepObserver = std::function<void(double t, double h, int edge, double dt_step)>;

struct GraphSimOptions {
    double dt = 1e-4;
    int record_stride = 0;
};

GraphPathResult simulate_graph_path(const GraphDiffusion& gd, CounterRng& rng, GraphPoint start,
                                    const GraphStop& stop, const GraphSimOptions& opt,
                                    const GraphStepObserver& observer = nullptr);

// Convenience: gluing data for every interior vertex, graph order.
std::vector<GluingData> all_gluing_data(const HamiltonianSystem& sys, const ReebGraph& graph,
                                        const GluingOptions& opt = {});

// Monte Carlo estimate of the resolvent identity statistic
//   E[ e^{-lambda tau} f(Y_tau) + int_0^tau e^{-lambda s} (lambda f - L_i f)(Y_s) ds ],
// tau = first exit from the band; equals f(start) exactly for the limit
// process by Ito's formula.  The band must sit inside the start edge.
struct ResolventEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int censored = 0;  // paths that hit the horizon before leaving the band
    int n_paths = 0;
};

struct ResolventOptions {
    double lambda = 1.0;
    double band_lo = 0.0;
    double band_hi = 1.0;
    int n_paths = 1000;
    double dt = 1e-4;
    double horizon = 50.0;
    std::uint64_t seed = 1;
    std::uint64_t stream_offset = 0;
    ExecPolicy policy = ExecPolicy::parallel;
};

ResolventEstimate resolvent_apply(const GraphDiffusion& gd, const TestFunction1D& f,
                                  GraphPoint start, const ResolventOptions& opt);

}  // namespace fwavg
