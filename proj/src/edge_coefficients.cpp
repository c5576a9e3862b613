#include "fwavg/edge_coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fwavg/ensemble.hpp"

namespace fwavg {

namespace {

bool is_saddle_end(const ReebGraph& graph, int vertex) {
    return graph.vertices.at(static_cast<std::size_t>(vertex)).kind == VertexKind::interior;
}

TraceOptions trace_options(const CoefficientOptions& opt) {
    TraceOptions t;
    t.ode_tol = opt.ode_tol;
    t.n_samples = opt.n_samples;
    return t;
}

}  // namespace

std::vector<double> edge_level_grid(const ReebGraph& graph, int edge, int n,
                                    double delta_trace_rel) {
    const ReebEdge& e = graph.edge(edge);
    const double span = e.h_hi - e.h_lo;
    const double margin = delta_trace_rel * span;
    const double lo = e.h_lo + margin;
    const double hi = e.h_hi - margin;
    if (n < 4) throw std::invalid_argument("edge_level_grid: need at least 4 levels");

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n) + 32);
    for (int k = 0; k < n; ++k)
        grid.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));

    // Geometric refinement toward saddle endpoints, where the period grows
    // like -log(distance) and a uniform grid under-resolves the spline.
    auto add_ladder = [&](double anchor, double direction) {
        for (double step = margin; step < 0.25 * span; step *= 2.0)
            grid.push_back(anchor + direction * step);
    };
    if (is_saddle_end(graph, e.lower_vertex)) add_ladder(lo, +1.0);
    if (is_saddle_end(graph, e.upper_vertex)) add_ladder(hi, -1.0);

    std::sort(grid.begin(), grid.end());
    // Drop near-duplicates so spline nodes stay well separated.
    const double min_sep = 0.05 * (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> out;
    out.reserve(grid.size());
    for (double h : grid) {
        if (h < lo || h > hi) continue;
        if (!out.empty() && h - out.back() < min_sep) continue;
        out.push_back(h);
    }
    if (out.back() < hi) out.push_back(hi);
    return out;
}

namespace {

struct EdgeTables {
    std::vector<std::vector<double>> values;  // per edge, per grid node
    std::vector<std::vector<double>> grids;
};

// Traces every (edge, level) cycle once and evaluates a list of cycle
// integrals oint f dl/|g| on each.
EdgeTables tabulate(const HamiltonianSystem& sys, const ReebGraph& graph,
                    const std::vector<ScalarField>& integrands, const CoefficientOptions& opt,
                    std::vector<std::vector<std::vector<double>>>& per_integrand) {
    const int n_edges = static_cast<int>(graph.edges.size());
    EdgeTables tables;
    tables.grids.resize(static_cast<std::size_t>(n_edges));
    per_integrand.assign(integrands.size(), {});
    for (auto& t : per_integrand) t.resize(static_cast<std::size_t>(n_edges));

    struct Job {
        int edge;
        int node;
        double h;
    };
    std::vector<Job> jobs;
    for (int e = 0; e < n_edges; ++e) {
        tables.grids[static_cast<std::size_t>(e)] =
            edge_level_grid(graph, e, opt.levels_per_edge, opt.delta_trace_rel);
        const auto& g = tables.grids[static_cast<std::size_t>(e)];
        for (auto& t : per_integrand)
            t[static_cast<std::size_t>(e)].resize(g.size(), 0.0);
        for (std::size_t k = 0; k < g.size(); ++k)
            jobs.push_back({e, static_cast<int>(k), g[k]});
    }

    const TraceOptions topt = trace_options(opt);
    const ExecPolicy policy = opt.parallel ? ExecPolicy::parallel : ExecPolicy::serial;
    for_each_index(static_cast<int>(jobs.size()), policy, [&](int j) {
        const Job& job = jobs[static_cast<std::size_t>(j)];
        LevelCycle cycle = trace_cycle(sys, graph, job.edge, job.h, topt);
        for (std::size_t q = 0; q < integrands.size(); ++q)
            per_integrand[q][static_cast<std::size_t>(job.edge)][static_cast<std::size_t>(job.node)] =
                cycle.integral(integrands[q]);
    });
    return tables;
}

}  // namespace

CoefficientSet edge_coefficients(const HamiltonianSystem& sys, const ReebGraph& graph,
                                 const CoefficientOptions& opt) {
    std::vector<ScalarField> integrands;
    integrands.push_back([](Vec2) { return 1.0; });  // yields T via oint dl/|g|
    integrands.push_back([&sys](Vec2 z) {
        const Vec2 grad = sys.grad(z);
        const Mat2 sig = sys.diffusion(z);
        return quad_form(grad, sig * sig.transpose());
    });
    integrands.push_back([&sys](Vec2 z) { return evaluate_operators(sys, z).l0_h; });

    std::vector<std::vector<std::vector<double>>> vals;
    EdgeTables tables = tabulate(sys, graph, integrands, opt, vals);

    CoefficientSet set;
    set.edges.resize(graph.edges.size());
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        EdgeCoefficients& c = set.edges[e];
        c.edge = static_cast<int>(e);
        c.h_grid = tables.grids[e];
        c.period = vals[0][e];
        c.a_bar = vals[1][e];
        c.b_bar = vals[2][e];
        c.period_spline = CubicSpline(c.h_grid, c.period);
        c.a_bar_spline = CubicSpline(c.h_grid, c.a_bar);
        c.b_bar_spline = CubicSpline(c.h_grid, c.b_bar);
    }
    return set;
}

std::vector<CubicSpline> edge_cycle_table(const HamiltonianSystem& sys, const ReebGraph& graph,
                                          const ScalarField& f, const CoefficientOptions& opt) {
    std::vector<std::vector<std::vector<double>>> vals;
    EdgeTables tables = tabulate(sys, graph, {f}, opt, vals);
    std::vector<CubicSpline> out(graph.edges.size());
    for (std::size_t e = 0; e < graph.edges.size(); ++e)
        out[e] = CubicSpline(tables.grids[e], vals[0][e]);
    return out;
}

RegionIntegralTable::RegionIntegralTable(const HamiltonianSystem& sys, const ReebGraph& graph,
                                         const ScalarField& f, const CoefficientOptions& opt) {
    // Layer-cake rate: oint f dl/|grad H| = oint (f a) dl/|g|.
    ScalarField rate_integrand = [&sys, &f](Vec2 z) { return f(z) * sys.a(z); };
    std::vector<std::vector<std::vector<double>>> vals;
    EdgeTables tables = tabulate(sys, graph, {rate_integrand}, opt, vals);

    const std::size_t n_edges = graph.edges.size();
    cumulative_.resize(n_edges);
    rate_.resize(n_edges);

    // Process edges from the bottom of the graph up, so base offsets from
    // merged sub-regions are available when a higher edge needs them.
    std::vector<std::size_t> order(n_edges);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&graph](std::size_t a, std::size_t b) {
        return graph.edges[a].h_hi < graph.edges[b].h_hi;
    });

    std::vector<double> top_value(n_edges, 0.0);
    for (std::size_t e : order) {
        const ReebEdge& edge = graph.edges[e];
        const std::vector<double>& grid = tables.grids[e];
        const std::vector<double>& m = vals[0][e];

        double base = 0.0;
        for (std::size_t other = 0; other < n_edges; ++other)
            if (graph.edges[other].upper_vertex == edge.lower_vertex) base += top_value[other];

        std::vector<double> cum(grid.size(), 0.0);
        // Sliver between the exact vertex level and the first tabulated node.
        cum[0] = base + m[0] * (grid[0] - edge.h_lo);
        for (std::size_t k = 1; k < grid.size(); ++k)
            cum[k] = cum[k - 1] + 0.5 * (m[k - 1] + m[k]) * (grid[k] - grid[k - 1]);

        top_value[e] = cum.back() + m.back() * (edge.h_hi - grid.back());
        cumulative_[e] = CubicSpline(grid, cum);
        rate_[e] = CubicSpline(grid, m);
    }
}

double RegionIntegralTable::operator()(int edge, double x) const {
    return cumulative_.at(static_cast<std::size_t>(edge))(x);
}

double RegionIntegralTable::boundary_rate(int edge, double x) const {
    return rate_.at(static_cast<std::size_t>(edge))(x);
}

double TestFunction1D::d1(double x, double scale) const {
    if (f1) return f1(x);
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, scale);
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double TestFunction1D::d2(double x, double scale) const {
    if (f2) return f2(x);
    const double h =
        std::pow(std::numeric_limits<double>::epsilon(), 0.25) * std::max(1.0, scale);
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

OperatorResidual generalized_operator_residual(const HamiltonianSystem& sys,
                                               const ReebGraph& graph,
                                               const CoefficientSet& coeffs,
                                               const RegionIntegralTable& adjoint_region, int edge,
                                               const TestFunction1D& f, double x) {
    (void)sys;
    (void)graph;
    const EdgeCoefficients& c = coeffs.for_edge(edge);
    const double scale = std::max(1.0, std::abs(x));
    const double f1 = f.d1(x, scale);
    const double f2 = f.d2(x, scale);

    const double T = c.period_spline(x);
    const double abar = c.a_bar_spline(x);
    const double abar1 = c.a_bar_spline.derivative(x);

    OperatorResidual r;
    // d/dv (df/du) with u' = 1/a_bar, v' = T.
    r.lhs = (f2 * abar + f1 * abar1) / T;
    r.correction = (2.0 / T) * adjoint_region(edge, x) * f1;
    r.rhs = 2.0 * c.generator(x, f1, f2) + r.correction;
    r.residual = std::abs(r.lhs - r.rhs) / std::max(1.0, std::abs(r.lhs));
    return r;
}

RegionIntegralTable adjoint_density_region_table(const HamiltonianSystem& sys,
                                                 const ReebGraph& graph,
                                                 const CoefficientOptions& opt) {
    ScalarField a_inv_field = [&sys](Vec2 w) { return sys.a_inv(w); };
    ScalarField integrand = [&sys, a_inv_field](Vec2 z) {
        return apply_adjoint(sys, a_inv_field, z);
    };
    return RegionIntegralTable(sys, graph, integrand, opt);
}

}  // namespace fwavg
