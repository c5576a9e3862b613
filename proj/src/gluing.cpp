#include "fwavg/gluing.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fwavg/level_cycle.hpp"

namespace fwavg {

namespace {

double ring_integral(const HamiltonianSystem& sys, const ReebGraph& graph, int edge, double h,
                     const GluingOptions& opt) {
    TraceOptions topt;
    topt.ode_tol = opt.ode_tol;
    topt.n_samples = opt.n_samples;
    LevelCycle cycle = trace_cycle(sys, graph, edge, h, topt);
    return cycle.integral([&sys](Vec2 z) {
        const Vec2 grad = sys.grad(z);
        const Mat2 sig = sys.diffusion(z);
        return quad_form(grad, sig * sig.transpose());
    });
}

}  // namespace

GluingData gluing_probabilities(const HamiltonianSystem& sys, const ReebGraph& graph, int vertex,
                                const GluingOptions& opt) {
    const ReebVertex& v = graph.vertices.at(static_cast<std::size_t>(vertex));
    if (v.kind != VertexKind::interior)
        throw std::invalid_argument("gluing_probabilities: vertex " + std::to_string(vertex) +
                                    " is not an interior (saddle) vertex");

    GluingData data;
    data.vertex = vertex;
    data.edges = graph.edges_at_vertex(vertex);

    double total = 0.0;
    for (int e : data.edges) {
        const ReebEdge& edge = graph.edge(e);
        const double span = edge.h_hi - edge.h_lo;
        const double sign = (edge.lower_vertex == vertex) ? +1.0 : -1.0;
        const double delta = opt.delta_rel * span;

        const double beta_d = ring_integral(sys, graph, e, v.h + sign * delta, opt);
        const double beta_half = ring_integral(sys, graph, e, v.h + sign * 0.5 * delta, opt);
        const double beta_star = 2.0 * beta_half - beta_d;

        const double gap = std::abs(beta_star - beta_half) / std::max(1e-300, std::abs(beta_star));
        data.extrapolation_gap = std::max(data.extrapolation_gap, gap);
        if (!(beta_star > 0.0) || gap > opt.richardson_tol)
            throw std::runtime_error(
                "gluing_probabilities: ring integrals did not extrapolate cleanly at vertex " +
                std::to_string(vertex) + " (gap " + std::to_string(gap) + ")");

        data.beta.push_back(beta_star);
        total += beta_star;
    }
    for (double b : data.beta) data.prob.push_back(b / total);
    return data;
}

namespace {

struct Simpson {
    const HamiltonianSystem& sys;
    const ScalarField& field;
    const CompensatorOptions& opt;
    double z2;

    double integrand(double u) const {
        const Vec2 p{u, z2};
        const double grad_norm = sys.grad(p).norm();
        if (grad_norm < opt.min_grad * (1.0 + p.norm()))
            throw std::runtime_error("compensating_drift: integration path crosses the critical set");
        return apply_generator(sys, field, p, opt.use_eps_family);
    }

    double recurse(double a, double b, double fa, double fm, double fb, double whole,
                   int depth) const {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = integrand(lm);
        const double frm = integrand(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double err = left + right - whole;
        if (depth <= 0 || std::abs(err) < 15.0 * opt.quad_tol)
            return left + right + err / 15.0;
        return recurse(a, m, fa, flm, fm, left, depth - 1) +
               recurse(m, b, fm, frm, fb, right, depth - 1);
    }

    double integrate(double a, double b) const {
        if (a == b) return 0.0;
        const double fa = integrand(a);
        const double fb = integrand(b);
        const double m = 0.5 * (a + b);
        const double fm = integrand(m);
        const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        return recurse(a, b, fa, fm, fb, whole, opt.max_depth);
    }
};

}  // namespace

Vec2 compensating_drift(const HamiltonianSystem& sys, Vec2 z, const CompensatorOptions& opt) {
    ScalarField a_inv_field = [&sys](Vec2 w) { return sys.a_inv(w); };
    Simpson quad{sys, a_inv_field, opt, z.y};
    const double integral = quad.integrate(0.0, z.x);
    return Vec2{sys.a(z) * integral, 0.0};
}

}  // namespace fwavg
