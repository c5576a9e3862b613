#include <cstdio>

#include "fwavg/edge_coefficients.hpp"
#include "fwavg/reeb_graph.hpp"
#include "fwavg/sde.hpp"

using namespace fwavg;

int main() {
    const double eps = 0.02;
    const HamiltonianSystem sys = make_builtin("duffing", eps);
    const CriticalPointSearch search = find_critical_points(sys, {-2.5, 2.5, -2.5, 2.5});
    const ReebGraph graph = build_reeb_graph(sys, search.points, 2.0, {-2.5, 2.5, -2.5, 2.5});
    int saddle = -1, outer = -1;
    for (const ReebVertex& v : graph.vertices)
        if (v.kind == VertexKind::interior) saddle = v.id;
    for (const ReebEdge& e : graph.edges)
        if (e.lower_vertex == saddle) outer = e.id;

    for (const double delta : {0.16, 0.08}) {
        HittingOptions opt;
        opt.vertex = saddle;
        opt.start_edge = outer;
        opt.delta = delta;
        opt.delta_prime = delta / 10.0;
        opt.n_paths = 1500;
        opt.dt = resolved_time_step(1e-4, eps);
        opt.horizon = 5.0;
        opt.seed = 1618;
        const HittingStats st = hitting_statistics(sys, graph, opt);
        std::printf("eps=%.3f delta=%.3f mean=%.5e se=%.2e censored=%d\n", eps, delta,
                    st.mean_exit_time, st.se_exit_time, st.censored);
    }
    return 0;
}
