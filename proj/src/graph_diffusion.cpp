#include "fwavg/graph_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fwavg {

GraphDiffusion::GraphDiffusion(const ReebGraph& graph, const CoefficientSet& coeffs,
                               std::vector<GluingData> gluing, const GraphDiffusionOptions& opt)
    : graph_(&graph), coeffs_(&coeffs), gluing_(std::move(gluing)), opt_(opt) {
    gluing_index_.assign(graph.vertices.size(), -1);
    offsets_.assign(graph.vertices.size(), 0.0);
    for (std::size_t k = 0; k < gluing_.size(); ++k)
        gluing_index_[static_cast<std::size_t>(gluing_[k].vertex)] = static_cast<int>(k);

    for (const ReebVertex& v : graph.vertices) {
        if (v.kind == VertexKind::interior && gluing_index_[static_cast<std::size_t>(v.id)] < 0)
            throw std::invalid_argument("GraphDiffusion: missing gluing data for vertex " +
                                        std::to_string(v.id));
        double min_span = std::numeric_limits<double>::infinity();
        for (int e : graph.edges_at_vertex(v.id)) {
            const ReebEdge& edge = graph.edge(e);
            min_span = std::min(min_span, edge.h_hi - edge.h_lo);
        }
        if (std::isfinite(min_span))
            offsets_[static_cast<std::size_t>(v.id)] = opt.delta_v_rel * min_span;
    }
}

const GluingData& GraphDiffusion::gluing_at(int vertex) const {
    const int k = gluing_index_.at(static_cast<std::size_t>(vertex));
    if (k < 0)
        throw std::invalid_argument("GraphDiffusion: no gluing data at vertex " +
                                    std::to_string(vertex));
    return gluing_[static_cast<std::size_t>(k)];
}

double GraphDiffusion::reemission_offset(int vertex) const {
    return offsets_.at(static_cast<std::size_t>(vertex));
}

namespace {

double clamp_level(const EdgeCoefficients& c, double h) {
    return std::clamp(h, c.h_grid.front(), c.h_grid.back());
}

}  // namespace

double GraphDiffusion::drift(int edge, double h) const {
    const EdgeCoefficients& c = coeffs_->for_edge(edge);
    return c.B(clamp_level(c, h));
}

double GraphDiffusion::diffusion_sq(int edge, double h) const {
    const EdgeCoefficients& c = coeffs_->for_edge(edge);
    return c.A(clamp_level(c, h));
}

double GraphDiffusion::generator(int edge, double h, const TestFunction1D& f) const {
    const EdgeCoefficients& c = coeffs_->for_edge(edge);
    const double x = clamp_level(c, h);
    const double scale = std::max(1.0, std::abs(x));
    return c.generator(x, f.d1(x, scale), f.d2(x, scale));
}

const char* graph_stop_reason_name(GraphStopReason r) {
    switch (r) {
        case GraphStopReason::horizon: return "horizon";
        case GraphStopReason::lower_exit: return "lower_exit";
        case GraphStopReason::upper_exit: return "upper_exit";
        case GraphStopReason::ceiling: return "ceiling";
        default: return "none";
    }
}

GraphPathResult simulate_graph_path(const GraphDiffusion& gd, CounterRng& rng, GraphPoint start,
                                    const GraphStop& stop, const GraphSimOptions& opt,
                                    const GraphStepObserver& observer) {
    if (!(opt.dt > 0.0)) throw std::invalid_argument("simulate_graph_path: dt must be positive");
    const ReebGraph& graph = gd.graph();
    if (start.is_vertex()) {
        // Launch from a vertex exactly as a mid-path visit would.
        const ReebVertex& v = graph.vertices.at(static_cast<std::size_t>(start.vertex));
        if (v.kind != VertexKind::interior)
            throw std::invalid_argument("simulate_graph_path: can only start from interior vertices");
        const GluingData& g = gd.gluing_at(v.id);
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = g.edges.size() - 1;
        for (std::size_t k = 0; k < g.prob.size(); ++k) {
            acc += g.prob[k];
            if (u <= acc) {
                pick = k;
                break;
            }
        }
        const int e = g.edges[pick];
        const ReebEdge& edge = graph.edge(e);
        const double sign = (edge.lower_vertex == v.id) ? +1.0 : -1.0;
        start = GraphPoint{v.h + sign * gd.reemission_offset(v.id), e, -1};
    }

    GraphPathResult res;
    double t = 0.0;
    double h = start.h;
    int edge_id = start.edge;

    auto record = [&]() {
        if (!res.t.empty() && res.t.back() == t) return;
        res.t.push_back(t);
        res.h.push_back(h);
        res.edge.push_back(edge_id);
    };
    if (opt.record_stride > 0) record();

    const bool check_lo = std::isfinite(stop.h_lo);
    const bool check_hi = std::isfinite(stop.h_hi);
    if (check_lo && h <= stop.h_lo)
        res.reason = GraphStopReason::lower_exit;
    else if (check_hi && h >= stop.h_hi)
        res.reason = GraphStopReason::upper_exit;

    long step_count = 0;
    while (res.reason == GraphStopReason::none) {
        if (t >= stop.horizon) {
            res.reason = GraphStopReason::horizon;
            break;
        }
        double dt_step = opt.dt;
        if (std::isfinite(stop.horizon)) dt_step = std::min(dt_step, stop.horizon - t);
        if (dt_step <= 0.0) {
            res.reason = GraphStopReason::horizon;
            break;
        }

        const double a = gd.diffusion_sq(edge_id, h);
        if (a < gd.options().a_floor)
            throw std::runtime_error("simulate_graph_path: diffusion coefficient fell below " +
                                     std::to_string(gd.options().a_floor) + " on edge " +
                                     std::to_string(edge_id));
        const double b = gd.drift(edge_id, h);
        double h_next = h + b * dt_step + std::sqrt(a * dt_step) * rng.normal();

        const ReebEdge& edge = graph.edge(edge_id);
        // Fold the step back off exterior (extremum) endpoints.  Each fold
        // moves h_next closer to the edge interval, so this terminates; the
        // clamp is a guard against degenerate spans.
        {
            const ReebVertex& lo_v = graph.vertices[static_cast<std::size_t>(edge.lower_vertex)];
            const ReebVertex& hi_v = graph.vertices[static_cast<std::size_t>(edge.upper_vertex)];
            for (int pass = 0; pass < 64; ++pass) {
                if (h_next < edge.h_lo && lo_v.kind == VertexKind::exterior)
                    h_next = 2.0 * edge.h_lo - h_next;
                else if (h_next > edge.h_hi && hi_v.kind == VertexKind::exterior)
                    h_next = 2.0 * edge.h_hi - h_next;
                else
                    break;
            }
            if (lo_v.kind == VertexKind::exterior && h_next < edge.h_lo) h_next = edge.h_lo;
            if (hi_v.kind == VertexKind::exterior && h_next > edge.h_hi) h_next = edge.h_hi;
        }

        // Earliest event along the step, by linear crossing fraction.
        double theta = 1.0;
        enum class Event { none, band_lo, band_hi, vertex_lo, vertex_hi } event = Event::none;
        auto consider = [&](double level, Event kind) {
            const double denom = h_next - h;
            if (denom == 0.0) return;
            const double th = (level - h) / denom;
            if (th >= 0.0 && th < theta) {
                theta = th;
                event = kind;
            }
        };
        if (check_lo && h_next <= stop.h_lo) consider(stop.h_lo, Event::band_lo);
        if (check_hi && h_next >= stop.h_hi) consider(stop.h_hi, Event::band_hi);
        if (h_next < edge.h_lo) consider(edge.h_lo, Event::vertex_lo);
        if (h_next > edge.h_hi) consider(edge.h_hi, Event::vertex_hi);

        if (event == Event::none) {
            if (observer) observer(t, h, edge_id, dt_step);
            t += dt_step;
            h = h_next;
            ++step_count;
            if (opt.record_stride > 0 && step_count % opt.record_stride == 0) record();
            continue;
        }

        if (observer) observer(t, h, edge_id, theta * dt_step);
        t += theta * dt_step;

        if (event == Event::band_lo || event == Event::band_hi) {
            h = (event == Event::band_lo) ? stop.h_lo : stop.h_hi;
            res.reason =
                (event == Event::band_lo) ? GraphStopReason::lower_exit : GraphStopReason::upper_exit;
            break;
        }

        const int vid = (event == Event::vertex_lo) ? edge.lower_vertex : edge.upper_vertex;
        const ReebVertex& v = graph.vertices[static_cast<std::size_t>(vid)];
        if (v.kind == VertexKind::ceiling) {
            h = v.h;
            res.reason = GraphStopReason::ceiling;
            break;
        }
        // Interior vertex: draw the outgoing edge from the gluing law and
        // re-emit a small offset into it.
        const GluingData& g = gd.gluing_at(vid);
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = g.edges.size() - 1;
        for (std::size_t k = 0; k < g.prob.size(); ++k) {
            acc += g.prob[k];
            if (u <= acc) {
                pick = k;
                break;
            }
        }
        edge_id = g.edges[pick];
        const ReebEdge& out = graph.edge(edge_id);
        const double sign = (out.lower_vertex == vid) ? +1.0 : -1.0;
        h = v.h + sign * gd.reemission_offset(vid);
        res.visits.push_back({t, vid, edge_id});
        if (opt.record_stride > 0) record();
    }

    res.t_end = t;
    res.h_end = h;
    res.edge_end = edge_id;
    if (opt.record_stride > 0) record();
    return res;
}

std::vector<GluingData> all_gluing_data(const HamiltonianSystem& sys, const ReebGraph& graph,
                                        const GluingOptions& opt) {
    std::vector<GluingData> out;
    for (const ReebVertex& v : graph.vertices)
        if (v.kind == VertexKind::interior) out.push_back(gluing_probabilities(sys, graph, v.id, opt));
    return out;
}

ResolventEstimate resolvent_apply(const GraphDiffusion& gd, const TestFunction1D& f,
                                  GraphPoint start, const ResolventOptions& opt) {
    if (!(opt.lambda > 0.0)) throw std::invalid_argument("resolvent_apply: lambda must be positive");
    if (start.is_vertex())
        throw std::invalid_argument("resolvent_apply: start must lie inside an edge");
    const ReebEdge& edge = gd.graph().edge(start.edge);
    if (!(edge.h_lo < opt.band_lo && opt.band_hi < edge.h_hi))
        throw std::invalid_argument("resolvent_apply: band is not contained in one edge");
    if (!(opt.band_lo < start.h && start.h < opt.band_hi))
        throw std::invalid_argument("resolvent_apply: start level is outside the band");

    GraphStop stop;
    stop.h_lo = opt.band_lo;
    stop.h_hi = opt.band_hi;
    stop.horizon = opt.horizon;
    GraphSimOptions sopt;
    sopt.dt = opt.dt;

    std::vector<double> values(static_cast<std::size_t>(opt.n_paths), 0.0);
    std::vector<char> hit_horizon(static_cast<std::size_t>(opt.n_paths), 0);
    for_each_index(opt.n_paths, opt.policy, [&](int i) {
        CounterRng rng(opt.seed, opt.stream_offset + static_cast<std::uint64_t>(i));
        double acc = 0.0;
        const GraphStepObserver observer = [&](double t, double h, int e, double dt_step) {
            acc += std::exp(-opt.lambda * t) *
                   (opt.lambda * f.eval(h) - gd.generator(e, h, f)) * dt_step;
        };
        const GraphPathResult res = simulate_graph_path(gd, rng, start, stop, sopt, observer);
        acc += std::exp(-opt.lambda * res.t_end) * f.eval(res.h_end);
        values[static_cast<std::size_t>(i)] = acc;
        hit_horizon[static_cast<std::size_t>(i)] =
            (res.reason == GraphStopReason::horizon) ? 1 : 0;
    });

    ResolventEstimate est;
    est.n_paths = opt.n_paths;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        sum_sq += values[i] * values[i];
        est.censored += hit_horizon[i];
    }
    est.value = sum / opt.n_paths;
    if (opt.n_paths > 1) {
        const double var = (sum_sq - sum * sum / opt.n_paths) / (opt.n_paths - 1);
        est.std_error = std::sqrt(std::max(0.0, var) / opt.n_paths);
    }
    return est;
}

}  // namespace fwavg
