#include "fwavg/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fwavg/level_cycle.hpp"

namespace fwavg {

void check_time_step(double dt, double epsilon) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (dt > kFastStepFraction * epsilon * (1.0 + 1e-12))
        throw std::invalid_argument(
            "time step too large for the fast scale: require dt <= epsilon/50, got dt = " +
            std::to_string(dt) + " at epsilon = " + std::to_string(epsilon));
}

const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::horizon: return "horizon";
        case StopReason::lower_exit: return "lower_exit";
        case StopReason::upper_exit: return "upper_exit";
        case StopReason::blowup: return "blowup";
        default: return "none";
    }
}

Vec2 em_step(const HamiltonianSystem& sys, Vec2& z, double dt, CounterRng& rng) {
    const auto n = rng.normal_pair();
    const double root_dt = std::sqrt(dt);
    const Vec2 dw{n[0] * root_dt, n[1] * root_dt};
    const Vec2 drift = sys.fast_field(z) / sys.epsilon + sys.drift(z) +
                       sys.drift_eps(sys.epsilon, z);
    const Mat2 sig = sys.diffusion(z) + sys.diffusion_eps(sys.epsilon, z);
    z = z + drift * dt + sig * dw;
    return dw;
}

namespace {

// Bisection for the crossing of `target` by H along the straight segment
// z_prev -> z_next; returns theta on the far side of the crossing.
double refine_crossing(const HamiltonianSystem& sys, Vec2 z_prev, Vec2 z_next, double target,
                       double side, double theta_tol) {
    double lo = 0.0, hi = 1.0;
    while (hi - lo > theta_tol) {
        const double mid = 0.5 * (lo + hi);
        const Vec2 zm = z_prev + (z_next - z_prev) * mid;
        if (side * (sys.h(zm) - target) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace

PathRecord simulate_path(const HamiltonianSystem& sys, CounterRng& rng, Vec2 q0,
                         const StopCondition& stop, const SimOptions& opt,
                         const ReebGraph* graph, const StepObserver& observer) {
    check_time_step(opt.dt, sys.epsilon);
    if (opt.track_edges && graph == nullptr)
        throw std::invalid_argument("simulate_path: edge tracking needs a Reeb graph");

    PathRecord rec;
    double t = 0.0;
    Vec2 z = q0;
    double h = sys.h(z);
    rec.h_sup = h;

    auto record = [&](double tt, Vec2 zz, double hh) {
        if (!rec.t.empty() && rec.t.back() == tt) return;
        rec.t.push_back(tt);
        rec.z.push_back(zz);
        rec.h.push_back(hh);
        if (opt.track_edges) {
            const GraphPoint p = identify(*graph, sys, zz);
            rec.edge.push_back(p.is_vertex() ? -1 : p.edge);
        }
    };

    const bool check_lo = std::isfinite(stop.h_lo);
    const bool check_hi = std::isfinite(stop.h_hi);
    if (opt.record_stride > 0) record(t, z, h);

    if (check_lo && h <= stop.h_lo)
        rec.reason = StopReason::lower_exit;
    else if (check_hi && h >= stop.h_hi)
        rec.reason = StopReason::upper_exit;

    long step_count = 0;
    while (rec.reason == StopReason::none) {
        if (t >= stop.horizon) {
            rec.reason = StopReason::horizon;
            break;
        }
        double dt_step = opt.dt;
        if (std::isfinite(stop.horizon)) dt_step = std::min(dt_step, stop.horizon - t);
        if (dt_step <= 0.0) {
            rec.reason = StopReason::horizon;
            break;
        }

        const Vec2 z_prev = z;
        const double h_prev = h;
        em_step(sys, z, dt_step, rng);
        h = sys.h(z);
        if (!std::isfinite(h) || !std::isfinite(z.x) || !std::isfinite(z.y)) {
            t += dt_step;
            rec.reason = StopReason::blowup;
            break;
        }

        int crossed = 0;
        if (check_lo && h <= stop.h_lo)
            crossed = -1;
        else if (check_hi && h >= stop.h_hi)
            crossed = +1;

        if (crossed != 0) {
            const double target = crossed < 0 ? stop.h_lo : stop.h_hi;
            const double side = static_cast<double>(crossed);
            const double theta =
                refine_crossing(sys, z_prev, z, target, side, opt.refine_frac);
            z = z_prev + (z - z_prev) * theta;
            h = sys.h(z);
            if (observer) observer(t, z_prev, h_prev, theta * dt_step);
            t += theta * dt_step;
            rec.h_sup = std::max(rec.h_sup, h);
            rec.reason = crossed < 0 ? StopReason::lower_exit : StopReason::upper_exit;
            break;
        }

        if (observer) observer(t, z_prev, h_prev, dt_step);
        t += dt_step;
        rec.h_sup = std::max(rec.h_sup, h);
        ++step_count;
        if (opt.record_stride > 0 && step_count % opt.record_stride == 0) record(t, z, h);
    }

    rec.t_end = t;
    rec.z_end = z;
    rec.h_end = h;
    if (opt.record_stride > 0) record(t, z, h);
    return rec;
}

CoupledResult coupled_simulation(const HamiltonianSystem& sys, const ReebGraph& graph,
                                 const CoefficientSet& coeffs, CounterRng& rng, Vec2 q0,
                                 const CoupledOptions& opt) {
    check_time_step(opt.dt, sys.epsilon);
    const GraphPoint start = identify(graph, sys, q0);
    if (start.is_vertex())
        throw std::invalid_argument("coupled_simulation: start point sits on a vertex level");
    const EdgeCoefficients& c = coeffs.for_edge(start.edge);
    const double grid_lo = c.h_grid.front();
    const double grid_hi = c.h_grid.back();
    auto a_of = [&](double x) { return std::max(0.0, c.A(std::clamp(x, grid_lo, grid_hi))); };
    auto b_of = [&](double x) { return c.B(std::clamp(x, grid_lo, grid_hi)); };

    CoupledResult res;
    double t = 0.0;
    Vec2 q = q0;
    double h = sys.h(q);
    double beta = 0.0;
    double x_lim = h;

    double anchor_x = h, anchor_beta = 0.0, anchor_t = 0.0;
    double frozen_b = b_of(h), frozen_sqrt_a = std::sqrt(a_of(h));
    double next_mark = sys.epsilon * orbit_period(sys, q);
    double xi = h;

    auto record = [&]() {
        res.t.push_back(t);
        res.h.push_back(h);
        res.xi.push_back(xi);
        res.x_limit.push_back(x_lim);
        res.beta.push_back(beta);
    };
    if (opt.record_stride > 0) record();

    long step_count = 0;
    while (t < opt.horizon && h > opt.band_lo && h < opt.band_hi) {
        const double dt_step = std::min(opt.dt, opt.horizon - t);

        // Direction of the projected noise, frozen at the step start.
        const OperatorValues ops = evaluate_operators(sys, q);
        const double vn = ops.r0_h.norm();
        const Vec2 unit = vn < opt.degenerate_tol ? Vec2{1.0, 0.0} : ops.r0_h / vn;

        const Vec2 dw = em_step(sys, q, dt_step, rng);
        const double dbeta = unit.dot(dw);

        x_lim += b_of(x_lim) * dt_step + std::sqrt(a_of(x_lim)) * dbeta;
        beta += dbeta;
        t += dt_step;
        h = sys.h(q);
        xi = anchor_x + frozen_b * (t - anchor_t) + frozen_sqrt_a * (beta - anchor_beta);

        res.sup_xi_vs_h = std::max(res.sup_xi_vs_h, std::abs(xi - h));
        res.sup_xi_vs_limit = std::max(res.sup_xi_vs_limit, std::abs(xi - x_lim));

        if (t >= next_mark && h > opt.band_lo && h < opt.band_hi) {
            anchor_x = h;
            anchor_beta = beta;
            anchor_t = t;
            frozen_b = b_of(h);
            frozen_sqrt_a = std::sqrt(a_of(h));
            next_mark = t + sys.epsilon * orbit_period(sys, q);
            xi = h;
            ++res.marks;
        }

        ++step_count;
        if (opt.record_stride > 0 && step_count % opt.record_stride == 0) record();
    }

    res.t_end = t;
    if (h <= opt.band_lo)
        res.reason = StopReason::lower_exit;
    else if (h >= opt.band_hi)
        res.reason = StopReason::upper_exit;
    else
        res.reason = StopReason::horizon;
    if (opt.record_stride > 0) record();
    return res;
}

HittingStats hitting_statistics(const HamiltonianSystem& sys, const ReebGraph& graph,
                                const HittingOptions& opt) {
    const ReebVertex& v = graph.vertices.at(static_cast<std::size_t>(opt.vertex));
    if (v.kind != VertexKind::interior)
        throw std::invalid_argument("hitting_statistics: vertex is not interior");
    if (!(opt.delta_prime > 0.0) || opt.delta_prime >= opt.delta)
        throw std::invalid_argument("hitting_statistics: need 0 < delta_prime < delta");

    HittingStats st;
    st.edges = graph.edges_at_vertex(opt.vertex);
    for (int e : st.edges) {
        const ReebEdge& edge = graph.edge(e);
        if (edge.h_hi - edge.h_lo <= opt.delta)
            throw std::invalid_argument("hitting_statistics: delta exceeds an incident edge span");
    }
    for (const ReebVertex& other : graph.vertices)
        if (other.id != v.id && std::abs(other.h - v.h) < opt.delta &&
            other.kind != VertexKind::exterior)
            throw std::invalid_argument(
                "hitting_statistics: another vertex level lies inside the band");

    const ReebEdge& start = graph.edge(opt.start_edge);
    if (start.lower_vertex != opt.vertex && start.upper_vertex != opt.vertex)
        throw std::invalid_argument("hitting_statistics: start edge is not incident");
    const double sign = (start.lower_vertex == opt.vertex) ? +1.0 : -1.0;

    TraceOptions topt;
    topt.n_samples = 512;
    const LevelCycle ring =
        trace_cycle(sys, graph, opt.start_edge, v.h + sign * opt.delta_prime, topt);

    StopCondition stop;
    stop.h_lo = v.h - opt.delta;
    stop.h_hi = v.h + opt.delta;
    stop.horizon = opt.horizon;
    SimOptions sopt;
    sopt.dt = opt.dt;

    std::vector<int> exit_edge(static_cast<std::size_t>(opt.n_paths), -2);
    std::vector<double> exit_time(static_cast<std::size_t>(opt.n_paths), 0.0);
    for_each_index(opt.n_paths, opt.policy, [&](int i) {
        CounterRng rng(opt.seed, opt.stream_offset + static_cast<std::uint64_t>(i));
        const Vec2 z0 = ring.at_time(rng.uniform() * ring.period);
        const PathRecord rec = simulate_path(sys, rng, z0, stop, sopt);
        const auto idx = static_cast<std::size_t>(i);
        if (rec.reason != StopReason::lower_exit && rec.reason != StopReason::upper_exit)
            return;  // horizon/blowup stays censored (-2)
        const GraphPoint p = identify(graph, sys, rec.z_end);
        exit_edge[idx] = p.is_vertex() ? -3 : p.edge;
        exit_time[idx] = rec.t_end;
    });

    st.counts.assign(st.edges.size(), 0);
    double time_sum = 0.0, time_sq = 0.0;
    int classified = 0;
    for (int i = 0; i < opt.n_paths; ++i) {
        const int e = exit_edge[static_cast<std::size_t>(i)];
        if (e == -2) {
            ++st.censored;
            continue;
        }
        const auto it = std::find(st.edges.begin(), st.edges.end(), e);
        if (e == -3 || it == st.edges.end()) {
            ++st.unclassified;
            continue;
        }
        ++st.counts[static_cast<std::size_t>(it - st.edges.begin())];
        const double tau = exit_time[static_cast<std::size_t>(i)];
        time_sum += tau;
        time_sq += tau * tau;
        ++classified;
    }

    st.prob.assign(st.edges.size(), 0.0);
    st.std_err.assign(st.edges.size(), 0.0);
    if (classified > 0) {
        for (std::size_t k = 0; k < st.edges.size(); ++k) {
            const double p = static_cast<double>(st.counts[k]) / classified;
            st.prob[k] = p;
            st.std_err[k] = std::sqrt(std::max(0.0, p * (1.0 - p) / classified));
        }
        st.mean_exit_time = time_sum / classified;
        if (classified > 1) {
            const double var =
                (time_sq - time_sum * time_sum / classified) / (classified - 1);
            st.se_exit_time = std::sqrt(std::max(0.0, var) / classified);
        }
    }
    return st;
}

}  // namespace fwavg
