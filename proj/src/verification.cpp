#include "fwavg/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fwavg/level_cycle.hpp"

namespace fwavg {

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& v) {
    MeanSe out;
    if (v.empty()) return out;
    double sum = 0.0;
    for (double x : v) sum += x;
    out.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) /
                           static_cast<double>(v.size()));
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Monotone non-increase of gaps along the ladder, allowing 3 combined
// standard errors of slack per step (the tolerance policy for statistical
// comparisons).
bool gaps_decrease(const std::vector<RungResult>& rungs, double extra_slack = 0.0) {
    for (std::size_t k = 0; k + 1 < rungs.size(); ++k) {
        const double slack = 3.0 * std::sqrt(rungs[k].std_error * rungs[k].std_error +
                                             rungs[k + 1].std_error * rungs[k + 1].std_error);
        if (rungs[k + 1].gap > rungs[k].gap + slack + extra_slack) return false;
    }
    return true;
}

double sim_dt(double dt_config, double epsilon) {
    return resolved_time_step(dt_config, epsilon);
}

Vec2 start_point(const VerificationContext& ctx, int edge, double level) {
    const ReebEdge& e = ctx.graph.edge(edge);
    if (!(e.h_lo < level && level < e.h_hi))
        throw std::invalid_argument("start level " + std::to_string(level) +
                                    " is outside edge " + std::to_string(edge));
    return point_on_level(ctx.sys, e.seed, level);
}

}  // namespace

TestFunction1D make_test_function(const std::string& name) {
    if (name == "square")
        return TestFunction1D{[](double x) { return x * x; }, [](double x) { return 2.0 * x; },
                              [](double) { return 2.0; }};
    if (name == "identity")
        return TestFunction1D{[](double x) { return x; }, [](double) { return 1.0; },
                              [](double) { return 0.0; }};
    if (name == "constant")
        return TestFunction1D{[](double) { return 1.0; }, [](double) { return 0.0; },
                              [](double) { return 0.0; }};
    throw std::invalid_argument("unknown test function: " + name);
}

VerificationContext make_context(const ExperimentConfig& cfg) {
    VerificationContext ctx;
    ctx.cfg = cfg;
    ctx.policy = (cfg.threads == 1) ? ExecPolicy::serial : ExecPolicy::parallel;
    ctx.sys = make_builtin(cfg.model, cfg.epsilon, cfg.perturbation_scale);

    FindCriticalOptions fopt;
    fopt.grid_n = cfg.grid_n;
    const CriticalPointSearch search = find_critical_points(ctx.sys, cfg.box, fopt);

    BuildOptions bopt;
    bopt.grid_n = cfg.grid_n;
    bopt.polygon_samples = cfg.cycle_samples;
    ctx.graph = build_reeb_graph(ctx.sys, search.points, cfg.h_max, cfg.box, bopt);

    CoefficientOptions copt;
    copt.levels_per_edge = cfg.levels_per_edge;
    copt.n_samples = cfg.cycle_samples;
    copt.parallel = (ctx.policy == ExecPolicy::parallel);
    ctx.coeffs = edge_coefficients(ctx.sys, ctx.graph, copt);

    ctx.gluing = all_gluing_data(ctx.sys, ctx.graph);
    return ctx;
}

ResolventEstimate full_system_resolvent(const HamiltonianSystem& sys,
                                        const CoefficientSet& coeffs, int edge,
                                        const TestFunction1D& f, Vec2 q0,
                                        const ResolventOptions& opt) {
    const EdgeCoefficients& c = coeffs.for_edge(edge);
    const double grid_lo = c.h_grid.front();
    const double grid_hi = c.h_grid.back();
    auto limit_generator = [&](double h) {
        const double x = std::clamp(h, grid_lo, grid_hi);
        const double scale = std::max(1.0, std::abs(x));
        return c.generator(x, f.d1(x, scale), f.d2(x, scale));
    };

    StopCondition stop;
    stop.h_lo = opt.band_lo;
    stop.h_hi = opt.band_hi;
    stop.horizon = opt.horizon;
    SimOptions sopt;
    sopt.dt = opt.dt;

    std::vector<double> values(static_cast<std::size_t>(opt.n_paths), 0.0);
    std::vector<char> censored(static_cast<std::size_t>(opt.n_paths), 0);
    for_each_index(opt.n_paths, opt.policy, [&](int i) {
        CounterRng rng(opt.seed, opt.stream_offset + static_cast<std::uint64_t>(i));
        double acc = 0.0;
        const StepObserver observer = [&](double t, Vec2, double h, double dt_step) {
            acc += std::exp(-opt.lambda * t) * (opt.lambda * f.eval(h) - limit_generator(h)) *
                   dt_step;
        };
        const PathRecord rec = simulate_path(sys, rng, q0, stop, sopt, nullptr, observer);
        acc += std::exp(-opt.lambda * rec.t_end) * f.eval(rec.h_end);
        values[static_cast<std::size_t>(i)] = acc;
        censored[static_cast<std::size_t>(i)] =
            (rec.reason == StopReason::lower_exit || rec.reason == StopReason::upper_exit) ? 0 : 1;
    });

    ResolventEstimate est;
    est.n_paths = opt.n_paths;
    const MeanSe ms = mean_and_se(values);
    est.value = ms.mean;
    est.std_error = ms.se;
    for (char c2 : censored) est.censored += c2;
    return est;
}

ComparisonReport edge_convergence_test(const VerificationContext& ctx) {
    Timer timer;
    const ExperimentConfig& cfg = ctx.cfg;
    ComparisonReport report;
    report.test = "edge_convergence";

    const ReebEdge& edge = ctx.graph.edge(cfg.start_edge);
    if (!(edge.h_lo < cfg.band_lo && cfg.band_hi < edge.h_hi))
        throw std::invalid_argument(
            "edge_convergence_test: band [" + std::to_string(cfg.band_lo) + ", " +
            std::to_string(cfg.band_hi) + "] is not inside edge " + std::to_string(cfg.start_edge));

    const TestFunction1D f = make_test_function(cfg.test_function);
    const double reference = f.eval(cfg.x0);
    const Vec2 q0 = start_point(ctx, cfg.start_edge, cfg.x0);
    const int n = std::max(2, static_cast<int>(std::lround(cfg.edge_paths * cfg.paths_multiplier)));
    const std::uint64_t seed = derive_seed(cfg.seed, "edge_convergence");

    for (std::size_t r = 0; r < cfg.edge_epsilons.size(); ++r) {
        const double eps = cfg.edge_epsilons[r];
        HamiltonianSystem sys = ctx.sys;
        sys.epsilon = eps;

        ResolventOptions ro;
        ro.lambda = cfg.lambda;
        ro.band_lo = cfg.band_lo;
        ro.band_hi = cfg.band_hi;
        ro.n_paths = n;
        ro.dt = sim_dt(cfg.dt, eps);
        ro.horizon = cfg.resolvent_horizon;
        ro.seed = seed;
        ro.stream_offset = r * static_cast<std::uint64_t>(n);
        ro.policy = ctx.policy;

        const ResolventEstimate est =
            full_system_resolvent(sys, ctx.coeffs, cfg.start_edge, f, q0, ro);

        RungResult rung;
        rung.epsilon = eps;
        rung.statistic = est.value;
        rung.std_error = est.std_error;
        rung.reference = reference;
        rung.gap = std::abs(est.value - reference);
        rung.censored = est.censored;
        rung.pass = rung.gap < cfg.tol_edge;
        report.rungs.push_back(rung);
    }

    const RungResult& last = report.rungs.back();
    if (3.0 * last.std_error > cfg.tol_edge) {
        report.verdict = "inconclusive";
        report.notes.push_back("standard error too large to resolve tol_edge=" +
                               fmt(cfg.tol_edge) + "; increase edge_paths or paths_multiplier");
    } else if (gaps_decrease(report.rungs) && last.gap < cfg.tol_edge) {
        report.verdict = "pass";
    } else {
        report.verdict = "fail";
    }
    report.notes.push_back("resolvent statistic vs f(x0)=" + fmt(reference) + " on band [" +
                           fmt(cfg.band_lo) + ", " + fmt(cfg.band_hi) + "], lambda=" +
                           fmt(cfg.lambda));
    report.runtime_seconds = timer.seconds();
    return report;
}

ComparisonReport gluing_test(const VerificationContext& ctx) {
    Timer timer;
    const ExperimentConfig& cfg = ctx.cfg;
    ComparisonReport report;
    report.test = "gluing";

    int vertex = cfg.gluing_vertex;
    if (vertex < 0) {
        for (const ReebVertex& v : ctx.graph.vertices)
            if (v.kind == VertexKind::interior) {
                vertex = v.id;
                break;
            }
    }
    if (vertex < 0) {
        report.verdict = "inconclusive";
        report.notes.push_back("graph has no interior vertices; gluing test is vacuous");
        report.runtime_seconds = timer.seconds();
        return report;
    }

    const GluingData* gd = nullptr;
    for (const GluingData& g : ctx.gluing)
        if (g.vertex == vertex) gd = &g;
    if (gd == nullptr)
        throw std::invalid_argument("gluing_test: no gluing data for vertex " +
                                    std::to_string(vertex));

    // Start ring: the configured edge if incident, else the first incident
    // edge that lies above the vertex (the merged side of a saddle).
    int start_edge = -1;
    for (int e : gd->edges)
        if (e == cfg.start_edge) start_edge = e;
    if (start_edge < 0) {
        for (int e : gd->edges)
            if (ctx.graph.edge(e).lower_vertex == vertex) {
                start_edge = e;
                break;
            }
        if (start_edge < 0) start_edge = gd->edges.front();
    }

    const int n =
        std::max(2, static_cast<int>(std::lround(cfg.gluing_paths * cfg.paths_multiplier)));
    const std::uint64_t seed = derive_seed(cfg.seed, "gluing");

    for (std::size_t r = 0; r < cfg.gluing_epsilons.size(); ++r) {
        const double eps = cfg.gluing_epsilons[r];
        HamiltonianSystem sys = ctx.sys;
        sys.epsilon = eps;

        HittingOptions ho;
        ho.vertex = vertex;
        ho.delta = cfg.delta;
        ho.delta_prime = cfg.delta_prime;
        ho.start_edge = start_edge;
        ho.n_paths = n;
        ho.dt = sim_dt(cfg.dt, eps);
        ho.horizon = cfg.gluing_horizon;
        ho.seed = seed;
        ho.stream_offset = r * static_cast<std::uint64_t>(n);
        ho.policy = ctx.policy;

        const HittingStats hs = hitting_statistics(sys, ctx.graph, ho);

        double tv = 0.0;
        bool components_ok = true;
        std::string note = "per-edge (empirical vs predicted):";
        for (std::size_t k = 0; k < gd->edges.size(); ++k) {
            const double dev = std::abs(hs.prob[k] - gd->prob[k]);
            tv += 0.5 * dev;
            if (dev > 3.0 * hs.std_err[k] + cfg.bias_budget) components_ok = false;
            note += " e" + std::to_string(gd->edges[k]) + " " + fmt(hs.prob[k]) + "/" +
                    fmt(gd->prob[k]);
        }
        double se_tv = 0.0;
        for (double se : hs.std_err) se_tv += se * se;
        se_tv = 0.5 * std::sqrt(se_tv);

        RungResult rung;
        rung.epsilon = eps;
        rung.statistic = tv;
        rung.std_error = se_tv;
        rung.reference = 0.0;
        rung.gap = tv;
        rung.censored = hs.censored + hs.unclassified;
        rung.pass = components_ok && tv < cfg.kappa;
        rung.note = note + "; mean exit time " + fmt(hs.mean_exit_time);
        report.rungs.push_back(rung);
    }

    const RungResult& last = report.rungs.back();
    if (3.0 * last.std_error > cfg.kappa) {
        report.verdict = "inconclusive";
        report.notes.push_back("standard error too large to resolve kappa=" + fmt(cfg.kappa));
    } else if (gaps_decrease(report.rungs, cfg.bias_budget) && last.pass) {
        report.verdict = "pass";
    } else {
        report.verdict = "fail";
    }
    report.notes.push_back("vertex " + std::to_string(vertex) + ", start ring on edge " +
                           std::to_string(start_edge) + " at distance " + fmt(cfg.delta_prime) +
                           ", band half-width " + fmt(cfg.delta));
    report.runtime_seconds = timer.seconds();
    return report;
}

ComparisonReport apriori_bound_test(const VerificationContext& ctx) {
    Timer timer;
    const ExperimentConfig& cfg = ctx.cfg;
    ComparisonReport report;
    report.test = "apriori_bound";

    const double eps = cfg.apriori_epsilon;
    HamiltonianSystem sys = ctx.sys;
    sys.epsilon = eps;
    const Vec2 q0 = start_point(ctx, cfg.start_edge, cfg.x0);
    const int n =
        std::max(2, static_cast<int>(std::lround(cfg.apriori_paths * cfg.paths_multiplier)));

    StopCondition stop;
    stop.horizon = cfg.apriori_horizon;
    SimOptions sopt;
    sopt.dt = sim_dt(cfg.dt, eps);

    std::vector<double> sup_h(static_cast<std::size_t>(n), 0.0);
    const std::uint64_t seed = derive_seed(cfg.seed, "apriori_bound");
    for_each_index(n, ctx.policy, [&](int i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        const PathRecord rec = simulate_path(sys, rng, q0, stop, sopt);
        sup_h[static_cast<std::size_t>(i)] = rec.h_sup;
    });

    for (double h0 : cfg.ceiling_ladder) {
        int hits = 0;
        for (double s : sup_h)
            if (s >= h0) ++hits;
        const double frac = static_cast<double>(hits) / n;

        RungResult rung;
        rung.epsilon = eps;
        rung.statistic = frac;
        rung.std_error = std::sqrt(std::max(0.0, frac * (1.0 - frac) / n));
        rung.reference = cfg.eta;
        rung.gap = frac;
        rung.pass = frac < cfg.eta;
        rung.note = "H0=" + fmt(h0);
        report.rungs.push_back(rung);
    }

    bool monotone = true;
    for (std::size_t k = 0; k + 1 < report.rungs.size(); ++k)
        if (report.rungs[k + 1].statistic > report.rungs[k].statistic) monotone = false;
    const bool top_ok = report.rungs.back().statistic < cfg.eta;
    report.verdict = (monotone && top_ok) ? "pass" : "fail";
    report.notes.push_back("fraction of " + std::to_string(n) + " paths with sup H >= H0 before T=" +
                           fmt(cfg.apriori_horizon) + " at epsilon=" + fmt(eps));
    report.runtime_seconds = timer.seconds();
    return report;
}

ComparisonReport coupling_decay_test(const VerificationContext& ctx) {
    Timer timer;
    const ExperimentConfig& cfg = ctx.cfg;
    ComparisonReport report;
    report.test = "coupling_decay";

    const Vec2 q0 = start_point(ctx, cfg.start_edge, cfg.coupling_x0);
    const int n =
        std::max(2, static_cast<int>(std::lround(cfg.coupling_paths * cfg.paths_multiplier)));
    const std::uint64_t seed = derive_seed(cfg.seed, "coupling_decay");

    std::vector<double> vs_h_means;
    for (std::size_t r = 0; r < cfg.epsilons.size(); ++r) {
        const double eps = cfg.epsilons[r];
        HamiltonianSystem sys = ctx.sys;
        sys.epsilon = eps;

        CoupledOptions co;
        co.dt = sim_dt(cfg.dt, eps);
        co.horizon = cfg.coupling_horizon;
        co.band_lo = cfg.coupling_band_lo;
        co.band_hi = cfg.coupling_band_hi;

        std::vector<double> m4_h(static_cast<std::size_t>(n), 0.0);
        std::vector<double> m4_limit(static_cast<std::size_t>(n), 0.0);
        for_each_index(n, ctx.policy, [&](int i) {
            CounterRng rng(seed, r * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(i));
            const CoupledResult res = coupled_simulation(sys, ctx.graph, ctx.coeffs, rng, q0, co);
            m4_h[static_cast<std::size_t>(i)] = std::pow(res.sup_xi_vs_h, 4);
            m4_limit[static_cast<std::size_t>(i)] = std::pow(res.sup_xi_vs_limit, 4);
        });

        const MeanSe mh = mean_and_se(m4_h);
        const MeanSe ml = mean_and_se(m4_limit);
        vs_h_means.push_back(mh.mean);

        RungResult rung;
        rung.epsilon = eps;
        rung.statistic = ml.mean;  // E[sup|xi - x~|^4]
        rung.std_error = ml.se;
        rung.reference = 0.0;
        rung.gap = ml.mean;
        rung.note = "E[sup|xi-x|^4]=" + fmt(mh.mean) + " (se " + fmt(mh.se) + ")";
        report.rungs.push_back(rung);
    }

    bool limit_decreasing = true, h_decreasing = true;
    for (std::size_t k = 0; k + 1 < report.rungs.size(); ++k) {
        if (report.rungs[k + 1].statistic >= report.rungs[k].statistic) limit_decreasing = false;
        if (vs_h_means[k + 1] >= vs_h_means[k]) h_decreasing = false;
    }

    // Least-squares slope of log statistic against log epsilon.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto m = static_cast<double>(report.rungs.size());
    for (const RungResult& rung : report.rungs) {
        const double x = std::log(rung.epsilon);
        const double y = std::log(std::max(rung.statistic, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    for (RungResult& rung : report.rungs) rung.pass = limit_decreasing && h_decreasing;
    report.verdict =
        (limit_decreasing && h_decreasing && slope >= cfg.min_slope) ? "pass" : "fail";
    report.notes.push_back("log-log slope of E[sup|xi-x~|^4] vs epsilon: " + fmt(slope) +
                           " (required >= " + fmt(cfg.min_slope) + ")");
    report.notes.push_back("E[sup|xi-x|^4] decreasing: " + std::string(h_decreasing ? "yes" : "no") +
                           "; E[sup|xi-x~|^4] decreasing: " +
                           std::string(limit_decreasing ? "yes" : "no"));
    report.runtime_seconds = timer.seconds();
    return report;
}

std::vector<ComparisonReport> run_all_tests(const VerificationContext& ctx) {
    return {edge_convergence_test(ctx), gluing_test(ctx), apriori_bound_test(ctx),
            coupling_decay_test(ctx)};
}

nlohmann::json report_to_json(const ComparisonReport& report) {
    nlohmann::json rungs = nlohmann::json::array();
    for (const RungResult& r : report.rungs) {
        rungs.push_back(nlohmann::json{{"epsilon", r.epsilon},
                                       {"statistic", r.statistic},
                                       {"std_error", r.std_error},
                                       {"reference", r.reference},
                                       {"gap", r.gap},
                                       {"pass", r.pass},
                                       {"censored", r.censored},
                                       {"note", r.note}});
    }
    return nlohmann::json{{"test", report.test},
                          {"verdict", report.verdict},
                          {"rungs", std::move(rungs)},
                          {"notes", report.notes}};
}

std::string report_to_text(const ComparisonReport& report) {
    std::string out = "== " + report.test + " ==\nverdict: " + report.verdict + "\n";
    for (const RungResult& r : report.rungs) {
        out += "  epsilon " + fmt(r.epsilon) + ": statistic " + fmt(r.statistic) + " (se " +
               fmt(r.std_error) + "), reference " + fmt(r.reference) + ", gap " + fmt(r.gap) +
               (r.pass ? " [ok]" : " [--]");
        if (r.censored > 0) out += " censored " + std::to_string(r.censored);
        if (!r.note.empty()) out += "  | " + r.note;
        out += "\n";
    }
    for (const std::string& n : report.notes) out += "note: " + n + "\n";
    return out;
}

}  // namespace fwavg
