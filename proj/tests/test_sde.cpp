#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fwavg/edge_coefficients.hpp"
#include "fwavg/gluing.hpp"
#include "fwavg/reeb_graph.hpp"
#include "fwavg/rng.hpp"
#include "fwavg/sde.hpp"

using namespace fwavg;

namespace {

const Box kBoxS1{-6.5, 6.5, -6.5, 6.5};
const Box kBoxS2{-2.5, 2.5, -2.5, 2.5};

ReebGraph build(const HamiltonianSystem& sys, const Box& box, double h_max) {
    const CriticalPointSearch search = find_critical_points(sys, box);
    return build_reeb_graph(sys, search.points, h_max, box);
}

// Shared double-well context for the saddle hitting tests.
struct SaddleFixture {
    HamiltonianSystem sys = make_builtin("duffing", 0.02);
    ReebGraph graph;
    CoefficientSet coeffs;
    GluingData glue;
    int saddle = -1;
    int outer_edge = -1;

    SaddleFixture() {
        graph = build(sys, kBoxS2, 2.0);
        for (const ReebVertex& v : graph.vertices)
            if (v.kind == VertexKind::interior) saddle = v.id;
        for (const ReebEdge& e : graph.edges)
            if (e.lower_vertex == saddle) outer_edge = e.id;
        coeffs = edge_coefficients(sys, graph);
        glue = gluing_probabilities(sys, graph, saddle);
    }
};

const SaddleFixture& saddle_fixture() {
    static const SaddleFixture fx;
    return fx;
}

// Natural-scale distance from the saddle to the ring at |h - H(O)| = y along
// one incident edge: s(y) with s'(y) = exp(-int_0^y 2 B_away / A), where
// B_away is the drift component pointing away from the vertex.
double natural_scale(const SaddleFixture& fx, int edge, double y_max) {
    const EdgeCoefficients& c = fx.coeffs.for_edge(edge);
    const ReebVertex& v = fx.graph.vertices[static_cast<std::size_t>(fx.saddle)];
    const double sign = (fx.graph.edge(edge).lower_vertex == fx.saddle) ? +1.0 : -1.0;
    const auto exponent = [&](double w) {
        const double h = std::clamp(v.h + sign * w, c.h_grid.front(), c.h_grid.back());
        return 2.0 * sign * c.B(h) / std::max(c.A(h), 1e-12);
    };
    const int n = 2000;
    const double dy = y_max / n;
    double phi = 0.0, s = 0.0;
    double r_prev = exponent(0.0), e_prev = 1.0;
    for (int i = 1; i <= n; ++i) {
        const double r = exponent(dy * i);
        phi += 0.5 * (r_prev + r) * dy;
        const double e = std::exp(-phi);
        s += 0.5 * (e_prev + e) * dy;
        r_prev = r;
        e_prev = e;
    }
    return s;
}

// Finite-delta exit law of the limiting junction: the gluing weight of each
// edge is rescaled by the natural-scale distance to its delta ring, and a
// start on the ring at delta_prime (on start_edge) may exit directly before
// ever reaching the vertex.
std::vector<double> finite_delta_exit_law(const SaddleFixture& fx, double delta,
                                          double delta_prime, int start_edge) {
    std::vector<double> p(fx.glue.edges.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < fx.glue.edges.size(); ++k) {
        p[k] = fx.glue.beta[k] / natural_scale(fx, fx.glue.edges[k], delta);
        total += p[k];
    }
    for (double& v : p) v /= total;

    const auto start =
        std::find(fx.glue.edges.begin(), fx.glue.edges.end(), start_edge) - fx.glue.edges.begin();
    const double q = natural_scale(fx, start_edge, delta_prime) / natural_scale(fx, start_edge, delta);
    for (std::size_t k = 0; k < p.size(); ++k)
        p[k] = (1.0 - q) * p[k] + (static_cast<std::size_t>(start) == k ? q : 0.0);
    return p;
}

ModelDefinition quiet_harmonic() {
    ModelDefinition def;
    def.name = "noise-free-well";
    def.hamiltonian = [](Vec2 z) { return 0.5 * z.norm2(); };
    def.grad = [](Vec2 z) { return z; };
    def.hess = [](Vec2) { return Mat2::identity(); };
    def.fast_field = [](Vec2 z) { return Vec2{z.y, -z.x}; };
    def.drift = [](Vec2) { return Vec2{0.0, 0.0}; };
    def.diffusion = [](Vec2) { return Mat2::zero(); };
    return def;
}

}  // namespace

TEST_CASE("time-step validation against the fast scale") {
    CHECK_THROWS_WITH_AS(check_time_step(0.01, 0.1),
                         "time step too large for the fast scale: require dt <= epsilon/50, got "
                         "dt = 0.010000 at epsilon = 0.100000",
                         std::invalid_argument);
    CHECK_THROWS_AS(check_time_step(0.0, 0.1), std::invalid_argument);
    CHECK_NOTHROW(check_time_step(0.002, 0.1));

    CHECK(resolved_time_step(1e-3, 0.1) == 2e-4);
    CHECK(resolved_time_step(1e-5, 0.1) == 1e-5);

    const HamiltonianSystem sys = make_builtin("harmonic", 0.05);
    CounterRng rng(1, 0);
    SimOptions opt;
    opt.dt = 0.1;  // far above 0.02 * epsilon
    CHECK_THROWS_AS(simulate_path(sys, rng, {1.0, 0.0}, {}, opt), std::invalid_argument);
}

TEST_CASE("paths replay bit-identically for a fixed seed and stream") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);
    const ReebGraph graph = build(sys, kBoxS1, 20.0);
    StopCondition stop;
    stop.horizon = 0.05;
    SimOptions opt;
    opt.dt = 2e-4;
    opt.record_stride = 1;
    opt.track_edges = true;

    CounterRng rng_a(42, 7), rng_b(42, 7), rng_c(42, 8);
    const PathRecord a = simulate_path(sys, rng_a, {1.0, 0.5}, stop, opt, &graph);
    const PathRecord b = simulate_path(sys, rng_b, {1.0, 0.5}, stop, opt, &graph);
    const PathRecord c = simulate_path(sys, rng_c, {1.0, 0.5}, stop, opt, &graph);

    REQUIRE(a.t.size() == b.t.size());
    bool identical = a.z_end.x == b.z_end.x && a.z_end.y == b.z_end.y;
    for (std::size_t k = 0; k < a.t.size(); ++k) {
        identical = identical && a.t[k] == b.t[k] && a.z[k].x == b.z[k].x &&
                    a.z[k].y == b.z[k].y && a.h[k] == b.h[k];
        // Recorded energies are recomputed from the state, not integrated.
        CHECK(a.h[k] == sys.h(a.z[k]));
        CHECK(a.edge[k] == 0);
        if (k > 0) {
            CHECK(a.t[k] > a.t[k - 1]);
            CHECK(a.t[k] - a.t[k - 1] <= opt.dt * (1.0 + 1e-12));
        }
    }
    CHECK(identical);
    CHECK(a.z_end.x != c.z_end.x);  // a different stream decouples the noise
}

TEST_CASE("noise-free dynamics conserve the Hamiltonian") {
    const HamiltonianSystem sys = make_system(quiet_harmonic(), 1.0);
    CounterRng rng(3, 0);
    StopCondition stop;
    stop.horizon = 0.05;
    SimOptions opt;
    opt.dt = 1e-7;
    opt.record_stride = 2000;

    const PathRecord rec = simulate_path(sys, rng, {std::sqrt(2.0), 0.0}, stop, opt);
    CHECK(rec.reason == StopReason::horizon);
    for (std::size_t k = 0; k < rec.h.size(); ++k) {
        CHECK(std::abs(rec.h[k] - 1.0) < 1e-8);
        CHECK(std::abs(rec.z[k].norm() - std::sqrt(2.0)) < 1e-7);
    }
    CHECK(std::abs(rec.h_end - 1.0) < 1e-8);
}

TEST_CASE("band exits: immediate exit, refined crossing, blowup") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.2);
    CounterRng rng(11, 0);

    // Band floor above the start value fires before the first step.
    StopCondition stop;
    stop.h_lo = 2.0;
    stop.horizon = 1.0;
    SimOptions opt;
    opt.dt = 2e-4;
    const PathRecord rec = simulate_path(sys, rng, {std::sqrt(2.0), 0.0}, stop, opt);
    CHECK(rec.reason == StopReason::lower_exit);
    CHECK(rec.t_end == 0.0);
    CHECK(rec.h_end == doctest::Approx(1.0));

    // An upper exit lands on the threshold after bisection refinement.
    StopCondition band;
    band.h_lo = 0.2;
    band.h_hi = 1.3;
    band.horizon = 50.0;
    CounterRng rng2(11, 1);
    const PathRecord up = simulate_path(sys, rng2, {std::sqrt(2.0), 0.0}, band, opt);
    REQUIRE((up.reason == StopReason::upper_exit || up.reason == StopReason::lower_exit));
    const double target = up.reason == StopReason::upper_exit ? band.h_hi : band.h_lo;
    CHECK(std::abs(up.h_end - target) < 5e-3);
    CHECK(up.h_sup <= band.h_hi + 5e-3);

    // Super-linear outward drift overflows in finite time and is reported.
    ModelDefinition def = quiet_harmonic();
    def.name = "explosive";
    def.drift = [](Vec2 z) { return z * (1e3 * z.norm2()); };
    const HamiltonianSystem wild = make_system(std::move(def), 1.0);
    CounterRng rng3(11, 2);
    StopCondition open;
    open.horizon = 5.0;
    SimOptions wopt;
    wopt.dt = 1e-3;
    const PathRecord boom = simulate_path(wild, rng3, {2.0, 0.0}, open, wopt);
    CHECK(boom.reason == StopReason::blowup);
    CHECK(boom.t_end < 5.0);
}

TEST_CASE("projected energy increments are Ito-consistent as dt shrinks") {
    // Along x = H(q), the residual of x_t - x_0 - int L0H dt - int |R0H| dbeta
    // measures the integrator's projection error; it should shrink like
    // sqrt(dt) (strong order 1/2).
    const HamiltonianSystem sys = make_builtin("harmonic", 0.2);
    const ReebGraph graph = build(sys, kBoxS1, 20.0);
    const CoefficientSet coeffs = edge_coefficients(sys, graph);

    const auto max_residual = [&](double dt, std::uint64_t stream) {
        CounterRng rng(99, stream);
        CoupledOptions opt;
        opt.dt = dt;
        opt.horizon = 0.25;
        opt.band_lo = 0.1;
        opt.band_hi = 6.0;
        opt.record_stride = 1;
        const CoupledResult res =
            coupled_simulation(sys, graph, coeffs, rng, {std::sqrt(2.0), 0.0}, opt);
        double acc = 0.0, worst = 0.0;
        for (std::size_t k = 1; k < res.t.size(); ++k) {
            acc += 1.0 * (res.t[k] - res.t[k - 1]) +
                   std::sqrt(2.0 * res.h[k - 1]) * (res.beta[k] - res.beta[k - 1]);
            worst = std::max(worst, std::abs(res.h[k] - res.h[0] - acc));
        }
        return worst;
    };

    const std::vector<double> dts{4e-4, 1e-4, 2.5e-5};
    std::vector<double> resid;
    for (double dt : dts) {
        double mean = 0.0;
        for (std::uint64_t s = 0; s < 4; ++s) mean += max_residual(dt, s);
        resid.push_back(mean / 4.0);
    }
    CHECK(resid[1] < resid[0]);
    CHECK(resid[2] < resid[1]);

    // Least-squares slope of log residual against log dt.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < dts.size(); ++k) {
        const double x = std::log(dts[k]), y = std::log(resid[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(dts.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope > 0.3);
    CHECK(slope < 0.8);
}

TEST_CASE("the derived driving noise is a standard Brownian motion") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.2);
    const ReebGraph graph = build(sys, kBoxS1, 20.0);
    const CoefficientSet coeffs = edge_coefficients(sys, graph);

    CoupledOptions opt;
    opt.dt = 2e-4;
    opt.horizon = 0.5;
    opt.band_lo = 0.01;
    opt.band_hi = 50.0;

    opt.record_stride = 1 << 20;  // records only the initial and final samples

    const int n = 600;
    std::vector<double> beta_end;
    for (int i = 0; i < n; ++i) {
        CounterRng rng(2024, static_cast<std::uint64_t>(i));
        const CoupledResult res =
            coupled_simulation(sys, graph, coeffs, rng, {std::sqrt(2.0), 0.0}, opt);
        if (res.reason == StopReason::horizon) beta_end.push_back(res.beta.back());
    }
    REQUIRE(beta_end.size() > 0.9 * n);

    double mean = 0.0;
    for (double b : beta_end) mean += b;
    mean /= static_cast<double>(beta_end.size());
    double var = 0.0;
    for (double b : beta_end) var += (b - mean) * (b - mean);
    var /= static_cast<double>(beta_end.size() - 1);

    CHECK(std::abs(mean) < 3.0 * std::sqrt(opt.horizon / static_cast<double>(beta_end.size())));
    CHECK(var / opt.horizon > 0.9);
    CHECK(var / opt.horizon < 1.1);
}

TEST_CASE("constant averaged coefficients collapse the coupled processes") {
    // sigma = I/|grad H| and b = (kappa - 1/(2h)) grad H / |grad H|^2 give
    // |R0 H| = 1 and L0 H = kappa, so A = 1 and B = kappa on the whole band
    // and xi and the averaged diffusion are the same linear functional of
    // beta between re-anchor marks; their gap is only the projection error
    // of the 2-D integrator, which shrinks with dt.
    constexpr double kappa = 0.5;
    ModelDefinition def;
    def.name = "unit-noise-well";
    def.hamiltonian = [](Vec2 z) { return 0.5 * z.norm2(); };
    def.grad = [](Vec2 z) { return z; };
    def.hess = [](Vec2) { return Mat2::identity(); };
    def.fast_field = [](Vec2 z) { return Vec2{z.y, -z.x}; };
    def.drift = [](Vec2 z) {
        const double r2 = z.norm2();
        return z * ((kappa - 1.0 / r2) / r2);
    };
    def.diffusion = [](Vec2 z) { return Mat2::identity() * (1.0 / z.norm()); };
    const HamiltonianSystem sys = make_system(std::move(def), 0.05);
    const ReebGraph graph = build(sys, kBoxS1, 4.0);
    const CoefficientSet coeffs = edge_coefficients(sys, graph);

    for (const double h : {0.6, 1.0, 1.7}) {
        CHECK(std::abs(coeffs.for_edge(0).A(h) - 1.0) < 1e-4);
        CHECK(std::abs(coeffs.for_edge(0).B(h) - kappa) < 1e-4);
    }

    const auto mean_gap = [&](double dt) {
        double sup_limit = 0.0;
        long marks = 0;
        for (std::uint64_t s = 0; s < 8; ++s) {
            CounterRng rng(77, s);
            CoupledOptions opt;
            opt.dt = dt;
            opt.horizon = 0.7;
            opt.band_lo = 0.5;
            opt.band_hi = 2.0;
            const CoupledResult res =
                coupled_simulation(sys, graph, coeffs, rng, {std::sqrt(2.0), 0.0}, opt);
            sup_limit += res.sup_xi_vs_limit;
            marks += res.marks;
        }
        CHECK(marks > 0);
        return sup_limit / 8.0;
    };

    const double coarse = mean_gap(2e-5);
    const double fine = mean_gap(5e-6);
    CHECK(coarse < 0.02);
    CHECK(fine < 0.75 * coarse);
}

TEST_CASE("hitting statistics validate their configuration") {
    const SaddleFixture& fx = saddle_fixture();
    HittingOptions opt;
    opt.vertex = fx.saddle;
    opt.start_edge = fx.outer_edge;
    opt.n_paths = 1;

    HittingOptions bad = opt;
    bad.delta_prime = bad.delta;  // must be strictly smaller
    CHECK_THROWS_AS(hitting_statistics(fx.sys, fx.graph, bad), std::invalid_argument);

    bad = opt;
    bad.delta = 0.3;  // exceeds the lobe span 1/4
    CHECK_THROWS_AS(hitting_statistics(fx.sys, fx.graph, bad), std::invalid_argument);

    bad = opt;
    for (const ReebVertex& v : fx.graph.vertices)
        if (v.kind != VertexKind::interior) bad.vertex = v.id;
    CHECK_THROWS_AS(hitting_statistics(fx.sys, fx.graph, bad), std::invalid_argument);
}

TEST_CASE("saddle exit law matches the drift-corrected junction prediction") {
    const SaddleFixture& fx = saddle_fixture();

    HittingOptions opt;
    opt.vertex = fx.saddle;
    opt.start_edge = fx.outer_edge;
    opt.delta = 0.05;
    opt.delta_prime = 0.005;
    opt.n_paths = 4000;
    opt.dt = resolved_time_step(1e-4, fx.sys.epsilon);
    opt.horizon = 5.0;
    opt.seed = 314;

    const HittingStats st = hitting_statistics(fx.sys, fx.graph, opt);
    CHECK(st.censored == 0);
    CHECK(st.unclassified < 0.01 * opt.n_paths);

    const std::vector<double> pred =
        finite_delta_exit_law(fx, opt.delta, opt.delta_prime, opt.start_edge);
    REQUIRE(st.edges == fx.glue.edges);
    for (std::size_t k = 0; k < st.edges.size(); ++k) {
        // 3 standard errors plus a small allowance for the finite epsilon
        // of the 2-D simulation and the oracle's own quadrature.
        CHECK(std::abs(st.prob[k] - pred[k]) < 3.0 * st.std_err[k] + 0.01);
    }

    // The corrected law is meaningfully different from the vertex weights
    // (the finite-delta drift inflates the outer exit), and the measurement
    // resolves that difference.
    double p_outer_meas = 0.0, p_outer_pred = 0.0, p_outer_glue = 0.0;
    std::vector<double> lobes;
    for (std::size_t k = 0; k < st.edges.size(); ++k) {
        if (st.edges[k] == fx.outer_edge) {
            p_outer_meas = st.prob[k];
            p_outer_pred = pred[k];
            p_outer_glue = fx.glue.prob[k];
        } else {
            lobes.push_back(st.prob[k]);
        }
    }
    CHECK(p_outer_pred > p_outer_glue + 0.02);
    CHECK(p_outer_meas > p_outer_glue + 0.02);

    // Mirror symmetry: the two lobes are hit equally often.
    REQUIRE(lobes.size() == 2);
    CHECK(std::abs(lobes[0] - lobes[1]) <
          3.0 * std::sqrt(lobes[0] * (1.0 - lobes[0]) * 2.0 / opt.n_paths) + 0.01);
}

TEST_CASE("saddle exit law is insensitive to the start ring for small offsets") {
    const SaddleFixture& fx = saddle_fixture();

    HittingOptions opt;
    opt.vertex = fx.saddle;
    opt.start_edge = fx.outer_edge;
    opt.delta = 0.05;
    opt.n_paths = 3000;
    opt.dt = resolved_time_step(1e-4, fx.sys.epsilon);
    opt.horizon = 5.0;
    opt.seed = 2718;

    HittingOptions near = opt;
    near.delta_prime = 0.001;
    HittingOptions nearer = opt;
    nearer.delta_prime = 0.0005;
    nearer.stream_offset = 1u << 20;

    const HittingStats a = hitting_statistics(fx.sys, fx.graph, near);
    const HittingStats b = hitting_statistics(fx.sys, fx.graph, nearer);
    REQUIRE(a.edges == b.edges);
    for (std::size_t k = 0; k < a.edges.size(); ++k)
        CHECK(std::abs(a.prob[k] - b.prob[k]) <
              3.0 * std::sqrt(a.std_err[k] * a.std_err[k] + b.std_err[k] * b.std_err[k]));
}

TEST_CASE("time spent near the saddle shrinks super-linearly with the band size") {
    const SaddleFixture& fx = saddle_fixture();

    const auto mean_exit = [&](const HamiltonianSystem& sys, double delta, int n_paths) {
        HittingOptions opt;
        opt.vertex = fx.saddle;
        opt.start_edge = fx.outer_edge;
        opt.delta = delta;
        opt.delta_prime = delta / 10.0;
        opt.n_paths = n_paths;
        opt.dt = resolved_time_step(1e-4, sys.epsilon);
        opt.horizon = 5.0;
        opt.seed = 1618;
        const HittingStats st = hitting_statistics(sys, fx.graph, opt);
        REQUIRE(st.mean_exit_time > 0.0);
        REQUIRE(st.censored == 0);
        return st.mean_exit_time;
    };

    // The delta^2 log(delta) envelope of the limiting process shows through
    // only once delta is well above epsilon; closer to the fast scale the
    // over-stay near the hyperbolic point decays slowly and flattens the
    // ratios, so the narrow rungs only assert monotone decrease.
    const std::vector<double> deltas{0.16, 0.08, 0.04, 0.02};
    std::vector<double> mean;
    for (double d : deltas) mean.push_back(mean_exit(fx.sys, d, 1500));
    for (std::size_t k = 1; k < mean.size(); ++k) {
        CHECK(mean[k] < mean[k - 1]);
        CHECK(mean[k - 1] / mean[k] > 1.5);
    }
    CHECK(mean[0] / mean[1] > 2.0);  // super-linear where the scales separate

    // At fixed delta the mean approaches the limit value from above.
    const HamiltonianSystem finer = make_builtin("duffing", 0.01);
    CHECK(mean_exit(finer, 0.04, 1000) < mean[2]);
}
