#include "fwavg/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fwavg/config.hpp"
#include "fwavg/level_cycle.hpp"
#include "fwavg/serialize.hpp"
#include "fwavg/verification.hpp"

namespace fwavg {

namespace {

constexpr const char* kVersion = "0.1.0";

struct OutputSink {
    std::filesystem::path dir;
    std::vector<std::string> names;

    void write(const std::string& name, const std::string& content) {
        std::filesystem::create_directories(dir);
        write_text_file((dir / name).string(), content);
        names.push_back(name);
    }
    void write_json(const std::string& name, const nlohmann::json& j) {
        write(name, j.dump(2) + "\n");
    }
};

void write_manifest(OutputSink& sink, const ExperimentConfig& cfg) {
    std::vector<std::string> outputs = sink.names;
    std::sort(outputs.begin(), outputs.end());
    const nlohmann::json manifest{{"config_hash", config_hash(cfg)},
                                  {"seed", cfg.seed},
                                  {"version", kVersion},
                                  {"outputs", outputs}};
    write_text_file((sink.dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

Vec2 demo_start(const VerificationContext& ctx) {
    const ReebEdge& e = ctx.graph.edge(ctx.cfg.start_edge);
    if (!(e.h_lo < ctx.cfg.x0 && ctx.cfg.x0 < e.h_hi))
        throw std::invalid_argument("x0 is outside the start edge's energy interval");
    return point_on_level(ctx.sys, e.seed, ctx.cfg.x0);
}

int run_simulate(const VerificationContext& ctx, OutputSink& sink, int dump_paths) {
    const ExperimentConfig& cfg = ctx.cfg;
    HamiltonianSystem sys = ctx.sys;
    const Vec2 q0 = demo_start(ctx);

    StopCondition stop;
    stop.h_hi = ctx.graph.h_max;
    stop.horizon = cfg.horizon;
    SimOptions sopt;
    sopt.dt = resolved_time_step(cfg.dt, cfg.epsilon);

    const std::uint64_t seed = derive_seed(cfg.seed, "simulate");
    const int n = cfg.paths;
    std::vector<double> h_end(static_cast<std::size_t>(n)), h_sup(static_cast<std::size_t>(n));
    std::vector<int> reasons(static_cast<std::size_t>(n));
    const ExecPolicy policy = ctx.policy;
    for_each_index(n, policy, [&](int i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        const PathRecord rec = simulate_path(sys, rng, q0, stop, sopt);
        h_end[static_cast<std::size_t>(i)] = rec.h_end;
        h_sup[static_cast<std::size_t>(i)] = rec.h_sup;
        reasons[static_cast<std::size_t>(i)] = static_cast<int>(rec.reason);
    });

    double mean = 0.0, sup_mean = 0.0;
    int ceiling_hits = 0;
    for (int i = 0; i < n; ++i) {
        mean += h_end[static_cast<std::size_t>(i)];
        sup_mean += h_sup[static_cast<std::size_t>(i)];
        if (reasons[static_cast<std::size_t>(i)] == static_cast<int>(StopReason::upper_exit))
            ++ceiling_hits;
    }
    mean /= n;
    sup_mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i)
        var += (h_end[static_cast<std::size_t>(i)] - mean) * (h_end[static_cast<std::size_t>(i)] - mean);
    var = n > 1 ? var / (n - 1) : 0.0;

    sink.write_json("simulate_summary.json",
                    nlohmann::json{{"paths", n},
                                   {"epsilon", cfg.epsilon},
                                   {"dt", sopt.dt},
                                   {"horizon", cfg.horizon},
                                   {"mean_h_end", mean},
                                   {"var_h_end", var},
                                   {"mean_h_sup", sup_mean},
                                   {"ceiling_fraction", static_cast<double>(ceiling_hits) / n}});

    // Path dumps rerun the exact same streams with recording switched on.
    const int n_dump = std::min(dump_paths, n);
    for (int i = 0; i < n_dump; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        SimOptions dopt = sopt;
        dopt.record_stride =
            std::max(1, static_cast<int>(cfg.horizon / sopt.dt) / 2000);
        dopt.track_edges = true;
        const PathRecord rec = simulate_path(sys, rng, q0, stop, dopt, &ctx.graph);
        char name[48];
        std::snprintf(name, sizeof(name), "path_%04d.csv", i);
        sink.write(name, path_to_csv(rec));
    }
    std::printf("simulate: %d paths, mean H(T) = %.6g, ceiling fraction = %.4g\n", n, mean,
                static_cast<double>(ceiling_hits) / n);
    return 0;
}

int run_limit_process(const VerificationContext& ctx, OutputSink& sink, int dump_paths) {
    const ExperimentConfig& cfg = ctx.cfg;
    const GraphDiffusion gd(ctx.graph, ctx.coeffs, ctx.gluing);

    GraphStop stop;
    stop.horizon = cfg.horizon;
    GraphSimOptions sopt;
    sopt.dt = cfg.dt;

    const GraphPoint start{cfg.x0, cfg.start_edge, -1};
    const std::uint64_t seed = derive_seed(cfg.seed, "limit-process");
    const int n = cfg.paths;
    std::vector<double> h_end(static_cast<std::size_t>(n));
    std::vector<int> visits(static_cast<std::size_t>(n));
    for_each_index(n, ctx.policy, [&](int i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        const GraphPathResult res = simulate_graph_path(gd, rng, start, stop, sopt);
        h_end[static_cast<std::size_t>(i)] = res.h_end;
        visits[static_cast<std::size_t>(i)] = static_cast<int>(res.visits.size());
    });

    double mean = 0.0, mean_visits = 0.0;
    for (int i = 0; i < n; ++i) {
        mean += h_end[static_cast<std::size_t>(i)];
        mean_visits += visits[static_cast<std::size_t>(i)];
    }
    mean /= n;
    mean_visits /= n;

    sink.write_json("limit_summary.json", nlohmann::json{{"paths", n},
                                                         {"dt", cfg.dt},
                                                         {"horizon", cfg.horizon},
                                                         {"mean_h_end", mean},
                                                         {"mean_vertex_visits", mean_visits}});

    const int n_dump = std::min(dump_paths, n);
    for (int i = 0; i < n_dump; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        GraphSimOptions dopt = sopt;
        dopt.record_stride = std::max(1, static_cast<int>(cfg.horizon / cfg.dt) / 2000);
        const GraphPathResult res = simulate_graph_path(gd, rng, start, stop, dopt);
        char name[48];
        std::snprintf(name, sizeof(name), "limit_path_%04d.csv", i);
        sink.write(name, graph_path_to_csv(res));
    }
    std::printf("limit-process: %d paths, mean h(T) = %.6g, mean vertex visits = %.3g\n", n, mean,
                mean_visits);
    return 0;
}

int run_verify_all(const VerificationContext& ctx, OutputSink& sink) {
    const std::vector<ComparisonReport> reports = run_all_tests(ctx);
    int code = 0;
    for (const ComparisonReport& report : reports) {
        sink.write_json("report_" + report.test + ".json", report_to_json(report));
        sink.write("report_" + report.test + ".txt", report_to_text(report));
        std::printf("%s", report_to_text(report).c_str());
        std::fprintf(stderr, "[%s] %s (%.1f s)\n", report.test.c_str(), report.verdict.c_str(),
                     report.runtime_seconds);
        if (report.verdict == "fail") code = 1;
        if (report.verdict == "inconclusive")
            std::fprintf(stderr, "warning: %s verdict is inconclusive\n", report.test.c_str());
    }
    return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Averaged diffusion of a randomly perturbed planar Hamiltonian system on the "
                 "Reeb graph of H: coefficients, gluing conditions, simulation, verification"};
    app.require_subcommand(1);
    app.fallthrough(true);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_override;
    std::string dump_graph_path, dump_coeffs_path;
    int dump_paths = 0;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int threads_override = -1;
    double paths_multiplier = 0.0;

    app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
    app.add_option("--seed", seed_override, "override the master seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--output", output_override, "override the output directory");
    app.add_option("--threads", threads_override, "worker threads (1 = serial)");
    app.add_option("--paths", paths_multiplier, "multiply every path count");

    CLI::App* cmd_graph = app.add_subcommand("build-graph", "build and dump the Reeb graph");
    cmd_graph->add_option("--dump-graph", dump_graph_path, "extra copy of graph.json");
    CLI::App* cmd_coeffs =
        app.add_subcommand("coefficients", "tabulate averaged edge coefficients");
    cmd_coeffs->add_option("--dump-coefficients", dump_coeffs_path,
                           "extra copy of coefficients.json");
    CLI::App* cmd_gluing = app.add_subcommand("gluing", "gluing probabilities at saddles");
    CLI::App* cmd_sim = app.add_subcommand("simulate", "full-system Monte Carlo ensemble");
    cmd_sim->add_option("--dump-paths", dump_paths, "write the first N paths as CSV");
    CLI::App* cmd_limit = app.add_subcommand("limit-process", "graph-diffusion Monte Carlo");
    cmd_limit->add_option("--dump-paths", dump_paths, "write the first N paths as CSV");
    CLI::App* cmd_verify = app.add_subcommand("verify-all", "run all verification suites");

    for (CLI::App* sub : {cmd_graph, cmd_coeffs, cmd_gluing, cmd_sim, cmd_limit, cmd_verify})
        sub->add_option("overrides", overrides, "key=value configuration overrides");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        std::vector<std::string> all_overrides = overrides;
        if (seed_set) all_overrides.push_back("seed=" + std::to_string(seed_override));
        if (!output_override.empty()) all_overrides.push_back("output_dir=" + output_override);
        if (threads_override >= 0)
            all_overrides.push_back("threads=" + std::to_string(threads_override));
        if (paths_multiplier > 0.0)
            all_overrides.push_back("paths_multiplier=" + std::to_string(paths_multiplier));

        const ExperimentConfig cfg = load_config(config_path, all_overrides);
        set_thread_count(cfg.threads);

        OutputSink sink;
        sink.dir = cfg.output_dir;

        int code = 0;
        if (*cmd_graph) {
            VerificationContext ctx;
            ctx.cfg = cfg;
            ctx.sys = make_builtin(cfg.model, cfg.epsilon, cfg.perturbation_scale);
            FindCriticalOptions fopt;
            fopt.grid_n = cfg.grid_n;
            const CriticalPointSearch search = find_critical_points(ctx.sys, cfg.box, fopt);
            for (const std::string& w : search.warnings)
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            BuildOptions bopt;
            bopt.grid_n = cfg.grid_n;
            bopt.polygon_samples = cfg.cycle_samples;
            ctx.graph = build_reeb_graph(ctx.sys, search.points, cfg.h_max, cfg.box, bopt);
            const nlohmann::json gj = graph_to_json(ctx.graph);
            sink.write_json("graph.json", gj);
            if (!dump_graph_path.empty()) write_text_file(dump_graph_path, gj.dump(2) + "\n");
            std::printf("graph: %zu vertices, %zu edges, ceiling at h = %.6g\n",
                        ctx.graph.vertices.size(), ctx.graph.edges.size(), ctx.graph.h_max);
        } else {
            const VerificationContext ctx = make_context(cfg);
            if (*cmd_coeffs) {
                const nlohmann::json cj = coefficients_to_json(ctx.coeffs);
                sink.write_json("coefficients.json", cj);
                if (!dump_coeffs_path.empty()) write_text_file(dump_coeffs_path, cj.dump(2) + "\n");
                std::printf("coefficients: %zu edges, %d levels per edge\n", ctx.coeffs.edges.size(),
                            cfg.levels_per_edge);
            } else if (*cmd_gluing) {
                sink.write_json("gluing.json", gluing_to_json(ctx.gluing));
                if (ctx.gluing.empty())
                    std::printf("gluing: no interior vertices in this graph\n");
                for (const GluingData& g : ctx.gluing) {
                    std::printf("vertex %d:", g.vertex);
                    for (std::size_t k = 0; k < g.edges.size(); ++k)
                        std::printf(" p(edge %d) = %.6g", g.edges[k], g.prob[k]);
                    std::printf("\n");
                }
            } else if (*cmd_sim) {
                code = run_simulate(ctx, sink, dump_paths);
            } else if (*cmd_limit) {
                code = run_limit_process(ctx, sink, dump_paths);
            } else if (*cmd_verify) {
                code = run_verify_all(ctx, sink);
            }
        }
        write_manifest(sink, cfg);
        return code;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace fwavg
