#pragma once

// Statistical verification suites: compare the simulated fast-slow system
// against the limiting graph diffusion predicted by the averaged
// coefficients and gluing conditions.  Every report is reproducible
// bit-for-bit from (config, seed); runtimes are kept out of serialized
// reports for that reason.

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fwavg/config.hpp"
#include "fwavg/graph_diffusion.hpp"
#include "fwavg/sde.hpp"

namespace fwavg {

struct RungResult {
    double epsilon = 0.0;
    double statistic = 0.0;
    double std_error = 0.0;
    double reference = 0.0;
    double gap = 0.0;  // test-specific distance between statistic and reference
    bool pass = false;
    int censored = 0;
    std::string note;
};

struct ComparisonReport {
    std::string test;
    std::string verdict;  // "pass" | "fail" | "inconclusive"
    std::vector<RungResult> rungs;
    std::vector<std::string> notes;
    double runtime_seconds = 0.0;  // in-memory only, never serialized
};

nlohmann::json report_to_json(const ComparisonReport& report);
std::string report_to_text(const ComparisonReport& report);

// Geometry and coefficient tables shared by all four suites.
struct VerificationContext {
    ExperimentConfig cfg;
    HamiltonianSystem sys;  // epsilon = cfg.epsilon; suites override per rung
    ReebGraph graph;
    CoefficientSet coeffs;
    std::vector<GluingData> gluing;  // one entry per interior vertex
    ExecPolicy policy = ExecPolicy::parallel;
};

VerificationContext make_context(const ExperimentConfig& cfg);

TestFunction1D make_test_function(const std::string& name);

// Full-system Monte Carlo of the single-edge resolvent statistic
//   E[e^{-lambda tau} f(x_tau) + int_0^tau e^{-lambda s}(lambda f - L_i f)(x_s) ds],
// x = H(q), tau = band exit; the averaging lemma pins the limit to f(x0).
ResolventEstimate full_system_resolvent(const HamiltonianSystem& sys,
                                        const CoefficientSet& coeffs, int edge,
                                        const TestFunction1D& f, Vec2 q0,
                                        const ResolventOptions& opt);

ComparisonReport edge_convergence_test(const VerificationContext& ctx);
ComparisonReport gluing_test(const VerificationContext& ctx);
ComparisonReport apriori_bound_test(const VerificationContext& ctx);
ComparisonReport coupling_decay_test(const VerificationContext& ctx);

// All four suites in the order above.
std::vector<ComparisonReport> run_all_tests(const VerificationContext& ctx);

}  // namespace fwavg
