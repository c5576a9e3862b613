#include "fwavg/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fwavg {

namespace {

const EpsVectorField kZeroEpsVector = [](double, Vec2) { return Vec2{0.0, 0.0}; };
const EpsMatrixField kZeroEpsMatrix = [](double, Vec2) { return Mat2::zero(); };

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value from ") + what);
}

void check_finite(Vec2 v, const char* what) {
    check_finite(v.x, what);
    check_finite(v.y, what);
}

void check_finite(const Mat2& m, const char* what) {
    check_finite(m.a11, what);
    check_finite(m.a12, what);
    check_finite(m.a21, what);
    check_finite(m.a22, what);
}

}  // namespace

double fd_step(Vec2 z) {
    static const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
    return cbrt_eps * std::max(1.0, z.norm());
}

Vec2 fd_gradient(const ScalarField& f, Vec2 z) {
    const double h = fd_step(z);
    return {(f({z.x + h, z.y}) - f({z.x - h, z.y})) / (2.0 * h),
            (f({z.x, z.y + h}) - f({z.x, z.y - h})) / (2.0 * h)};
}

Mat2 fd_hessian(const ScalarField& f, Vec2 z) {
    // Second derivatives want a larger step than first derivatives.
    const double h = std::sqrt(fd_step(z));
    const double f0 = f(z);
    const double fxx =
        (f({z.x + h, z.y}) - 2.0 * f0 + f({z.x - h, z.y})) / (h * h);
    const double fyy =
        (f({z.x, z.y + h}) - 2.0 * f0 + f({z.x, z.y - h})) / (h * h);
    const double fxy = (f({z.x + h, z.y + h}) - f({z.x + h, z.y - h}) -
                        f({z.x - h, z.y + h}) + f({z.x - h, z.y - h})) /
                       (4.0 * h * h);
    return {fxx, fxy, fxy, fyy};
}

HamiltonianSystem make_system(ModelDefinition def, double epsilon) {
    if (!def.hamiltonian || !def.fast_field || !def.drift || !def.diffusion)
        throw std::invalid_argument("model definition: hamiltonian, fast_field, drift, diffusion required");
    if (!(epsilon > 0.0)) throw std::invalid_argument("model definition: epsilon must be positive");

    HamiltonianSystem sys;
    sys.name = def.name;
    sys.hamiltonian = def.hamiltonian;
    sys.fast_field = def.fast_field;
    sys.drift = def.drift;
    sys.diffusion = def.diffusion;
    sys.epsilon = epsilon;

    if (def.grad) {
        sys.grad = def.grad;
    } else {
        ScalarField h = def.hamiltonian;
        sys.grad = [h](Vec2 z) { return fd_gradient(h, z); };
    }
    if (def.hess) {
        sys.hess = def.hess;
    } else {
        ScalarField h = def.hamiltonian;
        sys.hess = [h](Vec2 z) { return fd_hessian(h, z); };
    }
    sys.drift_eps = def.drift_eps ? def.drift_eps : kZeroEpsVector;
    sys.diffusion_eps = def.diffusion_eps ? def.diffusion_eps : kZeroEpsMatrix;
    return sys;
}

HamiltonianSystem make_builtin(const std::string& name, double epsilon,
                               double perturbation_scale) {
    ModelDefinition def;
    def.name = name;
    if (name == "harmonic") {
        def.hamiltonian = [](Vec2 z) { return 0.5 * (z.x * z.x + z.y * z.y); };
        def.grad = [](Vec2 z) { return z; };
        def.hess = [](Vec2) { return Mat2::identity(); };
        def.fast_field = [](Vec2 z) { return Vec2{z.y, -z.x}; };
        def.drift = [](Vec2) { return Vec2{0.0, 0.0}; };
        def.diffusion = [](Vec2) { return Mat2::identity(); };
    } else if (name == "duffing") {
        def.hamiltonian = [](Vec2 z) {
            return 0.5 * z.y * z.y + 0.25 * z.x * z.x * z.x * z.x - 0.5 * z.x * z.x;
        };
        def.grad = [](Vec2 z) { return Vec2{z.x * z.x * z.x - z.x, z.y}; };
        def.hess = [](Vec2 z) { return Mat2::diag(3.0 * z.x * z.x - 1.0, 1.0); };
        def.fast_field = [](Vec2 z) { return Vec2{z.y, z.x - z.x * z.x * z.x}; };
        def.drift = [](Vec2) { return Vec2{0.0, 0.0}; };
        def.diffusion = [](Vec2) { return Mat2::identity(); };
    } else {
        throw std::invalid_argument("unknown builtin model: " + name);
    }
    if (perturbation_scale != 0.0) {
        const double s = perturbation_scale;
        def.drift_eps = [s](double eps, Vec2) { return Vec2{s * eps, s * eps}; };
        def.diffusion_eps = [s](double eps, Vec2) { return Mat2::identity() * (s * eps); };
    }
    return make_system(std::move(def), epsilon);
}

std::vector<std::string> builtin_model_names() { return {"harmonic", "duffing"}; }

OperatorValues evaluate_operators(const HamiltonianSystem& sys, Vec2 z) {
    const Vec2 gh = sys.grad(z);
    check_finite(gh, "grad");
    const Mat2 hh = sys.hess(z);
    check_finite(hh, "hessian");
    const Vec2 b = sys.drift(z);
    check_finite(b, "drift");
    const Mat2 sg = sys.diffusion(z);
    check_finite(sg, "diffusion");
    const Vec2 be = sys.drift_eps(sys.epsilon, z);
    check_finite(be, "drift_eps");
    const Mat2 se = sys.diffusion_eps(sys.epsilon, z);
    check_finite(se, "diffusion_eps");

    OperatorValues out;
    const Mat2 a0 = sg * sg.transpose();
    out.l0_h = gh.dot(b) + 0.5 * (a0.a11 * hh.a11 + a0.a12 * hh.a21 + a0.a21 * hh.a12 + a0.a22 * hh.a22);
    out.r0_h = sg.left_mul(gh);

    const Mat2 mixed = sg * se.transpose() + se * sg.transpose() + se * se.transpose();
    out.l0e_h = gh.dot(be) +
                0.5 * (mixed.a11 * hh.a11 + mixed.a12 * hh.a21 + mixed.a21 * hh.a12 + mixed.a22 * hh.a22);
    out.r0e_h = se.left_mul(gh);
    return out;
}

double apply_generator(const HamiltonianSystem& sys, const ScalarField& f, Vec2 z,
                       bool include_eps_family) {
    const Vec2 gf = fd_gradient(f, z);
    const Mat2 hf = fd_hessian(f, z);
    Vec2 b;
    Mat2 a;
    if (include_eps_family) {
        b = sys.drift_eps(sys.epsilon, z);
        const Mat2 sg = sys.diffusion(z);
        const Mat2 se = sys.diffusion_eps(sys.epsilon, z);
        a = sg * se.transpose() + se * sg.transpose() + se * se.transpose();
    } else {
        b = sys.drift(z);
        const Mat2 sg = sys.diffusion(z);
        a = sg * sg.transpose();
    }
    return gf.dot(b) + 0.5 * (a.a11 * hf.a11 + a.a12 * hf.a21 + a.a21 * hf.a12 + a.a22 * hf.a22);
}

double apply_adjoint(const HamiltonianSystem& sys, const ScalarField& phi, Vec2 z,
                     const VectorField* transport) {
    // (1/2) sum_ij d2/dzi dzj [(sigma sigma^T)_ij phi]  -  div[(b + c) phi],
    // everything by central differences on the product fields.
    const auto a_phi = [&](Vec2 w, int i, int j) {
        const Mat2 sg = sys.diffusion(w);
        const Mat2 a = sg * sg.transpose();
        const double aij = (i == 0 ? (j == 0 ? a.a11 : a.a12) : (j == 0 ? a.a21 : a.a22));
        return aij * phi(w);
    };
    const double h = std::sqrt(fd_step(z));
    const auto second = [&](int i, int j) {
        if (i == j) {
            const Vec2 e = (i == 0) ? Vec2{h, 0.0} : Vec2{0.0, h};
            return (a_phi(z + e, i, j) - 2.0 * a_phi(z, i, j) + a_phi(z - e, i, j)) / (h * h);
        }
        return (a_phi({z.x + h, z.y + h}, i, j) - a_phi({z.x + h, z.y - h}, i, j) -
                a_phi({z.x - h, z.y + h}, i, j) + a_phi({z.x - h, z.y - h}, i, j)) /
               (4.0 * h * h);
    };
    double result = 0.5 * (second(0, 0) + second(0, 1) + second(1, 0) + second(1, 1));

    const auto flux = [&](Vec2 w) {
        Vec2 v = sys.drift(w);
        if (transport && *transport) v += (*transport)(w);
        return v * phi(w);
    };
    const double hd = fd_step(z);
    const double div = (flux({z.x + hd, z.y}).x - flux({z.x - hd, z.y}).x) / (2.0 * hd) +
                       (flux({z.x, z.y + hd}).y - flux({z.x, z.y - hd}).y) / (2.0 * hd);
    return result - div;
}

Vec2 hamiltonian_flow_step(const HamiltonianSystem& sys, Vec2 z, double dt, double tol) {
    if (!(dt > 0.0)) throw std::invalid_argument("flow step: dt must be positive");
    const Vec2 g0 = sys.fast_field(z);
    check_finite(g0, "fast_field");
    if (g0.norm() == 0.0) return z;  // equilibrium of the fast flow
    AdaptiveOptions opt;
    opt.tol = tol;
    opt.h_init = std::min(dt, 0.1 * (1.0 + z.norm()) / std::max(g0.norm(), 1e-300));
    return integrate_flow(sys.fast_field, z, dt, opt);
}

double perturbation_sup_norm(const HamiltonianSystem& sys, double eps,
                             const std::vector<Vec2>& probes) {
    double sup = 0.0;
    for (const Vec2& z : probes) {
        const Vec2 be = sys.drift_eps(eps, z);
        const Mat2 se = sys.diffusion_eps(eps, z);
        const double frob = std::sqrt(se.a11 * se.a11 + se.a12 * se.a12 + se.a21 * se.a21 +
                                      se.a22 * se.a22);
        sup = std::max(sup, be.norm() + frob);
    }
    return sup;
}

ModelValidation validate_model(const HamiltonianSystem& sys, const Box& box, int probe_n,
                               const std::vector<double>& eps_ladder) {
    ModelValidation out;
    std::vector<Vec2> probes;
    probes.reserve(static_cast<std::size_t>(probe_n) * probe_n);
    for (int i = 0; i < probe_n; ++i)
        for (int j = 0; j < probe_n; ++j)
            probes.push_back({box.x_lo + (i + 0.5) / probe_n * box.width(),
                              box.y_lo + (j + 0.5) / probe_n * box.height()});

    out.orthogonal = true;
    for (const Vec2& z : probes) {
        const Vec2 g = sys.fast_field(z);
        const Vec2 gh = sys.grad(z);
        const double defect = std::abs(g.dot(gh));
        const double scale = 1e-10 * (1.0 + g.norm() * gh.norm());
        out.max_orthogonality_defect = std::max(out.max_orthogonality_defect, defect);
        if (defect > scale) out.orthogonal = false;
    }

    out.perturbation_decays = true;
    for (double eps : eps_ladder) out.sup_norms.push_back(perturbation_sup_norm(sys, eps, probes));
    for (std::size_t i = 1; i < out.sup_norms.size(); ++i)
        if (out.sup_norms[i] > out.sup_norms[i - 1] + 1e-14) out.perturbation_decays = false;
    return out;
}

}  // namespace fwavg
