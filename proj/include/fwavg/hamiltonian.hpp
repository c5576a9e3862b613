#pragma once

// Fast-oscillating randomly perturbed planar Hamiltonian system
//
//   dq = (1/eps) g(q) dt + [b(q) + b_eps(eps, q)] dt + [sigma(q) + sigma_eps(eps, q)] dW,
//
// with g orthogonal to grad H everywhere, so H is conserved by the fast flow.
// This header defines the model container, the built-in test systems, the
// projected generator pieces L0 H, R0 H and their perturbation counterparts,
// and basic model validation.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fwavg/geometry.hpp"
#include "fwavg/ode.hpp"

namespace fwavg {

using ScalarField = std::function<double(Vec2)>;
using VectorField = std::function<Vec2(Vec2)>;
using MatrixField = std::function<Mat2(Vec2)>;
using EpsVectorField = std::function<Vec2(double, Vec2)>;
using EpsMatrixField = std::function<Mat2(double, Vec2)>;

struct HamiltonianSystem {
    std::string name;
    ScalarField hamiltonian;
    VectorField grad;        // grad H
    MatrixField hess;        // Hessian of H
    VectorField fast_field;  // g, with g . grad H = 0
    VectorField drift;       // b
    MatrixField diffusion;   // sigma
    EpsVectorField drift_eps;      // b_eps(eps, z); identically zero by default
    EpsMatrixField diffusion_eps;  // sigma_eps(eps, z); identically zero by default
    double epsilon = 0.1;

    double h(Vec2 z) const { return hamiltonian(z); }

    // Speed ratio a = |g| / |grad H|; its reciprocal is the invariant
    // density of the fast flow on level sets.
    double a(Vec2 z) const { return fast_field(z).norm() / grad(z).norm(); }
    double a_inv(Vec2 z) const { return grad(z).norm() / fast_field(z).norm(); }
};

// Model construction.  Derivatives of H may be omitted; central finite
// differences with step ~ eps_machine^(1/3) * max(1, |z|) fill the gap.
struct ModelDefinition {
    std::string name;
    ScalarField hamiltonian;
    VectorField fast_field;
    VectorField drift;
    MatrixField diffusion;
    VectorField grad;  // optional
    MatrixField hess;  // optional
    EpsVectorField drift_eps;      // optional
    EpsMatrixField diffusion_eps;  // optional
};

HamiltonianSystem make_system(ModelDefinition def, double epsilon);

// Built-in models: "harmonic" (single well, rotation-invariant) and
// "duffing" (double well, figure-eight separatrix).  `perturbation_scale`
// attaches b_eps = scale*eps*(1,1) and sigma_eps = scale*eps*I when nonzero.
HamiltonianSystem make_builtin(const std::string& name, double epsilon,
                               double perturbation_scale = 0.0);
std::vector<std::string> builtin_model_names();

// Values of the projected operators at a point:
//   l0_h  = L0 H        (unperturbed drift of H under Ito projection)
//   r0_h  = (grad H)^T sigma            (row vector)
//   l0e_h = L0^eps H    (perturbation drift, including mixed diffusion terms)
//   r0e_h = (grad H)^T sigma_eps        (row vector)
struct OperatorValues {
    double l0_h = 0.0;
    Vec2 r0_h;
    double l0e_h = 0.0;
    Vec2 r0e_h;
};

OperatorValues evaluate_operators(const HamiltonianSystem& sys, Vec2 z);

// Generator L0 applied to an arbitrary smooth scalar field by finite
// differences:  L0 f = grad f . b + (1/2) sum_ij (sigma sigma^T)_ij d2f/dzi dzj.
// `include_eps_family` swaps in b_eps and the mixed diffusion matrix instead.
double apply_generator(const HamiltonianSystem& sys, const ScalarField& f, Vec2 z,
                       bool include_eps_family = false);

// Formal adjoint with an extra transport field c (pass c = nullptr for none):
//   (L0 + c . grad)^* phi = (1/2) sum_ij d2/dzi dzj [(sigma sigma^T)_ij phi] - div[(b + c) phi].
double apply_adjoint(const HamiltonianSystem& sys, const ScalarField& phi, Vec2 z,
                     const VectorField* transport = nullptr);

// Advance the unperturbed fast flow dz/dt = g(z) (unit clock) by dt using
// adaptive RK4.  H-conservation along the way is the caller-visible contract.
Vec2 hamiltonian_flow_step(const HamiltonianSystem& sys, Vec2 z, double dt,
                           double tol = 1e-10);

// sup over probe points of |b_eps| + |sigma_eps| (Frobenius), used to check
// that the perturbation family vanishes as eps -> 0.
double perturbation_sup_norm(const HamiltonianSystem& sys, double eps,
                             const std::vector<Vec2>& probes);

struct ModelValidation {
    bool orthogonal = false;        // g . grad H = 0 on probes
    bool perturbation_decays = false;  // sup norm decreasing along an eps ladder
    double max_orthogonality_defect = 0.0;
    std::vector<double> sup_norms;  // along the ladder
};

ModelValidation validate_model(const HamiltonianSystem& sys, const Box& box, int probe_n = 16,
                               const std::vector<double>& eps_ladder = {0.2, 0.1, 0.05, 0.02});

// Finite-difference helpers shared across modules.
double fd_step(Vec2 z);
Vec2 fd_gradient(const ScalarField& f, Vec2 z);
Mat2 fd_hessian(const ScalarField& f, Vec2 z);

}  // namespace fwavg
