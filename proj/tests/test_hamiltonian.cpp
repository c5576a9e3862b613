#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fwavg/hamiltonian.hpp"

using namespace fwavg;

TEST_CASE("finite-difference helpers match analytic derivatives") {
    const ScalarField f = [](Vec2 z) { return z.x * z.x * z.y + std::sin(z.y); };
    const Vec2 z{0.7, -0.3};
    const Vec2 g = fd_gradient(f, z);
    CHECK(g.x == doctest::Approx(2.0 * z.x * z.y).epsilon(1e-7));
    CHECK(g.y == doctest::Approx(z.x * z.x + std::cos(z.y)).epsilon(1e-7));
    const Mat2 h = fd_hessian(f, z);
    CHECK(h.a11 == doctest::Approx(2.0 * z.y).epsilon(1e-4));
    CHECK(h.a12 == doctest::Approx(2.0 * z.x).epsilon(1e-4));
    CHECK(h.a21 == doctest::Approx(h.a12));
    CHECK(h.a22 == doctest::Approx(-std::sin(z.y)).epsilon(1e-4));
}

TEST_CASE("harmonic oscillator operators at reference points") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);

    // At z = (1,0): L0 H = 1 (pure Laplacian term), R0 H = grad H = (1,0).
    const OperatorValues at1 = evaluate_operators(sys, {1.0, 0.0});
    CHECK(at1.l0_h == doctest::Approx(1.0));
    CHECK(at1.r0_h.x == doctest::Approx(1.0));
    CHECK(at1.r0_h.y == doctest::Approx(0.0));
    CHECK(at1.l0e_h == doctest::Approx(0.0));
    CHECK(at1.r0e_h.norm() == doctest::Approx(0.0));

    // At the critical point the gradient dies but the Laplacian term survives.
    const OperatorValues at0 = evaluate_operators(sys, {0.0, 0.0});
    CHECK(at0.l0_h == doctest::Approx(1.0));
    CHECK(at0.r0_h.norm() == doctest::Approx(0.0));
}

TEST_CASE("speed ratio a and its reciprocal") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);
    CHECK(sys.a({1.5, -0.2}) == doctest::Approx(1.0));
    CHECK(sys.a_inv({1.5, -0.2}) == doctest::Approx(1.0));

    const HamiltonianSystem duf = make_builtin("duffing", 0.1);
    const Vec2 z{1.5, 0.3};
    CHECK(duf.a(z) == doctest::Approx(1.0));  // g is the rotated gradient
    CHECK(duf.a(z) * duf.a_inv(z) == doctest::Approx(1.0));
}

TEST_CASE("fast flow conserves H") {
    const HamiltonianSystem s1 = make_builtin("harmonic", 0.1);
    // One full period of the circular orbit returns to the start.
    const Vec2 back = hamiltonian_flow_step(s1, {1.0, 0.0}, 2.0 * std::numbers::pi, 1e-12);
    CHECK((back - Vec2{1.0, 0.0}).norm() < 1e-8);

    const HamiltonianSystem s2 = make_builtin("duffing", 0.1);
    const Vec2 z0{1.5, 0.0};
    const double h0 = s2.h(z0);
    Vec2 z = z0;
    for (int k = 0; k < 40; ++k) {
        z = hamiltonian_flow_step(s2, z, 0.25, 1e-12);
        CHECK(std::abs(s2.h(z) - h0) < 1e-8);
    }
}

TEST_CASE("generator application by finite differences") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);
    // L0 applied to H itself: drift is zero, so L0 H = (1/2) tr(Hess) = 1.
    const ScalarField h = sys.hamiltonian;
    CHECK(apply_generator(sys, h, {0.8, 0.6}) == doctest::Approx(1.0).epsilon(1e-6));

    // Quadratic f: L0 f = (1/2) (f_xx + f_yy) for sigma = I, b = 0.
    const ScalarField f = [](Vec2 z) { return 3.0 * z.x * z.x + z.y * z.y; };
    CHECK(apply_generator(sys, f, {0.3, -0.4}) == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("adjoint of the generator against hand-computed divergence form") {
    // With sigma = I and b = 0: L0* phi = (1/2) Laplacian(phi).
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);
    const ScalarField phi = [](Vec2 z) { return std::exp(-z.x * z.x - 0.5 * z.y * z.y); };
    const Vec2 z{0.4, 0.2};
    const Mat2 hp = fd_hessian(phi, z);
    CHECK(apply_adjoint(sys, phi, z) == doctest::Approx(0.5 * (hp.a11 + hp.a22)).epsilon(1e-4));

    // A divergence-free transport field contributes -c . grad phi.
    const VectorField c = [](Vec2 z) { return Vec2{z.y, -z.x}; };
    const Vec2 gp = fd_gradient(phi, z);
    const double with_transport = apply_adjoint(sys, phi, z, &c);
    const double expected = 0.5 * (hp.a11 + hp.a22) - (c(z).dot(gp));
    CHECK(with_transport == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("model validation: orthogonality and perturbation decay") {
    const Box box{-2.0, 2.0, -2.0, 2.0};
    for (const std::string& name : builtin_model_names()) {
        const HamiltonianSystem sys = make_builtin(name, 0.1, 0.7);
        const ModelValidation v = validate_model(sys, box);
        CHECK(v.orthogonal);
        CHECK(v.perturbation_decays);
        REQUIRE(v.sup_norms.size() == 4);
        CHECK(v.sup_norms.back() < v.sup_norms.front());
        CHECK(v.sup_norms.back() > 0.0);
    }
    // Without a perturbation family the sup norms vanish identically.
    const ModelValidation v0 = validate_model(make_builtin("harmonic", 0.1), box);
    CHECK(v0.perturbation_decays);
    CHECK(v0.sup_norms.front() == 0.0);
}

TEST_CASE("a model with g not orthogonal to grad H fails validation") {
    ModelDefinition def;
    def.name = "broken";
    def.hamiltonian = [](Vec2 z) { return 0.5 * (z.x * z.x + z.y * z.y); };
    def.fast_field = [](Vec2 z) { return Vec2{z.y + 0.1 * z.x, -z.x}; };
    def.drift = [](Vec2) { return Vec2{0.0, 0.0}; };
    def.diffusion = [](Vec2) { return Mat2::identity(); };
    const HamiltonianSystem sys = make_system(std::move(def), 0.1);
    const ModelValidation v = validate_model(sys, Box{-2.0, 2.0, -2.0, 2.0});
    CHECK_FALSE(v.orthogonal);
}

TEST_CASE("construction rejects incomplete definitions and bad epsilon") {
    ModelDefinition def;
    def.hamiltonian = [](Vec2 z) { return z.x; };
    CHECK_THROWS(make_system(std::move(def), 0.1));
    CHECK_THROWS(make_builtin("harmonic", 0.0));
    CHECK_THROWS(make_builtin("harmonic", -1.0));
    CHECK_THROWS(make_builtin("pendulum", 0.1));
}

TEST_CASE("translated single well has its critical point translated") {
    ModelDefinition def;
    def.name = "shifted";
    const Vec2 c{0.7, -0.4};
    def.hamiltonian = [c](Vec2 z) { return 0.5 * ((z - c).x * (z - c).x + (z - c).y * (z - c).y); };
    def.fast_field = [c](Vec2 z) { return Vec2{(z - c).y, -(z - c).x}; };
    def.drift = [](Vec2) { return Vec2{0.0, 0.0}; };
    def.diffusion = [](Vec2) { return Mat2::identity(); };
    const HamiltonianSystem sys = make_system(std::move(def), 0.1);
    // Finite-difference gradient vanishes at the shifted center.
    CHECK(sys.grad(c).norm() < 1e-7);
    CHECK(sys.h(c) == doctest::Approx(0.0));
}
