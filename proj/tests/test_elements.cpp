#include <catch2/catch_amalgamated.hpp>

#include "qtraj/elements.hpp"
#include "qtraj/integrate.hpp"
#include "qtraj/oracle.hpp"

#include "dense_support.hpp"

#include <memory>

using namespace qtraj;
using testsupport::apply_dense;
using testsupport::dense_equivalence_defect;
using testsupport::max_abs_diff;
using testsupport::random_state;

namespace {

using MF = ModeFunction::Kind;

ModeFunction mf(MF kind, long k) { return ModeFunction{kind, k}; }

// Builds the same composite twice, once with every free in the interaction
// picture and once with the diagonals folded into the Hamiltonian.
template <typename Build>
void check_dense_equivalence(Build&& build, double tau, double dt, std::uint64_t seed) {
    Composite split = build(true);
    Composite nosplit = build(false);
    const double defect = dense_equivalence_defect(split, nosplit, tau, dt, 8, seed);
    CAPTURE(tau, dt, defect);
    REQUIRE(defect < 1e-12);
}

// norm should be conserved by ODE evolution when kappa = 0 and no pump decays
double norm_drift_under_ode(const Composite& sys, const StateVector& psi0, double t_end,
                            double eps) {
    std::vector<complex> y = psi0.amps();
    OdeStepper stepper(eps, 0.02);
    auto rhs = [&sys](double tau, std::span<const complex> yv, std::span<complex> dy) {
        std::fill(dy.begin(), dy.end(), complex{});
        sys.apply_hamiltonian(tau, yv, dy);
    };
    double t = 0.0;
    while (t < t_end) stepper.step(rhs, y, t);
    double nn = 0.0;
    for (const auto& v : y) nn += std::norm(v);
    return std::abs(std::sqrt(nn) - 1.0);
}

} // namespace

TEST_CASE("mode function decompositions", "[elements]") {
    const auto sin2 = intensity_split(mf(MF::Sin, 2));
    REQUIRE_THAT(sin2.constant, Catch::Matchers::WithinAbs(0.5, 1e-15));
    REQUIRE(sin2.terms.size() == 2);
    for (const auto& t : sin2.terms) {
        REQUIRE((t.shift == 4 || t.shift == -4));
        REQUIRE_THAT(t.coeff.real(), Catch::Matchers::WithinAbs(-0.25, 1e-15));
        REQUIRE(std::abs(t.coeff.imag()) < 1e-15);
    }

    const auto plus = intensity_split(mf(MF::Plus, 3));
    REQUIRE_THAT(plus.constant, Catch::Matchers::WithinAbs(1.0, 1e-15));
    REQUIRE(plus.terms.empty());

    REQUIRE_THROWS_AS(validate(ModeFunction{MF::Sin, 0}), ConfigError);
}

TEST_CASE("coupling strength carries the sign of U0 under the root", "[elements]") {
    REQUIRE_THAT(coupling_strength(1.0, 4.0), Catch::Matchers::WithinAbs(2.0, 1e-15));
    REQUIRE_THAT(coupling_strength(-1.0, 4.0), Catch::Matchers::WithinAbs(-2.0, 1e-15));
    REQUIRE(coupling_strength(0.0, 4.0) == 0.0);
    REQUIRE(coupling_strength(-0.5, 0.0) == 0.0);
}

TEST_CASE("mode exact propagator", "[elements]") {
    auto mode = std::make_shared<LossyMode>(0.9, 0.4, 6);
    Composite sys({mode}, {});

    SECTION("dt = 0 is the identity") {
        StateVector psi = random_state({6}, 21);
        StateVector out = psi;
        sys.apply_exact_propagator(0.0, out.amps());
        REQUIRE(max_abs_diff(out.amps(), psi.amps()) < 1e-15);
    }

    SECTION("kappa = 0 preserves the norm") {
        auto closed = std::make_shared<LossyMode>(0.9, 0.0, 6);
        Composite csys({closed}, {});
        StateVector psi = random_state({6}, 22);
        const double n0 = norm(psi);
        csys.apply_exact_propagator(0.8, psi.amps());
        REQUIRE(std::abs(norm(psi) - n0) < 1e-14);
    }

    SECTION("|1> survival amplitude decays as exp(-kappa dt)") {
        StateVector psi = fock_state(1, 6);
        sys.apply_exact_propagator(0.5, psi.amps());
        REQUIRE_THAT(std::abs(psi[1]), Catch::Matchers::WithinAbs(std::exp(-0.4 * 0.5), 1e-14));
        // survival probability exp(-2 kappa dt)
        REQUIRE_THAT(std::norm(psi[1]), Catch::Matchers::WithinAbs(std::exp(-2 * 0.4 * 0.5), 1e-14));
    }
}

TEST_CASE("pumped mode hamiltonian at the picture origin", "[elements]") {
    // tau = 0, real eta: contribution is eta (a^dag - a), i.e. -i times i eta (a^dag - a)
    const double eta = 0.7;
    auto mode = std::make_shared<PumpedLossyMode>(0.3, 0.2, 5, complex{eta, 0.0});
    Composite sys({mode}, {});
    StateVector psi = fock_state(1, 5);
    std::vector<complex> dy(5);
    sys.apply_hamiltonian(0.0, psi.amps(), dy);
    REQUIRE_THAT(dy[2].real(), Catch::Matchers::WithinAbs(eta * std::sqrt(2.0), 1e-14));
    REQUIRE_THAT(dy[0].real(), Catch::Matchers::WithinAbs(-eta, 1e-14));
    REQUIRE(std::abs(dy[1]) < 1e-15);

    SECTION("eta = 0 contributes nothing") {
        auto quiet = std::make_shared<PumpedLossyMode>(0.3, 0.2, 5, complex{});
        Composite qsys({quiet}, {});
        std::vector<complex> dz(5, complex{});
        qsys.apply_hamiltonian(0.2, psi.amps(), dz);
        for (const auto& v : dz) REQUIRE(v == complex{});
    }
}

TEST_CASE("dense equivalence: free elements", "[elements][oracle]") {
    check_dense_equivalence(
        [](bool split) {
            return Composite({std::make_shared<LossyMode>(-0.8, 0.5, 5, split)}, {});
        },
        0.31, 0.17, 100);
    check_dense_equivalence(
        [](bool split) {
            return Composite(
                {std::make_shared<PumpedLossyMode>(0.6, 0.9, 6, complex{1.1, -0.4}, split)}, {});
        },
        0.23, 0.11, 101);
    check_dense_equivalence(
        [](bool split) { return Composite({std::make_shared<MovingParticle>(0.37, 8, split)}, {}); },
        0.41, 0.29, 102);
    check_dense_equivalence(
        [](bool split) {
            return Composite(
                {std::make_shared<PumpedMovingParticle>(0.37, 16, 0.83, mf(MF::Sin, 2), split)}, {});
        },
        0.19, 0.13, 103);
    check_dense_equivalence(
        [](bool split) {
            return Composite(
                {std::make_shared<PumpedMovingParticle>(0.37, 8, 0.83, mf(MF::Cos, 3), split)}, {});
        },
        0.19, 0.13, 104);
}

TEST_CASE("dense equivalence: particle-cavity interactions", "[elements][oracle]") {
    SECTION("orthogonal") {
        check_dense_equivalence(
            [](bool split) {
                auto mode = std::make_shared<LossyMode>(-0.8, 0.5, 4, split);
                auto part =
                    std::make_shared<PumpedMovingParticle>(0.21, 8, 0.6, mf(MF::Sin, 1), split);
                auto poc = std::make_shared<ParticleOrthogonalToCavity>(-0.7);
                return Composite({mode, part}, {{poc, {0, 1}}});
            },
            0.27, 0.15, 110);
    }
    SECTION("along, standing wave") {
        check_dense_equivalence(
            [](bool split) {
                auto mode = std::make_shared<LossyMode>(-0.8, 0.5, 4, split);
                auto part = std::make_shared<MovingParticle>(0.21, 8, split);
                auto pac = std::make_shared<ParticleAlongCavity>(-0.7, mf(MF::Cos, 1), 0.35);
                return Composite({mode, part}, {{pac, {0, 1}}});
            },
            0.27, 0.15, 111);
    }
    SECTION("along, travelling wave, wired after the particle") {
        check_dense_equivalence(
            [](bool split) {
                auto part = std::make_shared<MovingParticle>(0.21, 8, split);
                auto mode = std::make_shared<LossyMode>(0.4, 0.3, 4, split);
                auto pac = std::make_shared<ParticleAlongCavity>(0.5, mf(MF::Plus, 2), 0.35);
                return Composite({part, mode}, {{pac, {1, 0}}});
            },
            0.33, 0.21, 112);
    }
    SECTION("along, pumped particle supplies eta_eff") {
        check_dense_equivalence(
            [](bool split) {
                auto mode = std::make_shared<LossyMode>(-0.4, 0.6, 4, split);
                auto part =
                    std::make_shared<PumpedMovingParticle>(0.18, 8, 0.44, mf(MF::Sin, 1), split);
                auto pac = std::make_shared<ParticleAlongCavity>(-0.9, mf(MF::Sin, 1));
                return Composite({mode, part}, {{pac, {0, 1}}});
            },
            0.27, 0.15, 113);
    }
}

TEST_CASE("dense equivalence: 2D particle-cavity", "[elements][oracle]") {
    check_dense_equivalence(
        [](bool split) {
            auto mode = std::make_shared<LossyMode>(-0.8, 0.5, 3, split);
            auto p1 = std::make_shared<MovingParticle>(0.21, 4, split);
            auto p2 = std::make_shared<PumpedMovingParticle>(0.33, 4, 0.52, mf(MF::Sin, 1), split);
            auto pc2 = std::make_shared<ParticleCavity2D>(-0.7, mf(MF::Cos, 1));
            return Composite({mode, p1, p2}, {{pc2, {0, 1, 2}}});
        },
        0.22, 0.14, 120);
}

TEST_CASE("dense equivalence: two modes sharing one particle coordinate", "[elements][oracle]") {
    SECTION("aliased ring-cavity wiring") {
        check_dense_equivalence(
            [](bool split) {
                auto m1 = std::make_shared<LossyMode>(-0.8, 0.5, 3, split);
                auto m2 = std::make_shared<LossyMode>(-0.6, 0.4, 3, split);
                auto part = std::make_shared<MovingParticle>(0.21, 8, split);
                auto ptm = std::make_shared<ParticleTwoModes>(-0.5, mf(MF::Plus, 1), -0.4,
                                                              mf(MF::Minus, 1));
                return Composite({m1, m2, part}, {{ptm, {0, 2, 1, 2}}});
            },
            0.24, 0.18, 130);
    }
    SECTION("distinct coordinates") {
        check_dense_equivalence(
            [](bool split) {
                auto m1 = std::make_shared<LossyMode>(-0.8, 0.5, 2, split);
                auto m2 = std::make_shared<LossyMode>(-0.6, 0.4, 2, split);
                auto p1 = std::make_shared<MovingParticle>(0.21, 4, split);
                auto p2 = std::make_shared<MovingParticle>(0.28, 4, split);
                auto ptm =
                    std::make_shared<ParticleTwoModes>(0.5, mf(MF::Sin, 1), 0.4, mf(MF::Cos, 1));
                return Composite({m1, p1, m2, p2}, {{ptm, {0, 1, 2, 3}}});
            },
            0.24, 0.18, 131);
    }
    SECTION("aliasing the mode slots is rejected") {
        auto m1 = std::make_shared<LossyMode>(-0.8, 0.5, 3);
        auto part = std::make_shared<MovingParticle>(0.21, 8);
        auto ptm = std::make_shared<ParticleTwoModes>(-0.5, mf(MF::Plus, 1), -0.4, mf(MF::Minus, 1));
        REQUIRE_THROWS_AS(Composite({m1, part}, {{ptm, {0, 1, 0, 1}}}), ConstructionError);
    }
    SECTION("opposite dispersive signs are rejected") {
        REQUIRE_THROWS_AS(ParticleTwoModes(0.5, mf(MF::Plus, 1), -0.4, mf(MF::Minus, 1)),
                          ConfigError);
    }
    SECTION("U01 = 0 contributes nothing") {
        auto ptm = std::make_shared<ParticleTwoModes>(0.0, mf(MF::Plus, 1), 0.4, mf(MF::Minus, 1));
        REQUIRE_FALSE(ptm->has_hamiltonian());
    }
}

TEST_CASE("ring-cavity exchange reduces to a single -2K shift", "[elements]") {
    const auto combined = product_terms(conjugate_terms(mode_function_terms(mf(MF::Plus, 1))),
                                        mode_function_terms(mf(MF::Minus, 1)));
    REQUIRE(combined.size() == 1);
    REQUIRE(combined[0].shift == -2);
    REQUIRE_THAT(std::abs(combined[0].coeff), Catch::Matchers::WithinAbs(1.0, 1e-15));
}

TEST_CASE("kappa = 0 compositions conserve the norm under ODE evolution", "[elements]") {
    const double eps = 1e-8;
    SECTION("pumped mode") {
        auto mode = std::make_shared<PumpedLossyMode>(0.6, 0.0, 12, complex{0.8, 0.3});
        Composite sys({mode}, {});
        REQUIRE(norm_drift_under_ode(sys, fock_state(0, 12), 1.0, eps) < 10 * eps);
    }
    SECTION("orthogonal interaction") {
        auto mode = std::make_shared<LossyMode>(-0.8, 0.0, 4);
        auto part = std::make_shared<PumpedMovingParticle>(0.21, 8, 0.6, mf(MF::Sin, 1));
        auto poc = std::make_shared<ParticleOrthogonalToCavity>(-0.7);
        Composite sys({mode, part}, {{poc, {0, 1}}});
        StateVector psi0 = direct_product(fock_state(0, 4), wave_packet(0.4, 1.0, 0.4, 8));
        REQUIRE(norm_drift_under_ode(sys, psi0, 1.0, eps) < 10 * eps);
    }
    SECTION("edge-supported momentum state stays norm-conserving") {
        // shifts dropped at the grid edge must not break Hermiticity
        auto mode = std::make_shared<LossyMode>(-0.8, 0.0, 3);
        auto part = std::make_shared<PumpedMovingParticle>(0.21, 8, 0.6, mf(MF::Sin, 3));
        auto poc = std::make_shared<ParticleOrthogonalToCavity>(-0.7);
        Composite sys({mode, part}, {{poc, {0, 1}}});
        StateVector psi0 = direct_product(fock_state(1, 3), normalized(random_state({8}, 55)));
        REQUIRE(norm_drift_under_ode(sys, psi0, 0.6, eps) < 10 * eps);
    }
}

TEST_CASE("shared element wired at two positions gives identical blocks", "[elements]") {
    auto mode = std::make_shared<LossyMode>(-0.5, 0.4, 3);
    auto part = std::make_shared<PumpedMovingParticle>(0.3, 4, 0.5, mf(MF::Sin, 1));
    auto poc = std::make_shared<ParticleOrthogonalToCavity>(-0.6);
    Composite sys({mode, part, part}, {{poc, {0, 1}}, {poc, {0, 2}}});

    // swapping the two identical particle factors must commute with H
    const StateVector psi = random_state({3, 4, 4}, 60);
    StateVector swapped(psi.dims());
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t j1 = 0; j1 < 4; ++j1)
            for (std::size_t j2 = 0; j2 < 4; ++j2)
                swapped.amps()[n * 16 + j2 * 4 + j1] = psi.amps()[n * 16 + j1 * 4 + j2];

    std::vector<complex> d1(psi.size()), d2(psi.size()), d1s(psi.size());
    sys.apply_hamiltonian(0.1, psi.amps(), d1);
    sys.apply_hamiltonian(0.1, swapped.amps(), d2);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t j1 = 0; j1 < 4; ++j1)
            for (std::size_t j2 = 0; j2 < 4; ++j2)
                d1s[n * 16 + j2 * 4 + j1] = d1[n * 16 + j1 * 4 + j2];
    REQUIRE(max_abs_diff(d1s, d2) < 1e-13);
}

TEST_CASE("repeated hamiltonian evaluation at one tau is bit-stable", "[elements]") {
    auto mode = std::make_shared<LossyMode>(-0.8, 0.5, 4);
    auto part = std::make_shared<PumpedMovingParticle>(0.21, 8, 0.6, mf(MF::Sin, 1));
    auto poc = std::make_shared<ParticleOrthogonalToCavity>(-0.7);
    Composite sys({mode, part}, {{poc, {0, 1}}});
    const StateVector psi = random_state({4, 8}, 61);
    std::vector<complex> d1(psi.size()), d2(psi.size());
    sys.apply_hamiltonian(0.37, psi.amps(), d1);
    sys.apply_hamiltonian(0.37, psi.amps(), d2);
    for (std::size_t i = 0; i < d1.size(); ++i) REQUIRE(d1[i] == d2[i]);
}

TEST_CASE("particle display", "[elements]") {
    SECTION("momentum eigenstate") {
        auto part = std::make_shared<MovingParticle>(0.5, 16);
        Composite sys({part}, {});
        const std::size_t idx = 16 / 2 + 3; // k = +3
        std::vector<double> out;
        sys.display(fock_state(idx, 16), out);
        REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(3.0, 1e-12)); // <k>
        REQUIRE_THAT(out[1], Catch::Matchers::WithinAbs(0.0, 1e-12)); // vark
    }
    SECTION("wave packet moments match the construction") {
        auto part = std::make_shared<MovingParticle>(0.5, 128);
        Composite sys({part}, {});
        std::vector<double> out;
        sys.display(wave_packet(1.0, 2.0, 0.2, 128), out);
        REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(2.0, 1e-3)); // <k>
        REQUIRE_THAT(out[2], Catch::Matchers::WithinAbs(1.0, 1e-3)); // <x>
        REQUIRE_THAT(out[3], Catch::Matchers::WithinAbs(0.2, 2e-3)); // dx
    }
    SECTION("display leaves the state bit-identical") {
        auto part = std::make_shared<MovingParticle>(0.5, 32);
        Composite sys({part}, {});
        const StateVector psi = normalized(random_state({32}, 62));
        const std::vector<complex> before = psi.amps();
        std::vector<double> out;
        sys.display(psi, out);
        for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(before[i] == psi[i]);
    }
}

TEST_CASE("mode display moments match direct summation", "[elements]") {
    auto mode = std::make_shared<LossyMode>(-1.0, 0.5, 32);
    Composite sys({mode}, {});
    const StateVector psi = coherent_state({1.2, -0.5}, 32);
    std::vector<double> out;
    sys.display(psi, out);

    double n1 = 0.0, n2 = 0.0;
    complex a{};
    for (std::size_t n = 0; n < 32; ++n) {
        n1 += double(n) * std::norm(psi[n]);
        n2 += double(n) * double(n) * std::norm(psi[n]);
        if (n + 1 < 32) a += std::conj(psi[n]) * std::sqrt(double(n + 1)) * psi[n + 1];
    }
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(n1, 1e-13));
    REQUIRE_THAT(out[1], Catch::Matchers::WithinAbs(n2 - n1 * n1, 1e-13));
    REQUIRE_THAT(out[2], Catch::Matchers::WithinAbs(a.real(), 1e-13));
    REQUIRE_THAT(out[3], Catch::Matchers::WithinAbs(a.imag(), 1e-13));
    // and the coherent-state values |alpha|^2, |alpha|^2, Re alpha, Im alpha
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(1.69, 1e-10));
    REQUIRE_THAT(out[2], Catch::Matchers::WithinAbs(1.2, 1e-10));
}

TEST_CASE("a moving packet drifts at the group velocity 2 omega_rec k0", "[elements]") {
    const double omega_rec = 0.02, k0 = 3.0, x0 = -1.0;
    auto part = std::make_shared<MovingParticle>(omega_rec, 64);
    Composite sys({part}, {});
    StateVector psi = wave_packet(x0, k0, 0.25, 64);
    const double t = 2.0;
    sys.apply_exact_propagator(t, psi.amps());
    std::vector<double> out;
    sys.display(psi, out);
    REQUIRE_THAT(out[2], Catch::Matchers::WithinAbs(x0 + 2.0 * omega_rec * k0 * t, 1e-3));
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(k0, 1e-10));
}

TEST_CASE("free-particle spreading follows the minimum-uncertainty law", "[elements]") {
    const double omega_rec = 0.01;
    auto part = std::make_shared<MovingParticle>(omega_rec, 256);
    Composite sys({part}, {});

    StateVector psi = wave_packet(0.0, 0.0, 0.05, 256);
    std::vector<double> out;
    sys.display(psi, out);
    const double var0 = out[3] * out[3];

    const double t = 1.0;
    sys.apply_exact_propagator(t, psi.amps());
    out.clear();
    sys.display(psi, out);
    const double var_t = out[3] * out[3];
    REQUIRE(out[3] < 0.3);

    const double ratio = 2.0 * omega_rec * t / (2.0 * var0);
    const double expected = var0 * (1.0 + ratio * ratio);
    REQUIRE_THAT(var_t, Catch::Matchers::WithinRel(expected, 0.01));
    REQUIRE(std::abs(out[0]) < 1e-10); // <k> drift
}

TEST_CASE("element highest frequencies", "[elements]") {
    REQUIRE(MovingParticle(1.0, 8).highest_frequency() == 16.0);
    REQUIRE(LossyMode(1.0, 5.0, 4).highest_frequency() == 5.0);
    REQUIRE(PumpedLossyMode(1.0, 5.0, 4, complex{7.0, 0.0}).highest_frequency() == 7.0);
    REQUIRE(PumpedMovingParticle(1.0, 8, 20.0, mf(MF::Sin, 1)).highest_frequency() == 20.0);
}

TEST_CASE("identical particles display", "[elements]") {
    const std::size_t D = 8;
    auto part = std::make_shared<MovingParticle>(0.5, D);

    SECTION("occupation amplitudes on bare two-particle states") {
        const StateVector phi1 = fock_state(D / 2, D);     // k = 0
        const StateVector phi2 = fock_state(D / 2 + 1, D); // k = 1, orthogonal
        auto ip = std::make_shared<IdenticalParticles>(phi1, phi2);
        Composite sys({part, part}, {{ip, {0, 1}}});

        REQUIRE(sys.free_display_suppressed(0));
        REQUIRE(sys.free_display_suppressed(1));

        std::vector<double> out;
        sys.display(direct_product(phi1, phi2), out);
        REQUIRE(out.size() == 7);
        REQUIRE_THAT(out[1], Catch::Matchers::WithinAbs(0.0, 1e-12)); // re<2,0>
        REQUIRE_THAT(out[3], Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0), 1e-12)); // re<1,1>
        REQUIRE_THAT(out[5], Catch::Matchers::WithinAbs(0.0, 1e-12)); // re<0,2>

        out.clear();
        sys.display(direct_product(phi1, phi1), out);
        REQUIRE_THAT(out[1], Catch::Matchers::WithinAbs(1.0, 1e-12)); // <2,0|phi1 phi1> = 1
        REQUIRE_THAT(out[3], Catch::Matchers::WithinAbs(0.0, 1e-12));
    }

    SECTION("half-box occupation correlations") {
        auto ip = std::make_shared<IdenticalParticles>();
        Composite sys({part, part}, {{ip, {0, 1}}});

        // both particles fully on the left half: no cross population
        StateVector left({D});
        for (std::size_t j = 0; j < D / 2; ++j) left[j] = 1.0;
        left.normalize();
        const StateVector left_m = momentum_copy(left, 0); // construct in momentum rep
        std::vector<double> out;
        sys.display(direct_product(left_m, left_m), out);
        REQUIRE(out.size() == 1);
        REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(0.0, 1e-12));

        // one left, one right: <n1 n2> = 1
        StateVector right({D});
        for (std::size_t j = D / 2; j < D; ++j) right[j] = 1.0;
        right.normalize();
        const StateVector right_m = momentum_copy(right, 0);
        out.clear();
        sys.display(direct_product(left_m, right_m), out);
        REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    }

    SECTION("embedded amplitudes report the projection modulus") {
        const StateVector phi1 = fock_state(D / 2, D);
        const StateVector phi2 = fock_state(D / 2 + 1, D);
        auto ip = std::make_shared<IdenticalParticles>(phi1, phi2);
        auto mode = std::make_shared<LossyMode>(-1.0, 1.0, 3);
        Composite sys({part, part, mode}, {{ip, {0, 1}}});

        const StateVector psi = direct_product(direct_product(phi1, phi2), fock_state(1, 3));
        std::vector<double> out;
        sys.display(psi, out);
        // mode group (4) + <n1n2> + three amplitude pairs
        REQUIRE(out.size() == 11);
        REQUIRE_THAT(out[7], Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0), 1e-12));
        REQUIRE(out[8] == 0.0); // modulus reported with zero imaginary part
    }

    SECTION("orthogonality and sharing requirements") {
        const StateVector phi1 = fock_state(0, D);
        REQUIRE_THROWS_AS(IdenticalParticles(phi1, phi1), ConfigError);

        auto other = std::make_shared<MovingParticle>(0.5, D);
        auto ip = std::make_shared<IdenticalParticles>();
        REQUIRE_THROWS_AS(Composite({part, other}, {{ip, {0, 1}}}), ConstructionError);
    }
}

TEST_CASE("truncation warnings count jump leakage at the cutoff", "[elements]") {
    auto mode = std::make_shared<LossyMode>(0.0, 0.5, 3);
    Composite sys({mode}, {});
    StateVector psi = normalized(StateVector({3}, {complex{0.1, 0.0}, complex{0.2, 0.0},
                                                   complex{0.97, 0.0}}));
    sys.apply_jump(0, psi);
    REQUIRE(sys.truncation_warnings() == 1);
}
