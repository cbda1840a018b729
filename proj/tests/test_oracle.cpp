#include <catch2/catch_amalgamated.hpp>

#include "qtraj/elements.hpp"
#include "qtraj/oracle.hpp"

#include "dense_support.hpp"

#include <memory>

using namespace qtraj;
using namespace qtraj::oracle;

namespace {

Matrix random_density(std::size_t dim, std::uint64_t seed) {
    // mixture of a few random pure states
    Matrix rho(dim);
    std::vector<double> w{0.5, 0.3, 0.2};
    for (std::size_t c = 0; c < w.size(); ++c) {
        const StateVector psi = testsupport::random_state({dim}, seed + c);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                rho(i, j) += w[c] * psi[i] * std::conj(psi[j]);
    }
    return rho;
}

} // namespace

TEST_CASE("liouvillian of the trivial system vanishes", "[oracle]") {
    const Matrix rho = random_density(6, 1);
    const Matrix drho = liouvillian_rhs(rho, Matrix(6), {});
    for (const auto& v : drho.a) REQUIRE(std::abs(v) < 1e-15);
}

TEST_CASE("liouvillian preserves the trace", "[oracle]") {
    auto mode = std::make_shared<PumpedLossyMode>(-0.7, 0.9, 6, complex{1.0, 0.4});
    Composite sys({mode}, {});
    const DenseSystem ds = assemble_dense(sys);
    const Matrix rho = random_density(6, 2);
    const Matrix drho = liouvillian_rhs(rho, ds.hamiltonian, ds.jumps);
    REQUIRE(std::abs(trace_real(drho)) < 1e-12);
    complex imag_trace{};
    for (std::size_t i = 0; i < drho.n; ++i) imag_trace += drho(i, i);
    REQUIRE(std::abs(imag_trace) < 1e-12);
}

TEST_CASE("photon number of a lossy mode decays at rate 2 kappa", "[oracle]") {
    const double kappa = 0.8;
    auto mode = std::make_shared<LossyMode>(-0.3, kappa, 8);
    Composite sys({mode}, {});
    const DenseSystem ds = assemble_dense(sys);
    const Matrix rho = random_density(8, 3);
    const Matrix drho = liouvillian_rhs(rho, ds.hamiltonian, ds.jumps);

    const Matrix n = mode_number(8);
    const double dn_dt = trace_product(drho, n).real();
    const double mean_n = trace_product(rho, n).real();
    REQUIRE_THAT(dn_dt, Catch::Matchers::WithinAbs(-2.0 * kappa * mean_n, 1e-10));
}

TEST_CASE("closed evolution keeps a pure state pure", "[oracle]") {
    auto mode = std::make_shared<PumpedLossyMode>(0.5, 0.0, 10, complex{0.6, 0.0});
    Composite sys({mode}, {});
    const DenseSystem ds = assemble_dense(sys);

    Matrix rho = pure_density(fock_state(0, 10));
    std::vector<double> times{0.5, 1.0, 2.0};
    const MasterSeries series = integrate_master(sys, fock_state(0, 10), 1e-8, times);
    REQUIRE(series.times.size() == 3);

    // re-integrate by hand to inspect the final density matrix
    std::vector<Matrix> jdagj;
    OdeStepper stepper(1e-8, 0.05);
    std::vector<complex> y(rho.a);
    Matrix scratch(10), out(10);
    auto rhs = [&](double, std::span<const complex> yv, std::span<complex> dy) {
        std::copy(yv.begin(), yv.end(), scratch.a.begin());
        liouvillian_rhs(scratch, ds.hamiltonian, ds.jumps, jdagj, out);
        std::copy(out.a.begin(), out.a.end(), dy.begin());
    };
    double t = 0.0;
    while (t < 2.0) {
        stepper.set_dttry(std::min(stepper.dttry(), 2.0 - t));
        stepper.step(rhs, y, t);
    }
    std::copy(y.begin(), y.end(), rho.a.begin());
    REQUIRE_THAT(purity(rho), Catch::Matchers::WithinAbs(1.0, 1e-8));
    REQUIRE_THAT(trace_real(rho), Catch::Matchers::WithinAbs(1.0, 1e-8));
    REQUIRE(hermiticity_defect(rho) < 1e-10);
}

TEST_CASE("pumped lossy mode relaxes to the mean-field fixed point", "[oracle]") {
    // steady <a> = eta / (kappa - i Delta_C) = 1 for eta = kappa = 1, Delta_C = 0
    auto mode = std::make_shared<PumpedLossyMode>(0.0, 1.0, 16, complex{1.0, 0.0});
    Composite sys({mode}, {});
    std::vector<double> times{10.0};
    const MasterSeries series = integrate_master(sys, fock_state(0, 16), 1e-8, times);
    REQUIRE(series.labels[2] == "free0 re<a>");
    REQUIRE_THAT(series.rows[0][2], Catch::Matchers::WithinAbs(1.0, 1e-4));
    REQUIRE_THAT(series.rows[0][3], Catch::Matchers::WithinAbs(0.0, 1e-4));
    REQUIRE_THAT(series.rows[0][0], Catch::Matchers::WithinAbs(1.0, 1e-4)); // <N> of coherent(1)
}

TEST_CASE("particle observables come from the dense transform route", "[oracle]") {
    auto part = std::make_shared<MovingParticle>(0.5, 32);
    Composite sys({part}, {});
    const StateVector packet = wave_packet(0.7, 2.0, 0.3, 32);
    const MasterSeries series = integrate_master(sys, packet, 1e-8, std::vector<double>{0.0});

    std::vector<double> engine;
    sys.display(packet, engine);
    for (std::size_t c = 0; c < engine.size(); ++c)
        REQUIRE_THAT(series.rows[0][c], Catch::Matchers::WithinAbs(engine[c], 1e-9));
}

TEST_CASE("the dense cap is enforced", "[oracle]") {
    auto mode = std::make_shared<LossyMode>(0.0, 1.0, 300);
    Composite sys({mode}, {});
    REQUIRE_THROWS_AS(assemble_dense(sys), ConfigError);
}
