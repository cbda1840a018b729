// integrate.hpp — adaptive ODE stepping and reproducible uniform randoms
// behind narrow interfaces.
#pragma once

#include "qtraj/errors.hpp"
#include "qtraj/statevec.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace qtraj {

// Embedded Runge-Kutta Cash-Karp 4(5) with step-size control. One call to
// step() performs exactly one accepted step of length dtdid <= dttry and
// proposes a new dttry for the next step. Error control is mixed
// absolute/relative: each component's scale carries a floor of 1e-2 times the
// largest component scale (plus 1e-30), so exactly-zero amplitudes that get
// populated mid-step cannot stall the controller.
class OdeStepper {
public:
    OdeStepper(double eps, double dttry) : eps_(eps), dttry_(dttry) {
        if (eps <= 0.0) throw ConfigError("OdeStepper: eps must be positive");
        if (dttry <= 0.0) throw ConfigError("OdeStepper: dttry must be positive");
    }

    double eps() const { return eps_; }
    double dttry() const { return dttry_; }
    double dtdid() const { return dtdid_; }
    void set_dttry(double dt) {
        if (dt <= 0.0) throw ConfigError("OdeStepper: dttry must be positive");
        dttry_ = dt;
    }

    // Advances y from t by one adaptive step of f: dy/dt = f(t, y).
    // On return t has been advanced by dtdid() and dttry() holds the proposal
    // for the next step.
    template <typename Rhs>
    void step(Rhs&& f, std::vector<complex>& y, double& t) {
        const std::size_t n = y.size();
        resize_scratch(n);

        f(t, std::span<const complex>(y), std::span<complex>(k1_));

        double h = dttry_;
        for (;;) {
            attempt(f, y, t, h);

            double max_scale = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                max_scale = std::max(max_scale, std::abs(y[i]) + std::abs(h * k1_[i]));
            const double scale_floor = 1e-2 * max_scale + 1e-30;
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double scale = std::abs(y[i]) + std::abs(h * k1_[i]) + scale_floor;
                err = std::max(err, std::abs(yerr_[i]) / scale);
            }
            err /= eps_;

            if (err <= 1.0) {
                dtdid_ = h;
                t += h;
                y.swap(ynew_);
                // growth capped at 5x; err below ERRCON would exceed the cap
                dttry_ = err > 1.89e-4 ? SAFETY * h * std::pow(err, PGROW) : 5.0 * h;
                return;
            }

            const double shrunk = SAFETY * h * std::pow(err, PSHRNK);
            h = std::max(shrunk, 0.1 * h);
            if (h < 1e-12 * std::max(std::abs(t), 1.0))
                throw StiffnessError("ode step size underflow at t = " + std::to_string(t));
        }
    }

private:
    static constexpr double SAFETY = 0.9;
    static constexpr double PGROW = -0.2;
    static constexpr double PSHRNK = -0.25;

    template <typename Rhs>
    void attempt(Rhs&& f, const std::vector<complex>& y, double t, double h) {
        // Cash-Karp tableau
        static constexpr double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
        static constexpr double b21 = 0.2;
        static constexpr double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
        static constexpr double b41 = 0.3, b42 = -0.9, b43 = 1.2;
        static constexpr double b51 = -11.0 / 54.0, b52 = 2.5, b53 = -70.0 / 27.0, b54 = 35.0 / 27.0;
        static constexpr double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0, b63 = 575.0 / 13824.0,
                                b64 = 44275.0 / 110592.0, b65 = 253.0 / 4096.0;
        static constexpr double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0, c4 = 125.0 / 594.0,
                                c6 = 512.0 / 1771.0;
        static constexpr double dc1 = c1 - 2825.0 / 27648.0, dc3 = c3 - 18575.0 / 48384.0,
                                dc4 = c4 - 13525.0 / 55296.0, dc5 = -277.0 / 14336.0,
                                dc6 = c6 - 0.25;

        const std::size_t n = y.size();

        for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * b21 * k1_[i];
        f(t + a2 * h, std::span<const complex>(ytmp_), std::span<complex>(k2_));

        for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * (b31 * k1_[i] + b32 * k2_[i]);
        f(t + a3 * h, std::span<const complex>(ytmp_), std::span<complex>(k3_));

        for (std::size_t i = 0; i < n; ++i)
            ytmp_[i] = y[i] + h * (b41 * k1_[i] + b42 * k2_[i] + b43 * k3_[i]);
        f(t + a4 * h, std::span<const complex>(ytmp_), std::span<complex>(k4_));

        for (std::size_t i = 0; i < n; ++i)
            ytmp_[i] = y[i] + h * (b51 * k1_[i] + b52 * k2_[i] + b53 * k3_[i] + b54 * k4_[i]);
        f(t + a5 * h, std::span<const complex>(ytmp_), std::span<complex>(k5_));

        for (std::size_t i = 0; i < n; ++i)
            ytmp_[i] = y[i] + h * (b61 * k1_[i] + b62 * k2_[i] + b63 * k3_[i] + b64 * k4_[i] +
                                   b65 * k5_[i]);
        f(t + a6 * h, std::span<const complex>(ytmp_), std::span<complex>(k6_));

        for (std::size_t i = 0; i < n; ++i) {
            ynew_[i] = y[i] + h * (c1 * k1_[i] + c3 * k3_[i] + c4 * k4_[i] + c6 * k6_[i]);
            yerr_[i] = h * (dc1 * k1_[i] + dc3 * k3_[i] + dc4 * k4_[i] + dc5 * k5_[i] + dc6 * k6_[i]);
        }
    }

    void resize_scratch(std::size_t n) {
        if (k1_.size() == n) return;
        k1_.resize(n); k2_.resize(n); k3_.resize(n); k4_.resize(n); k5_.resize(n); k6_.resize(n);
        ytmp_.resize(n); ynew_.resize(n); yerr_.resize(n);
    }

    double eps_;
    double dttry_;
    double dtdid_ = 0.0;
    std::vector<complex> k1_, k2_, k3_, k4_, k5_, k6_, ytmp_, ynew_, yerr_;
};

// Deterministic stream of uniform doubles in [0,1). The mapping from raw
// 64-bit draws is fixed here (53-bit mantissa) so sequences are reproducible
// independent of the standard library's distribution implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    double uniform() {
        return double(gen_() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace qtraj
