// elements.hpp — the cavity-QED element library: (pumped) lossy modes,
// (pumped) moving particles, and the interactions between them.
//
// All position-dependent operators are restricted to the mode-function family
// sin(K xi), cos(K xi), e^{+-iK xi} and act in momentum space as shifts by the
// wavenumber. Free diagonal parts normally live in the exact propagator
// (interaction picture); every free can alternatively fold its diagonal into
// the Hamiltonian (interaction_picture = false), in which case all picture
// phase factors it hands to interactions collapse to one.
//
// Interaction-picture phases for a shift k -> k+s are
//   exp(i * omega_rec * tau * ((k+s)^2 - k^2)),
// the exact conjugation of e^{is xi} by U(tau) = e^{-i omega_rec tau k^2};
// mode raising/lowering operators pick up e^{+-Z_C tau} with Z_C = kappa - i Delta_C.
// Shift components pushed beyond the grid edge are dropped (cutoff semantics,
// like the photon cutoff); the adjoint pairs below stay exact mirrors of each
// other, so truncation never breaks Hermiticity of the kappa = 0 part.
#pragma once

#include "qtraj/errors.hpp"
#include "qtraj/statevec.hpp"
#include "qtraj/system.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qtraj {

struct ModeFunction {
    enum class Kind { Sin, Cos, Plus, Minus };
    Kind kind = Kind::Cos;
    long wavenumber = 1; // units of Delta k = 1

    bool travelling() const { return kind == Kind::Plus || kind == Kind::Minus; }

    std::string label() const {
        const char* k = kind == Kind::Sin    ? "sin"
                        : kind == Kind::Cos  ? "cos"
                        : kind == Kind::Plus ? "plus"
                                             : "minus";
        return std::string(k) + ":" + std::to_string(wavenumber);
    }
};

inline void validate(const ModeFunction& m) {
    if (m.wavenumber < 1) throw ConfigError("mode function: wavenumber must be >= 1");
}

// m(xi) evaluated at position xi.
inline complex mode_function_value(const ModeFunction& m, double xi) {
    const double kx = double(m.wavenumber) * xi;
    switch (m.kind) {
        case ModeFunction::Kind::Sin: return {std::sin(kx), 0.0};
        case ModeFunction::Kind::Cos: return {std::cos(kx), 0.0};
        case ModeFunction::Kind::Plus: return std::polar(1.0, kx);
        default: return std::polar(1.0, -kx);
    }
}

// One momentum-space shift component: coeff * e^{i shift xi}.
struct FourierTerm {
    long shift;
    complex coeff;
};

inline std::vector<FourierTerm> mode_function_terms(const ModeFunction& m) {
    const long K = m.wavenumber;
    switch (m.kind) {
        case ModeFunction::Kind::Sin:
            return {{+K, complex(0.0, -0.5)}, {-K, complex(0.0, 0.5)}};
        case ModeFunction::Kind::Cos:
            return {{+K, complex(0.5, 0.0)}, {-K, complex(0.5, 0.0)}};
        case ModeFunction::Kind::Plus:
            return {{+K, complex(1.0, 0.0)}};
        default:
            return {{-K, complex(1.0, 0.0)}};
    }
}

inline std::vector<FourierTerm> conjugate_terms(std::vector<FourierTerm> terms) {
    for (auto& t : terms) {
        t.shift = -t.shift;
        t.coeff = std::conj(t.coeff);
    }
    return terms;
}

inline std::vector<FourierTerm> product_terms(const std::vector<FourierTerm>& a,
                                              const std::vector<FourierTerm>& b) {
    std::vector<FourierTerm> out;
    for (const auto& ta : a)
        for (const auto& tb : b) {
            const long s = ta.shift + tb.shift;
            const complex c = ta.coeff * tb.coeff;
            bool merged = false;
            for (auto& t : out)
                if (t.shift == s) {
                    t.coeff += c;
                    merged = true;
                    break;
                }
            if (!merged) out.push_back({s, c});
        }
    return out;
}

// |m(xi)|^2 split into its constant part (folded into detuning shifts or
// dropped as a global energy offset) and the position-dependent remainder.
struct IntensitySplit {
    double constant;
    std::vector<FourierTerm> terms;
};

inline IntensitySplit intensity_split(const ModeFunction& m) {
    IntensitySplit out{0.0, {}};
    for (const auto& t : product_terms(conjugate_terms(mode_function_terms(m)), mode_function_terms(m))) {
        if (t.shift == 0)
            out.constant += t.coeff.real();
        else if (std::abs(t.coeff) > 0.0)
            out.terms.push_back(t);
    }
    return out;
}

// A = sign(U0) sqrt(|U0| eta_eff); eta_eff >= 0 by construction.
inline double coupling_strength(double u0, double eta_eff) {
    const double a = std::sqrt(std::abs(u0) * eta_eff);
    return u0 < 0.0 ? -a : a;
}

namespace detail {

inline std::span<const double> sqrt_table(std::size_t n) {
    thread_local std::vector<double> tab{0.0};
    if (tab.size() < n) {
        const std::size_t old = tab.size();
        tab.resize(n);
        for (std::size_t i = old; i < n; ++i) tab[i] = std::sqrt(double(i));
    }
    return {tab.data(), n};
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace detail

// ---------------------------------------------------------------------------
// Free elements
// ---------------------------------------------------------------------------

class LossyMode : public FreeElement {
public:
    LossyMode(double delta_c, double kappa, std::size_t cutoff, bool interaction_picture = true)
        : delta_c_(delta_c), kappa_(kappa), cutoff_(cutoff), split_(interaction_picture) {
        if (cutoff_ < 2) throw ConfigError("LossyMode: cutoff must be at least 2");
        if (kappa_ < 0.0) throw ConfigError("LossyMode: kappa must be non-negative");
    }

    std::size_t dim() const override { return cutoff_; }
    FreeKind kind() const override { return FreeKind::Mode; }
    std::string name() const override { return "LossyMode"; }
    std::string param_summary() const override {
        std::string s = "delta_c=" + detail::format_double(delta_c_) +
                        " kappa=" + detail::format_double(kappa_) +
                        " cutoff=" + std::to_string(cutoff_);
        if (!split_) s += " picture=0";
        return s;
    }

    double delta_c() const { return delta_c_; }
    double kappa() const { return kappa_; }
    std::size_t cutoff() const { return cutoff_; }
    bool interaction_picture() const { return split_; }
    complex zc() const { return {kappa_, -delta_c_}; }

    // Dispersive detuning shift Delta_C -> Delta_C - shift, applied by
    // interactions at composite construction.
    void shift_detuning(double shift) { delta_c_ -= shift; }

    // Picture factors interactions attach to a^dag / a.
    complex raise_factor(double tau) const { return split_ ? std::exp(zc() * tau) : complex{1.0, 0.0}; }
    complex lower_factor(double tau) const { return split_ ? std::exp(-zc() * tau) : complex{1.0, 0.0}; }

    double highest_frequency() const override { return std::max(std::abs(delta_c_), kappa_); }

    bool has_exact_propagator() const override { return split_; }
    void apply_exact_propagator(double dt, const SliceView& view, std::span<complex> psi) const override {
        thread_local std::vector<complex> factor;
        factor.resize(cutoff_);
        for (std::size_t n = 0; n < cutoff_; ++n) factor[n] = std::exp(-zc() * dt * double(n));
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t n = 0; n < cutoff_; ++n) psi[sl.first + sl.stride * n] *= factor[n];
        }
    }

    bool has_hamiltonian() const override { return !split_; }
    void add_hamiltonian(double /*tau*/, const SliceView& view, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        if (split_) return;
        // full non-Hermitian diagonal: dpsi_n/dt += -Z_C n psi_n
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t n = 0; n < cutoff_; ++n)
                dpsidt[sl.first + sl.stride * n] += -zc() * double(n) * psi[sl.first + sl.stride * n];
        }
    }

    std::size_t jump_channel_count() const override { return kappa_ > 0.0 ? 1 : 0; }

    double jump_rate(std::size_t, const SliceView& view, std::span<const complex> psi) const override {
        double mean_n = 0.0;
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t n = 1; n < cutoff_; ++n)
                mean_n += double(n) * std::norm(psi[sl.first + sl.stride * n]);
        }
        return 2.0 * kappa_ * mean_n;
    }

    void apply_jump(std::size_t, const SliceView& view, std::span<complex> psi) const override {
        const auto sq = detail::sqrt_table(cutoff_ + 1);
        double top = 0.0;
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            top += std::norm(psi[sl.first + sl.stride * (cutoff_ - 1)]);
            for (std::size_t n = 0; n + 1 < cutoff_; ++n)
                psi[sl.first + sl.stride * n] = sq[n + 1] * psi[sl.first + sl.stride * (n + 1)];
            psi[sl.first + sl.stride * (cutoff_ - 1)] = 0.0;
        }
        if (top > 1e-6) ++truncation_warnings_;
    }

    std::vector<std::string> display_labels() const override {
        return {"<N>", "varN", "re<a>", "im<a>"};
    }

    void display(const SliceView& view, const StateVector& psi, std::vector<double>& out) const override {
        const auto sq = detail::sqrt_table(cutoff_ + 1);
        double n1 = 0.0, n2 = 0.0;
        complex a{0.0, 0.0};
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t n = 0; n < cutoff_; ++n) {
                const double p = std::norm(psi[sl.first + sl.stride * n]);
                n1 += double(n) * p;
                n2 += double(n) * double(n) * p;
            }
            for (std::size_t n = 0; n + 1 < cutoff_; ++n)
                a += std::conj(psi[sl.first + sl.stride * n]) * sq[n + 1] *
                     psi[sl.first + sl.stride * (n + 1)];
        }
        out.push_back(n1);
        out.push_back(n2 - n1 * n1);
        out.push_back(a.real());
        out.push_back(a.imag());
    }

private:
    double delta_c_;
    double kappa_;
    std::size_t cutoff_;
    bool split_;
};

class PumpedLossyMode : public LossyMode {
public:
    PumpedLossyMode(double delta_c, double kappa, std::size_t cutoff, complex eta,
                    bool interaction_picture = true)
        : LossyMode(delta_c, kappa, cutoff, interaction_picture), eta_(eta) {}

    bool pumped() const override { return true; }
    std::string name() const override { return "PumpedLossyMode"; }
    std::string param_summary() const override {
        return LossyMode::param_summary() + " eta=" + detail::format_double(eta_.real()) + "," +
               detail::format_double(eta_.imag());
    }

    complex eta() const { return eta_; }

    double highest_frequency() const override {
        return std::max(LossyMode::highest_frequency(), std::abs(eta_));
    }

    bool has_hamiltonian() const override { return true; }
    void add_hamiltonian(double tau, const SliceView& view, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        LossyMode::add_hamiltonian(tau, view, psi, dpsidt);
        // -i H_I with H_I = i(eta e^{Z_C tau} a^dag - eta* e^{-Z_C tau} a)
        const std::size_t d = cutoff();
        const auto sq = detail::sqrt_table(d + 1);
        const complex up = eta_ * raise_factor(tau);
        const complex dn = std::conj(eta_) * lower_factor(tau);
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t n = 0; n + 1 < d; ++n) {
                dpsidt[sl.first + sl.stride * (n + 1)] += up * sq[n + 1] * psi[sl.first + sl.stride * n];
                dpsidt[sl.first + sl.stride * n] -= dn * sq[n + 1] * psi[sl.first + sl.stride * (n + 1)];
            }
        }
    }

private:
    complex eta_;
};

class MovingParticle : public FreeElement {
public:
    MovingParticle(double omega_rec, std::size_t resolution, bool interaction_picture = true)
        : omega_rec_(omega_rec), resolution_(resolution), split_(interaction_picture) {
        if (!is_power_of_two(resolution_) || resolution_ < 4)
            throw ConfigError("MovingParticle: resolution must be a power of two, at least 4");
        if (omega_rec_ <= 0.0) throw ConfigError("MovingParticle: omega_rec must be positive");
    }

    std::size_t dim() const override { return resolution_; }
    FreeKind kind() const override { return FreeKind::Particle; }
    std::string name() const override { return "MovingParticle"; }
    std::string param_summary() const override {
        std::string s = "omega_rec=" + detail::format_double(omega_rec_) +
                        " resolution=" + std::to_string(resolution_);
        if (!split_) s += " picture=0";
        return s;
    }

    double omega_rec() const { return omega_rec_; }
    std::size_t resolution() const { return resolution_; }
    bool interaction_picture() const { return split_; }
    long momentum_at(std::size_t j) const { return momentum_of(j, resolution_); }

    // Phase a momentum shift k -> k+s picks up under conjugation by
    // U(tau) = e^{-i omega_rec tau k^2}.
    complex shift_phase(double tau, long k, long s) const {
        if (!split_) return {1.0, 0.0};
        return std::polar(1.0, omega_rec_ * tau * double((k + s) * (k + s) - k * k));
    }

    double highest_frequency() const override {
        const double kmax = double(resolution_ / 2);
        return omega_rec_ * kmax * kmax;
    }

    bool has_exact_propagator() const override { return split_; }
    void apply_exact_propagator(double dt, const SliceView& view, std::span<complex> psi) const override {
        thread_local std::vector<complex> factor;
        factor.resize(resolution_);
        for (std::size_t j = 0; j < resolution_; ++j) {
            const double k = double(momentum_at(j));
            factor[j] = std::polar(1.0, -omega_rec_ * dt * k * k);
        }
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t j = 0; j < resolution_; ++j) psi[sl.first + sl.stride * j] *= factor[j];
        }
    }

    bool has_hamiltonian() const override { return !split_; }
    void add_hamiltonian(double /*tau*/, const SliceView& view, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        if (split_) return;
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t j = 0; j < resolution_; ++j) {
                const double k = double(momentum_at(j));
                dpsidt[sl.first + sl.stride * j] +=
                    complex(0.0, -omega_rec_ * k * k) * psi[sl.first + sl.stride * j];
            }
        }
    }

    std::vector<std::string> display_labels() const override { return {"<k>", "vark", "<x>", "dx"}; }

    void display(const SliceView& view, const StateVector& psi, std::vector<double>& out) const override {
        double k1 = 0.0, k2 = 0.0;
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t j = 0; j < resolution_; ++j) {
                const double p = std::norm(psi[sl.first + sl.stride * j]);
                const double k = double(momentum_at(j));
                k1 += k * p;
                k2 += k * k * p;
            }
        }
        // position moments on a copy, never in place
        const StateVector px = position_copy(psi, view.subsystems[0]);
        double x1 = 0.0, x2 = 0.0;
        for (std::size_t s = 0; s < view.slice_count(); ++s) {
            const Slice sl = view.slice(s);
            for (std::size_t j = 0; j < resolution_; ++j) {
                const double p = std::norm(px[sl.first + sl.stride * j]);
                const double x = position_of(j, resolution_);
                x1 += x * p;
                x2 += x * x * p;
            }
        }
        out.push_back(k1);
        out.push_back(k2 - k1 * k1);
        out.push_back(x1);
        out.push_back(std::sqrt(std::max(0.0, x2 - x1 * x1)));
    }

private:
    double omega_rec_;
    std::size_t resolution_;
    bool split_;
};

namespace detail {

// dpsidt[.., j+s, ..] += scalar * phase(k_j -> k_j+s) * diag(n)^pow * psi[.., j, ..]
// over a single particle axis of the view; components shifted off the grid are
// dropped. Used by the pumped-particle potential.
inline void add_particle_shift(const MovingParticle& part, const SliceView& view,
                               std::size_t part_axis, long s, complex scalar, double tau,
                               std::span<const complex> psi, std::span<complex> dpsidt) {
    const long D = long(part.dim());
    const long lo = std::max(0L, -s), hi = std::min(D, D - s);
    if (lo >= hi) return;
    const std::size_t sp = view.strides[part_axis];
    thread_local std::vector<complex> ph;
    ph.resize(std::size_t(D));
    for (long j = lo; j < hi; ++j)
        ph[std::size_t(j)] = scalar * part.shift_phase(tau, part.momentum_at(std::size_t(j)), s);
    for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
        const std::size_t base = view.firsts[sl];
        for (long j = lo; j < hi; ++j)
            dpsidt[base + sp * std::size_t(j + s)] += ph[std::size_t(j)] * psi[base + sp * std::size_t(j)];
    }
}

} // namespace detail

class PumpedMovingParticle : public MovingParticle {
public:
    PumpedMovingParticle(double omega_rec, std::size_t resolution, double eta_eff,
                         ModeFunction pump_mode, bool interaction_picture = true)
        : MovingParticle(omega_rec, resolution, interaction_picture), eta_eff_(eta_eff),
          pump_(pump_mode) {
        if (eta_eff_ < 0.0) throw ConfigError("PumpedMovingParticle: eta_eff must be non-negative");
        qtraj::validate(pump_);
        pump_terms_ = intensity_split(pump_).terms;
    }

    bool pumped() const override { return true; }
    std::string name() const override { return "PumpedMovingParticle"; }
    std::string param_summary() const override {
        return MovingParticle::param_summary() + " eta_eff=" + detail::format_double(eta_eff_) +
               " pump_mode=" + pump_.label();
    }

    double eta_eff() const { return eta_eff_; }
    const ModeFunction& pump_mode() const { return pump_; }

    double highest_frequency() const override {
        return std::max(MovingParticle::highest_frequency(), eta_eff_);
    }

    bool has_hamiltonian() const override {
        return !interaction_picture() || (eta_eff_ > 0.0 && !pump_terms_.empty());
    }

    void add_hamiltonian(double tau, const SliceView& view, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        MovingParticle::add_hamiltonian(tau, view, psi, dpsidt);
        if (eta_eff_ == 0.0) return;
        // pump potential eta_eff |zeta(xi)|^2 with the constant part dropped;
        // for travelling pumps nothing remains
        for (const auto& t : pump_terms_)
            detail::add_particle_shift(*this, view, 0, t.shift, complex(0.0, -1.0) * eta_eff_ * t.coeff,
                                       tau, psi, dpsidt);
    }

private:
    double eta_eff_;
    ModeFunction pump_;
    std::vector<FourierTerm> pump_terms_;
};

// ---------------------------------------------------------------------------
// Interaction elements
// ---------------------------------------------------------------------------

namespace detail {

inline const LossyMode& as_mode(const FreeElement& f) { return static_cast<const LossyMode&>(f); }
inline const MovingParticle& as_particle(const FreeElement& f) {
    return static_cast<const MovingParticle&>(f);
}

// View axes an operator does not act on still have to be iterated (the view
// only enumerates subsystems outside itself as dummies). Collects (stride,
// dim) pairs for every axis not in `active`.
struct PassiveAxes {
    std::vector<std::pair<std::size_t, std::size_t>> axes;
    std::size_t combos = 1;

    PassiveAxes(const SliceView& view, std::initializer_list<std::size_t> active) {
        for (std::size_t ax = 0; ax < view.strides.size(); ++ax) {
            bool is_active = false;
            for (std::size_t a : active) is_active |= (a == ax);
            if (!is_active) {
                axes.emplace_back(view.strides[ax], view.sub_dims[ax]);
                combos *= view.sub_dims[ax];
            }
        }
    }

    std::size_t offset(std::size_t combo) const {
        std::size_t off = 0;
        for (const auto& [stride, dim] : axes) {
            off += stride * (combo % dim);
            combo /= dim;
        }
        return off;
    }
};

inline void require_mode(const FreeElement* f, const std::string& who, std::size_t slot) {
    if (!dynamic_cast<const LossyMode*>(f))
        throw ConstructionError(who + ": slot " + std::to_string(slot) + " is not a mode element");
}
inline void require_particle(const FreeElement* f, const std::string& who, std::size_t slot,
                             bool pumped = false) {
    if (!dynamic_cast<const MovingParticle*>(f))
        throw ConstructionError(who + ": slot " + std::to_string(slot) + " is not a particle element");
    if (pumped && !dynamic_cast<const PumpedMovingParticle*>(f))
        throw ConstructionError(who + ": slot " + std::to_string(slot) + " is not a pumped particle");
}

// dpsidt += -i A [ g(xi) a^dag + g*(xi) a ]_I(tau) psi over a (mode, particle)
// axis pair; g_terms decompose the function multiplying a^dag.
inline void add_mode_particle_coupling(const LossyMode& mode, const MovingParticle& part,
                                       const SliceView& view, std::size_t mode_axis,
                                       std::size_t part_axis,
                                       const std::vector<FourierTerm>& g_terms, double A, double tau,
                                       std::span<const complex> psi, std::span<complex> dpsidt) {
    if (A == 0.0) return;
    const std::size_t dm = mode.dim();
    const long D = long(part.dim());
    const std::size_t sm = view.strides[mode_axis], sp = view.strides[part_axis];
    const PassiveAxes passive(view, {mode_axis, part_axis});
    const auto sq = sqrt_table(dm + 1);
    const complex up_base = complex(0.0, -1.0) * A * mode.raise_factor(tau);
    const complex dn_base = complex(0.0, -1.0) * A * mode.lower_factor(tau);
    thread_local std::vector<complex> ph;
    ph.resize(std::size_t(D));

    for (const auto& t : g_terms) {
        { // g-component c e^{is xi} with a^dag
            const long s = t.shift;
            const long lo = std::max(0L, -s), hi = std::min(D, D - s);
            const complex c = up_base * t.coeff;
            for (long j = lo; j < hi; ++j)
                ph[std::size_t(j)] = c * part.shift_phase(tau, part.momentum_at(std::size_t(j)), s);
            for (std::size_t sl = 0; sl < view.slice_count(); ++sl)
                for (std::size_t pc = 0; pc < passive.combos; ++pc) {
                    const std::size_t base = view.firsts[sl] + passive.offset(pc);
                    for (std::size_t n = 0; n + 1 < dm; ++n) {
                        const std::size_t src_row = base + sm * n, dst_row = base + sm * (n + 1);
                        const double r = sq[n + 1];
                        for (long j = lo; j < hi; ++j)
                            dpsidt[dst_row + sp * std::size_t(j + s)] +=
                                ph[std::size_t(j)] * r * psi[src_row + sp * std::size_t(j)];
                    }
                }
        }
        { // adjoint component conj(c) e^{-is xi} with a
            const long s = -t.shift;
            const long lo = std::max(0L, -s), hi = std::min(D, D - s);
            const complex c = dn_base * std::conj(t.coeff);
            for (long j = lo; j < hi; ++j)
                ph[std::size_t(j)] = c * part.shift_phase(tau, part.momentum_at(std::size_t(j)), s);
            for (std::size_t sl = 0; sl < view.slice_count(); ++sl)
                for (std::size_t pc = 0; pc < passive.combos; ++pc) {
                    const std::size_t base = view.firsts[sl] + passive.offset(pc);
                    for (std::size_t n = 1; n < dm; ++n) {
                        const std::size_t src_row = base + sm * n, dst_row = base + sm * (n - 1);
                        const double r = sq[n];
                        for (long j = lo; j < hi; ++j)
                            dpsidt[dst_row + sp * std::size_t(j + s)] +=
                                ph[std::size_t(j)] * r * psi[src_row + sp * std::size_t(j)];
                    }
                }
        }
    }
}

// dpsidt += -i U0 (|f(xi)|^2 - const) N psi over a (mode, particle) axis pair.
inline void add_dispersive_coupling(const LossyMode& mode, const MovingParticle& part,
                                    const SliceView& view, std::size_t mode_axis,
                                    std::size_t part_axis,
                                    const std::vector<FourierTerm>& intensity_terms, double u0,
                                    double tau, std::span<const complex> psi,
                                    std::span<complex> dpsidt) {
    if (u0 == 0.0) return;
    const std::size_t dm = mode.dim();
    const long D = long(part.dim());
    const std::size_t sm = view.strides[mode_axis], sp = view.strides[part_axis];
    const PassiveAxes passive(view, {mode_axis, part_axis});
    thread_local std::vector<complex> ph;
    ph.resize(std::size_t(D));
    for (const auto& t : intensity_terms) {
        const long s = t.shift;
        const long lo = std::max(0L, -s), hi = std::min(D, D - s);
        const complex c = complex(0.0, -1.0) * u0 * t.coeff;
        for (long j = lo; j < hi; ++j)
            ph[std::size_t(j)] = c * part.shift_phase(tau, part.momentum_at(std::size_t(j)), s);
        for (std::size_t sl = 0; sl < view.slice_count(); ++sl)
            for (std::size_t pc = 0; pc < passive.combos; ++pc) {
                const std::size_t base = view.firsts[sl] + passive.offset(pc);
                for (std::size_t n = 1; n < dm; ++n) {
                    const std::size_t row = base + sm * n;
                    const double w = double(n);
                    for (long j = lo; j < hi; ++j)
                        dpsidt[row + sp * std::size_t(j + s)] +=
                            ph[std::size_t(j)] * w * psi[row + sp * std::size_t(j)];
                }
            }
    }
}

} // namespace detail

// Pumped particle crossing a cavity at right angles: the cavity mode function
// is constant along the particle's axis, leaving A (zeta(xi) a^dag + h.c.)
// plus the full detuning shift U0.
class ParticleOrthogonalToCavity : public InteractionElement {
public:
    explicit ParticleOrthogonalToCavity(double u0, bool adjust_detuning = true)
        : u0_(u0), adjust_(adjust_detuning) {}

    std::string name() const override { return "ParticleOrthogonalToCavity"; }
    std::string param_summary() const override {
        return "u0=" + detail::format_double(u0_) + " adjust_detuning=" + (adjust_ ? "1" : "0");
    }
    std::size_t arity() const override { return 2; }
    SlotSpec slot_spec(std::size_t slot) const override {
        return slot == 0 ? SlotSpec{FreeKind::Mode, false} : SlotSpec{FreeKind::Particle, true};
    }

    void validate(std::span<const FreeElement* const> bound) const override {
        detail::require_mode(bound[0], name(), 0);
        detail::require_particle(bound[1], name(), 1, /*pumped=*/true);
    }

    double u0() const { return u0_; }

    void frees_adjust(std::span<FreeElement* const> bound) const override {
        if (adjust_) static_cast<LossyMode*>(bound[0])->shift_detuning(u0_);
    }

    double highest_frequency(std::span<const FreeElement* const> bound) const override {
        const auto& part = static_cast<const PumpedMovingParticle&>(*bound[1]);
        return std::max(std::abs(u0_), std::abs(coupling_strength(u0_, part.eta_eff())));
    }

    bool has_hamiltonian() const override { return true; }
    void add_hamiltonian(double tau, const SliceView& view, std::span<const std::size_t> slot_axis,
                         std::span<const FreeElement* const> bound, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        const auto& mode = detail::as_mode(*bound[0]);
        const auto& part = static_cast<const PumpedMovingParticle&>(*bound[1]);
        detail::add_mode_particle_coupling(mode, part, view, slot_axis[0], slot_axis[1],
                                           mode_function_terms(part.pump_mode()),
                                           coupling_strength(u0_, part.eta_eff()), tau, psi, dpsidt);
    }

private:
    double u0_;
    bool adjust_;
};

// Particle moving along the cavity axis: dispersive potential
// U0 |f(xi)|^2 a^dag a plus A (f*(xi) a^dag + h.c.). eta_eff is either given
// explicitly (pump orthogonal to the cavity) or taken from a pumped particle.
class ParticleAlongCavity : public InteractionElement {
public:
    ParticleAlongCavity(double u0, ModeFunction cavity_mode,
                        std::optional<double> eta_eff = std::nullopt, bool adjust_detuning = true)
        : u0_(u0), cavity_mode_(cavity_mode), eta_eff_(eta_eff), adjust_(adjust_detuning) {
        qtraj::validate(cavity_mode_);
        if (eta_eff_ && *eta_eff_ < 0.0)
            throw ConfigError("ParticleAlongCavity: eta_eff must be non-negative");
        coupling_terms_ = conjugate_terms(mode_function_terms(cavity_mode_));
        dispersive_terms_ = intensity_split(cavity_mode_).terms;
    }

    std::string name() const override { return "ParticleAlongCavity"; }
    std::string param_summary() const override {
        std::string s = "u0=" + detail::format_double(u0_) + " cavity_mode=" + cavity_mode_.label();
        if (eta_eff_) s += " eta_eff=" + detail::format_double(*eta_eff_);
        s += std::string(" adjust_detuning=") + (adjust_ ? "1" : "0");
        return s;
    }
    std::size_t arity() const override { return 2; }
    SlotSpec slot_spec(std::size_t slot) const override {
        return slot == 0 ? SlotSpec{FreeKind::Mode, false} : SlotSpec{FreeKind::Particle, false};
    }

    void validate(std::span<const FreeElement* const> bound) const override {
        detail::require_mode(bound[0], name(), 0);
        detail::require_particle(bound[1], name(), 1);
        if (!eta_eff_ && !bound[1]->pumped())
            throw ConstructionError(
                "ParticleAlongCavity: needs an explicit eta_eff or a pumped particle to take it from");
    }

    double u0() const { return u0_; }
    const ModeFunction& cavity_mode() const { return cavity_mode_; }

    double resolve_eta_eff(std::span<const FreeElement* const> bound) const {
        if (eta_eff_) return *eta_eff_;
        return static_cast<const PumpedMovingParticle&>(*bound[1]).eta_eff();
    }

    // Plus/Minus modes shift by U0 (|f|^2 = 1); Sin/Cos by U0/2.
    void frees_adjust(std::span<FreeElement* const> bound) const override {
        if (adjust_)
            static_cast<LossyMode*>(bound[0])->shift_detuning(
                cavity_mode_.travelling() ? u0_ : 0.5 * u0_);
    }

    double highest_frequency(std::span<const FreeElement* const> bound) const override {
        return std::max(std::abs(u0_),
                        std::abs(coupling_strength(u0_, resolve_eta_eff(bound))));
    }

    bool has_hamiltonian() const override { return true; }
    void add_hamiltonian(double tau, const SliceView& view, std::span<const std::size_t> slot_axis,
                         std::span<const FreeElement* const> bound, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        const auto& mode = detail::as_mode(*bound[0]);
        const auto& part = detail::as_particle(*bound[1]);
        detail::add_dispersive_coupling(mode, part, view, slot_axis[0], slot_axis[1],
                                        dispersive_terms_, u0_, tau, psi, dpsidt);
        detail::add_mode_particle_coupling(mode, part, view, slot_axis[0], slot_axis[1],
                                           coupling_terms_,
                                           coupling_strength(u0_, resolve_eta_eff(bound)), tau, psi,
                                           dpsidt);
    }

private:
    double u0_;
    ModeFunction cavity_mode_;
    std::optional<double> eta_eff_;
    bool adjust_;
    std::vector<FourierTerm> coupling_terms_;  // f*(xi), multiplies a^dag
    std::vector<FourierTerm> dispersive_terms_;
};

// Pumped particle moving in two dimensions: coordinate 1 along the cavity,
// coordinate 2 along the pump. Wired (mode, particle, pumped particle).
class ParticleCavity2D : public InteractionElement {
public:
    ParticleCavity2D(double u0, ModeFunction cavity_mode,
                     std::optional<double> eta_eff = std::nullopt, bool adjust_detuning = true)
        : u0_(u0), cavity_mode_(cavity_mode), eta_eff_(eta_eff), adjust_(adjust_detuning) {
        qtraj::validate(cavity_mode_);
        if (eta_eff_ && *eta_eff_ < 0.0)
            throw ConfigError("ParticleCavity2D: eta_eff must be non-negative");
        fstar_terms_ = conjugate_terms(mode_function_terms(cavity_mode_));
        dispersive_terms_ = intensity_split(cavity_mode_).terms;
    }

    std::string name() const override { return "ParticleCavity2D"; }
    std::string param_summary() const override {
        std::string s = "u0=" + detail::format_double(u0_) + " cavity_mode=" + cavity_mode_.label();
        if (eta_eff_) s += " eta_eff=" + detail::format_double(*eta_eff_);
        s += std::string(" adjust_detuning=") + (adjust_ ? "1" : "0");
        return s;
    }
    std::size_t arity() const override { return 3; }
    SlotSpec slot_spec(std::size_t slot) const override {
        if (slot == 0) return {FreeKind::Mode, false};
        return {FreeKind::Particle, slot == 2};
    }

    void validate(std::span<const FreeElement* const> bound) const override {
        detail::require_mode(bound[0], name(), 0);
        detail::require_particle(bound[1], name(), 1);
        detail::require_particle(bound[2], name(), 2, /*pumped=*/true);
    }

    double u0() const { return u0_; }
    const ModeFunction& cavity_mode() const { return cavity_mode_; }

    double resolve_eta_eff(std::span<const FreeElement* const> bound) const {
        if (eta_eff_) return *eta_eff_;
        return static_cast<const PumpedMovingParticle&>(*bound[2]).eta_eff();
    }

    void frees_adjust(std::span<FreeElement* const> bound) const override {
        if (adjust_)
            static_cast<LossyMode*>(bound[0])->shift_detuning(
                cavity_mode_.travelling() ? u0_ : 0.5 * u0_);
    }

    double highest_frequency(std::span<const FreeElement* const> bound) const override {
        return std::max(std::abs(u0_),
                        std::abs(coupling_strength(u0_, resolve_eta_eff(bound))));
    }

    bool has_hamiltonian() const override { return true; }
    void add_hamiltonian(double tau, const SliceView& view, std::span<const std::size_t> slot_axis,
                         std::span<const FreeElement* const> bound, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        const auto& mode = detail::as_mode(*bound[0]);
        const auto& p1 = detail::as_particle(*bound[1]);
        const auto& p2 = static_cast<const PumpedMovingParticle&>(*bound[2]);

        detail::add_dispersive_coupling(mode, p1, view, slot_axis[0], slot_axis[1], dispersive_terms_,
                                        u0_, tau, psi, dpsidt);

        const double A = coupling_strength(u0_, resolve_eta_eff(bound));
        if (A == 0.0) return;
        const auto zeta_terms = mode_function_terms(p2.pump_mode());

        const std::size_t dm = mode.dim();
        const long D1 = long(p1.dim()), D2 = long(p2.dim());
        const std::size_t sm = view.strides[slot_axis[0]];
        const std::size_t s1 = view.strides[slot_axis[1]];
        const std::size_t s2 = view.strides[slot_axis[2]];
        const auto sq = detail::sqrt_table(dm + 1);
        const complex up_base = complex(0.0, -1.0) * A * mode.raise_factor(tau);
        const complex dn_base = complex(0.0, -1.0) * A * mode.lower_factor(tau);
        thread_local std::vector<complex> ph1, ph2;
        ph1.resize(std::size_t(D1));
        ph2.resize(std::size_t(D2));

        for (const auto& tf : fstar_terms_)
            for (const auto& tz : zeta_terms) {
                { // f* zeta a^dag
                    const long q1 = tf.shift, q2 = tz.shift;
                    const long lo1 = std::max(0L, -q1), hi1 = std::min(D1, D1 - q1);
                    const long lo2 = std::max(0L, -q2), hi2 = std::min(D2, D2 - q2);
                    const complex c = up_base * tf.coeff * tz.coeff;
                    for (long j = lo1; j < hi1; ++j)
                        ph1[std::size_t(j)] = p1.shift_phase(tau, p1.momentum_at(std::size_t(j)), q1);
                    for (long j = lo2; j < hi2; ++j)
                        ph2[std::size_t(j)] = p2.shift_phase(tau, p2.momentum_at(std::size_t(j)), q2);
                    for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
                        const std::size_t base = view.firsts[sl];
                        for (std::size_t n = 0; n + 1 < dm; ++n) {
                            const complex cn = c * sq[n + 1];
                            for (long j1 = lo1; j1 < hi1; ++j1) {
                                const complex cj = cn * ph1[std::size_t(j1)];
                                const std::size_t src = base + sm * n + s1 * std::size_t(j1);
                                const std::size_t dst =
                                    base + sm * (n + 1) + s1 * std::size_t(j1 + q1);
                                for (long j2 = lo2; j2 < hi2; ++j2)
                                    dpsidt[dst + s2 * std::size_t(j2 + q2)] +=
                                        cj * ph2[std::size_t(j2)] * psi[src + s2 * std::size_t(j2)];
                            }
                        }
                    }
                }
                { // f zeta* a
                    const long q1 = -tf.shift, q2 = -tz.shift;
                    const long lo1 = std::max(0L, -q1), hi1 = std::min(D1, D1 - q1);
                    const long lo2 = std::max(0L, -q2), hi2 = std::min(D2, D2 - q2);
                    const complex c = dn_base * std::conj(tf.coeff * tz.coeff);
                    for (long j = lo1; j < hi1; ++j)
                        ph1[std::size_t(j)] = p1.shift_phase(tau, p1.momentum_at(std::size_t(j)), q1);
                    for (long j = lo2; j < hi2; ++j)
                        ph2[std::size_t(j)] = p2.shift_phase(tau, p2.momentum_at(std::size_t(j)), q2);
                    for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
                        const std::size_t base = view.firsts[sl];
                        for (std::size_t n = 1; n < dm; ++n) {
                            const complex cn = c * sq[n];
                            for (long j1 = lo1; j1 < hi1; ++j1) {
                                const complex cj = cn * ph1[std::size_t(j1)];
                                const std::size_t src = base + sm * n + s1 * std::size_t(j1);
                                const std::size_t dst =
                                    base + sm * (n - 1) + s1 * std::size_t(j1 + q1);
                                for (long j2 = lo2; j2 < hi2; ++j2)
                                    dpsidt[dst + s2 * std::size_t(j2 + q2)] +=
                                        cj * ph2[std::size_t(j2)] * psi[src + s2 * std::size_t(j2)];
                            }
                        }
                    }
                }
            }
    }

private:
    double u0_;
    ModeFunction cavity_mode_;
    std::optional<double> eta_eff_;
    bool adjust_;
    std::vector<FourierTerm> fstar_terms_;
    std::vector<FourierTerm> dispersive_terms_;
};

// Photon exchange between two modes stimulated by a particle:
// sqrt(U01 U02) (m1*(xi1) m2(xi2) a1^dag a2 + h.c.), wired
// (mode1, dof1, mode2, dof2). The two particle slots may alias one free, in
// which case both mode functions act on that single coordinate.
class ParticleTwoModes : public InteractionElement {
public:
    ParticleTwoModes(double u01, ModeFunction mode1, double u02, ModeFunction mode2)
        : u01_(u01), u02_(u02), m1_(mode1), m2_(mode2) {
        qtraj::validate(m1_);
        qtraj::validate(m2_);
        if (u01_ * u02_ < 0.0)
            throw ConfigError("ParticleTwoModes: U01 and U02 must carry the same sign");
        coupling_ = (u01_ < 0.0 ? -1.0 : 1.0) * std::sqrt(std::abs(u01_ * u02_));
    }

    std::string name() const override { return "ParticleTwoModes"; }
    std::string param_summary() const override {
        return "u01=" + detail::format_double(u01_) + " u02=" + detail::format_double(u02_) +
               " mode1=" + m1_.label() + " mode2=" + m2_.label();
    }
    std::size_t arity() const override { return 4; }
    SlotSpec slot_spec(std::size_t slot) const override {
        return slot % 2 == 0 ? SlotSpec{FreeKind::Mode, false} : SlotSpec{FreeKind::Particle, false};
    }
    bool slots_may_alias(std::size_t a, std::size_t b) const override {
        return (a == 1 && b == 3) || (a == 3 && b == 1);
    }

    void validate(std::span<const FreeElement* const> bound) const override {
        detail::require_mode(bound[0], name(), 0);
        detail::require_particle(bound[1], name(), 1);
        detail::require_mode(bound[2], name(), 2);
        detail::require_particle(bound[3], name(), 3);
    }

    double coupling() const { return coupling_; }
    const ModeFunction& mode1() const { return m1_; }
    const ModeFunction& mode2() const { return m2_; }

    double highest_frequency(std::span<const FreeElement* const>) const override {
        return std::abs(coupling_);
    }

    bool has_hamiltonian() const override { return coupling_ != 0.0; }
    void add_hamiltonian(double tau, const SliceView& view, std::span<const std::size_t> slot_axis,
                         std::span<const FreeElement* const> bound, std::span<const complex> psi,
                         std::span<complex> dpsidt) const override {
        const auto& mode1 = detail::as_mode(*bound[0]);
        const auto& mode2 = detail::as_mode(*bound[2]);
        const complex fwd = complex(0.0, -1.0) * coupling_ * mode1.raise_factor(tau) *
                            mode2.lower_factor(tau); // a1^dag a2
        const complex bwd = complex(0.0, -1.0) * coupling_ * mode1.lower_factor(tau) *
                            mode2.raise_factor(tau); // a1 a2^dag

        if (slot_axis[1] == slot_axis[3]) {
            const auto& part = detail::as_particle(*bound[1]);
            const auto combined = product_terms(conjugate_terms(mode_function_terms(m1_)),
                                                mode_function_terms(m2_));
            exchange_one_axis(mode1, mode2, part, view, slot_axis, combined, fwd, bwd, tau, psi,
                              dpsidt);
        } else {
            exchange_two_axes(mode1, mode2, detail::as_particle(*bound[1]),
                              detail::as_particle(*bound[3]), view, slot_axis, fwd, bwd, tau, psi,
                              dpsidt);
        }
    }

private:
    void exchange_one_axis(const LossyMode& mode1, const LossyMode& mode2,
                           const MovingParticle& part, const SliceView& view,
                           std::span<const std::size_t> slot_axis,
                           const std::vector<FourierTerm>& terms, complex fwd, complex bwd,
                           double tau, std::span<const complex> psi,
                           std::span<complex> dpsidt) const {
        const std::size_t d1 = mode1.dim(), d2 = mode2.dim();
        const long D = long(part.dim());
        const std::size_t sa = view.strides[slot_axis[0]];
        const std::size_t sp = view.strides[slot_axis[1]];
        const std::size_t sb = view.strides[slot_axis[2]];
        const auto sq1 = detail::sqrt_table(d1 + 1);
        const auto sq2 = detail::sqrt_table(d2 + 1);
        thread_local std::vector<complex> ph;
        ph.resize(std::size_t(D));

        for (const auto& t : terms) {
            { // m1* m2 a1^dag a2 with combined shift t.shift
                const long s = t.shift;
                const long lo = std::max(0L, -s), hi = std::min(D, D - s);
                const complex c = fwd * t.coeff;
                for (long j = lo; j < hi; ++j)
                    ph[std::size_t(j)] = c * part.shift_phase(tau, part.momentum_at(std::size_t(j)), s);
                for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
                    const std::size_t base = view.firsts[sl];
                    for (std::size_t n1 = 0; n1 + 1 < d1; ++n1)
                        for (std::size_t n2 = 1; n2 < d2; ++n2) {
                            const double r = sq1[n1 + 1] * sq2[n2];
                            const std::size_t src = base + sa * n1 + sb * n2;
                            const std::size_t dst = base + sa * (n1 + 1) + sb * (n2 - 1);
                            for (long j = lo; j < hi; ++j)
                                dpsidt[dst + sp * std::size_t(j + s)] +=
                                    ph[std::size_t(j)] * r * psi[src + sp * std::size_t(j)];
                        }
                }
            }
            { // h.c.
                const long s = -t.shift;
                const long lo = std::max(0L, -s), hi = std::min(D, D - s);
                const complex c = bwd * std::conj(t.coeff);
                for (long j = lo; j < hi; ++j)
                    ph[std::size_t(j)] = c * part.shift_phase(tau, part.momentum_at(std::size_t(j)), s);
                for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
                    const std::size_t base = view.firsts[sl];
                    for (std::size_t n1 = 1; n1 < d1; ++n1)
                        for (std::size_t n2 = 0; n2 + 1 < d2; ++n2) {
                            const double r = sq1[n1] * sq2[n2 + 1];
                            const std::size_t src = base + sa * n1 + sb * n2;
                            const std::size_t dst = base + sa * (n1 - 1) + sb * (n2 + 1);
                            for (long j = lo; j < hi; ++j)
                                dpsidt[dst + sp * std::size_t(j + s)] +=
                                    ph[std::size_t(j)] * r * psi[src + sp * std::size_t(j)];
                        }
                }
            }
        }
    }

    void exchange_two_axes(const LossyMode& mode1, const LossyMode& mode2,
                           const MovingParticle& p1, const MovingParticle& p2,
                           const SliceView& view, std::span<const std::size_t> slot_axis,
                           complex fwd, complex bwd, double tau, std::span<const complex> psi,
                           std::span<complex> dpsidt) const {
        const std::size_t d1 = mode1.dim(), d2 = mode2.dim();
        const long D1 = long(p1.dim()), D2 = long(p2.dim());
        const std::size_t sa = view.strides[slot_axis[0]];
        const std::size_t sp1 = view.strides[slot_axis[1]];
        const std::size_t sb = view.strides[slot_axis[2]];
        const std::size_t sp2 = view.strides[slot_axis[3]];
        const auto sq1 = detail::sqrt_table(d1 + 1);
        const auto sq2 = detail::sqrt_table(d2 + 1);
        const auto t1 = conjugate_terms(mode_function_terms(m1_));
        const auto t2 = mode_function_terms(m2_);
        thread_local std::vector<complex> ph1, ph2;
        ph1.resize(std::size_t(D1));
        ph2.resize(std::size_t(D2));

        for (const auto& ta : t1)
            for (const auto& tb : t2) {
                { // m1* m2 a1^dag a2
                    const long q1 = ta.shift, q2 = tb.shift;
                    const long lo1 = std::max(0L, -q1), hi1 = std::min(D1, D1 - q1);
                    const long lo2 = std::max(0L, -q2), hi2 = std::min(D2, D2 - q2);
                    const complex c = fwd * ta.coeff * tb.coeff;
                    for (long j = lo1; j < hi1; ++j)
                        ph1[std::size_t(j)] = p1.shift_phase(tau, p1.momentum_at(std::size_t(j)), q1);
                    for (long j = lo2; j < hi2; ++j)
                        ph2[std::size_t(j)] = p2.shift_phase(tau, p2.momentum_at(std::size_t(j)), q2);
                    for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
                        const std::size_t base = view.firsts[sl];
                        for (std::size_t n1 = 0; n1 + 1 < d1; ++n1)
                            for (std::size_t n2 = 1; n2 < d2; ++n2) {
                                const complex cn = c * sq1[n1 + 1] * sq2[n2];
                                const std::size_t src0 = base + sa * n1 + sb * n2;
                                const std::size_t dst0 = base + sa * (n1 + 1) + sb * (n2 - 1);
                                for (long j1 = lo1; j1 < hi1; ++j1) {
                                    const complex cj = cn * ph1[std::size_t(j1)];
                                    for (long j2 = lo2; j2 < hi2; ++j2)
                                        dpsidt[dst0 + sp1 * std::size_t(j1 + q1) +
                                               sp2 * std::size_t(j2 + q2)] +=
                                            cj * ph2[std::size_t(j2)] *
                                            psi[src0 + sp1 * std::size_t(j1) + sp2 * std::size_t(j2)];
                                }
                            }
                    }
                }
                { // h.c.
                    const long q1 = -ta.shift, q2 = -tb.shift;
                    const long lo1 = std::max(0L, -q1), hi1 = std::min(D1, D1 - q1);
                    const long lo2 = std::max(0L, -q2), hi2 = std::min(D2, D2 - q2);
                    const complex c = bwd * std::conj(ta.coeff * tb.coeff);
                    for (long j = lo1; j < hi1; ++j)
                        ph1[std::size_t(j)] = p1.shift_phase(tau, p1.momentum_at(std::size_t(j)), q1);
                    for (long j = lo2; j < hi2; ++j)
                        ph2[std::size_t(j)] = p2.shift_phase(tau, p2.momentum_at(std::size_t(j)), q2);
                    for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
                        const std::size_t base = view.firsts[sl];
                        for (std::size_t n1 = 1; n1 < d1; ++n1)
                            for (std::size_t n2 = 0; n2 + 1 < d2; ++n2) {
                                const complex cn = c * sq1[n1] * sq2[n2 + 1];
                                const std::size_t src0 = base + sa * n1 + sb * n2;
                                const std::size_t dst0 = base + sa * (n1 - 1) + sb * (n2 + 1);
                                for (long j1 = lo1; j1 < hi1; ++j1) {
                                    const complex cj = cn * ph1[std::size_t(j1)];
                                    for (long j2 = lo2; j2 < hi2; ++j2)
                                        dpsidt[dst0 + sp1 * std::size_t(j1 + q1) +
                                               sp2 * std::size_t(j2 + q2)] +=
                                            cj * ph2[std::size_t(j2)] *
                                            psi[src0 + sp1 * std::size_t(j1) + sp2 * std::size_t(j2)];
                                }
                            }
                    }
                }
            }
    }

    double u01_, u02_;
    ModeFunction m1_, m2_;
    double coupling_;
};

// Occupation-number bookkeeping for two indistinguishable particles sharing
// one element object. Display-only: reports <n1 n2> (particles left/right of
// x = 0) and, when two orthonormal single-particle states are supplied, the
// two-particle occupation amplitudes <2,0|Psi>, <1,1|Psi>, <0,2|Psi>.
// Switches the wired particles' own display off.
class IdenticalParticles : public InteractionElement {
public:
    IdenticalParticles() = default;

    IdenticalParticles(StateVector phi1, StateVector phi2)
        : phi1_(std::move(phi1)), phi2_(std::move(phi2)) {
        phi1_->normalize();
        phi2_->normalize();
        if (phi1_->dims().size() != 1 || phi2_->dims().size() != 1 ||
            phi1_->dims() != phi2_->dims())
            throw ConfigError("IdenticalParticles: basis states must be single-factor and congruent");
        if (std::abs(inner(*phi1_, *phi2_)) > 1e-8)
            throw ConfigError("IdenticalParticles: basis states must be pairwise orthogonal");
    }

    std::string name() const override { return "IdenticalParticles"; }
    std::string param_summary() const override {
        return phi1_ ? "n_particles=2 basis=supplied" : "n_particles=2";
    }
    std::size_t arity() const override { return 2; }
    SlotSpec slot_spec(std::size_t) const override { return {FreeKind::Particle, false}; }

    void validate(std::span<const FreeElement* const> bound) const override {
        detail::require_particle(bound[0], name(), 0);
        if (bound[0] != bound[1])
            throw ConstructionError(
                "IdenticalParticles: both slots must reference one shared particle element");
        if (phi1_ && phi1_->size() != bound[0]->dim())
            throw ConfigError("IdenticalParticles: basis state dimension does not match the particle");
    }

    bool suppresses_wired_display() const override { return true; }

    double highest_frequency(std::span<const FreeElement* const>) const override { return 0.0; }

    std::vector<std::string> display_labels() const override {
        std::vector<std::string> l{"<n1n2>"};
        if (phi1_) {
            l.insert(l.end(), {"re<2,0|Psi>", "im<2,0|Psi>", "re<1,1|Psi>", "im<1,1|Psi>",
                               "re<0,2|Psi>", "im<0,2|Psi>"});
        }
        return l;
    }

    void display(const SliceView& view, std::span<const std::size_t> slot_axis,
                 std::span<const FreeElement* const> bound, const StateVector& psi,
                 std::vector<double>& out) const override {
        const std::size_t D = bound[0]->dim();
        const std::size_t ax1 = view.subsystems[slot_axis[0]];
        const std::size_t ax2 = view.subsystems[slot_axis[1]];
        const std::size_t st1 = view.strides[slot_axis[0]];
        const std::size_t st2 = view.strides[slot_axis[1]];

        // <n1 n2> with n1 counting particles at x < 0 and n2 at x >= 0;
        // only the cross terms survive since the half-box projectors are disjoint.
        const StateVector px = position_copy(position_copy(psi, ax1), ax2);
        double n1n2 = 0.0;
        for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
            const std::size_t base = view.firsts[sl];
            for (std::size_t j1 = 0; j1 < D; ++j1) {
                const bool left1 = position_of(j1, D) < 0.0;
                for (std::size_t j2 = 0; j2 < D; ++j2) {
                    const bool left2 = position_of(j2, D) < 0.0;
                    if (left1 != left2) n1n2 += std::norm(px[base + st1 * j1 + st2 * j2]);
                }
            }
        }
        out.push_back(n1n2);

        if (!phi1_) return;

        const StateVector& f1 = *phi1_;
        const StateVector& f2 = *phi2_;
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        const bool scalar = psi.dims().size() == 2; // no further subsystems
        complex amp[3] = {};
        double prob[3] = {};
        for (std::size_t sl = 0; sl < view.slice_count(); ++sl) {
            const std::size_t base = view.firsts[sl];
            complex c20{}, c11{}, c02{};
            for (std::size_t j1 = 0; j1 < D; ++j1)
                for (std::size_t j2 = 0; j2 < D; ++j2) {
                    const complex v = psi[base + st1 * j1 + st2 * j2];
                    c20 += std::conj(f1[j1] * f1[j2]) * v;
                    c11 += std::conj(f1[j1] * f2[j2] + f2[j1] * f1[j2]) * inv_sqrt2 * v;
                    c02 += std::conj(f2[j1] * f2[j2]) * v;
                }
            amp[0] += c20;
            amp[1] += c11;
            amp[2] += c02;
            prob[0] += std::norm(c20);
            prob[1] += std::norm(c11);
            prob[2] += std::norm(c02);
        }
        for (int m = 0; m < 3; ++m) {
            if (scalar) {
                out.push_back(amp[m].real());
                out.push_back(amp[m].imag());
            } else {
                // embedded in a larger composite the amplitude is a vector over
                // the remaining factors; report its modulus
                out.push_back(std::sqrt(prob[m]));
                out.push_back(0.0);
            }
        }
    }

private:
    std::optional<StateVector> phi1_, phi2_;
};

} // namespace qtraj
