// oracle.hpp — dense master-equation integrator for small composites, used as
// ground truth for ensemble averages and for dense-matrix equivalence checks.
//
// The oracle works in the plain (non-interaction) picture: the diagonal free
// generators enter the Hamiltonian explicitly and every operator is assembled
// by kronecker products of per-element matrices, independently of the strided
// view machinery of the engine.
#pragma once

#include "qtraj/elements.hpp"
#include "qtraj/integrate.hpp"
#include "qtraj/statevec.hpp"
#include "qtraj/system.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qtraj::oracle {

inline constexpr std::size_t kDenseDimCap = 256;

struct Matrix {
    std::size_t n = 0; // square
    std::vector<complex> a;

    Matrix() = default;
    explicit Matrix(std::size_t dim) : n(dim), a(dim * dim) {}

    complex& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    const complex& operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static Matrix identity(std::size_t dim) {
        Matrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix& operator+=(const Matrix& o) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }

    Matrix& operator*=(complex s) {
        for (auto& v : a) v *= s;
        return *this;
    }
};

inline Matrix operator*(complex s, Matrix m) {
    m *= s;
    return m;
}

inline Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix out(A.n * B.n);
    for (std::size_t i = 0; i < A.n; ++i)
        for (std::size_t k = 0; k < A.n; ++k) {
            const complex aik = A(i, k);
            if (aik == complex{}) continue;
            for (std::size_t j = 0; j < B.n; ++j)
                for (std::size_t l = 0; l < B.n; ++l)
                    out(i * B.n + j, k * B.n + l) = aik * B(j, l);
        }
    return out;
}

inline Matrix multiply(const Matrix& A, const Matrix& B) {
    Matrix out(A.n);
    for (std::size_t i = 0; i < A.n; ++i)
        for (std::size_t k = 0; k < A.n; ++k) {
            const complex aik = A(i, k);
            if (aik == complex{}) continue;
            for (std::size_t j = 0; j < A.n; ++j) out(i, j) += aik * B(k, j);
        }
    return out;
}

inline Matrix dagger(const Matrix& A) {
    Matrix out(A.n);
    for (std::size_t i = 0; i < A.n; ++i)
        for (std::size_t j = 0; j < A.n; ++j) out(j, i) = std::conj(A(i, j));
    return out;
}

inline void matvec(const Matrix& A, std::span<const complex> x, std::span<complex> y) {
    for (std::size_t i = 0; i < A.n; ++i) {
        complex acc{};
        const complex* row = A.a.data() + i * A.n;
        for (std::size_t j = 0; j < A.n; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

// tr(rho M)
inline complex trace_product(const Matrix& rho, const Matrix& M) {
    complex acc{};
    for (std::size_t i = 0; i < rho.n; ++i)
        for (std::size_t j = 0; j < rho.n; ++j) acc += rho(i, j) * M(j, i);
    return acc;
}

// ---------------------------------------------------------------------------
// Per-element matrices (Fock / signed-momentum basis, truncated shifts)
// ---------------------------------------------------------------------------

inline Matrix mode_lower(std::size_t d) {
    Matrix m(d);
    for (std::size_t k = 1; k < d; ++k) m(k - 1, k) = std::sqrt(double(k));
    return m;
}

inline Matrix mode_number(std::size_t d) {
    Matrix m(d);
    for (std::size_t k = 0; k < d; ++k) m(k, k) = double(k);
    return m;
}

// Truncated momentum shift e^{is xi}: components leaving the grid are dropped,
// matching the engine's cutoff semantics (no wraparound).
inline Matrix particle_shift(std::size_t D, long s) {
    Matrix m(D);
    for (long j = std::max(0L, -s); j < std::min<long>(long(D), long(D) - s); ++j)
        m(std::size_t(j + s), std::size_t(j)) = 1.0;
    return m;
}

inline Matrix particle_momentum_diag(std::size_t D, int power) {
    Matrix m(D);
    for (std::size_t j = 0; j < D; ++j)
        m(j, j) = std::pow(double(momentum_of(j, D)), double(power));
    return m;
}

inline Matrix position_operator_sum(std::size_t D, std::span<const FourierTerm> terms) {
    Matrix m(D);
    for (const auto& t : terms) {
        const Matrix s = particle_shift(D, t.shift);
        for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] += t.coeff * s.a[i];
    }
    return m;
}

// Unitary momentum->position map F[j,m] = e^{i k_m x_j} / sqrt(D); the dense
// route to position observables, X = F^dag diag(x) F.
inline Matrix momentum_to_position_matrix(std::size_t D) {
    Matrix f(D);
    for (std::size_t j = 0; j < D; ++j)
        for (std::size_t m = 0; m < D; ++m)
            f(j, m) = std::polar(1.0 / std::sqrt(double(D)),
                                 double(momentum_of(m, D)) * position_of(j, D));
    return f;
}

inline Matrix position_moment_matrix(std::size_t D, int power) {
    const Matrix f = momentum_to_position_matrix(D);
    Matrix xd(D);
    for (std::size_t j = 0; j < D; ++j) xd(j, j) = std::pow(position_of(j, D), double(power));
    return multiply(dagger(f), multiply(xd, f));
}

// Embeds per-position factors into the composite's full space; positions
// without a factor get the identity. kron order follows the flat layout
// (last factor fastest).
inline Matrix embed_factors(std::span<const std::size_t> dims,
                            const std::map<std::size_t, Matrix>& factors) {
    Matrix out = Matrix::identity(1);
    for (std::size_t p = 0; p < dims.size(); ++p) {
        auto it = factors.find(p);
        out = it != factors.end() ? kron(out, it->second) : kron(out, Matrix::identity(dims[p]));
    }
    return out;
}

inline Matrix embed_one(std::span<const std::size_t> dims, std::size_t position, Matrix factor) {
    std::map<std::size_t, Matrix> f;
    f.emplace(position, std::move(factor));
    return embed_factors(dims, f);
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

struct DenseSystem {
    std::size_t dim = 0;
    Matrix hamiltonian;        // Hermitian part
    std::vector<Matrix> jumps; // sqrt(2 kappa) a per lossy mode position
};

inline DenseSystem assemble_dense(const Composite& sys) {
    if (sys.total_dim() > kDenseDimCap)
        throw ConfigError("oracle: total dimension " + std::to_string(sys.total_dim()) +
                          " exceeds the dense cap of " + std::to_string(kDenseDimCap));

    const std::span<const std::size_t> dims = sys.dims();
    DenseSystem out;
    out.dim = sys.total_dim();
    out.hamiltonian = Matrix(out.dim);

    for (std::size_t p = 0; p < sys.free_count(); ++p) {
        const FreeElement& f = sys.free_at(p);
        if (const auto* mode = dynamic_cast<const LossyMode*>(&f)) {
            const std::size_t d = mode->cutoff();
            Matrix h = complex(-mode->delta_c(), 0.0) * mode_number(d);
            if (const auto* pumped = dynamic_cast<const PumpedLossyMode*>(&f)) {
                const Matrix a = mode_lower(d);
                const Matrix adag = dagger(a);
                const complex ip{0.0, 1.0};
                for (std::size_t i = 0; i < h.a.size(); ++i)
                    h.a[i] += ip * (pumped->eta() * adag.a[i] - std::conj(pumped->eta()) * a.a[i]);
            }
            out.hamiltonian += embed_one(dims, p, std::move(h));
            if (mode->kappa() > 0.0)
                out.jumps.push_back(embed_one(
                    dims, p, complex(std::sqrt(2.0 * mode->kappa()), 0.0) * mode_lower(d)));
        } else if (const auto* part = dynamic_cast<const MovingParticle*>(&f)) {
            const std::size_t D = part->resolution();
            Matrix h = complex(part->omega_rec(), 0.0) * particle_momentum_diag(D, 2);
            if (const auto* pumped = dynamic_cast<const PumpedMovingParticle*>(&f)) {
                const auto terms = intensity_split(pumped->pump_mode()).terms;
                const Matrix v = position_operator_sum(D, terms);
                for (std::size_t i = 0; i < h.a.size(); ++i) h.a[i] += pumped->eta_eff() * v.a[i];
            }
            out.hamiltonian += embed_one(dims, p, std::move(h));
        } else {
            throw ConfigError("oracle: unsupported free element " + f.name());
        }
    }

    for (std::size_t w = 0; w < sys.wiring_count(); ++w) {
        const InteractionElement& ia = sys.interaction_at(w);
        const auto& subs = sys.wiring_subsystems(w);
        std::vector<const FreeElement*> bound;
        for (std::size_t s : subs) bound.push_back(&sys.free_at(s));
        const std::span<const FreeElement* const> bspan{bound.data(), bound.size()};

        auto add_coupling = [&](std::size_t mode_pos, std::size_t part_pos,
                                const std::vector<FourierTerm>& g_terms, double A) {
            if (A == 0.0) return;
            const std::size_t dm = sys.free_at(mode_pos).dim();
            const std::size_t D = sys.free_at(part_pos).dim();
            std::map<std::size_t, Matrix> f;
            f.emplace(mode_pos, dagger(mode_lower(dm)));
            f.emplace(part_pos, position_operator_sum(D, g_terms));
            Matrix term = embed_factors(dims, f);
            const Matrix herm = dagger(term);
            for (std::size_t i = 0; i < term.a.size(); ++i)
                out.hamiltonian.a[i] += A * (term.a[i] + herm.a[i]);
        };

        auto add_dispersive = [&](std::size_t mode_pos, std::size_t part_pos,
                                  const std::vector<FourierTerm>& terms, double u0) {
            if (u0 == 0.0 || terms.empty()) return;
            const std::size_t dm = sys.free_at(mode_pos).dim();
            const std::size_t D = sys.free_at(part_pos).dim();
            std::map<std::size_t, Matrix> f;
            f.emplace(mode_pos, mode_number(dm));
            f.emplace(part_pos, position_operator_sum(D, terms));
            Matrix term = embed_factors(dims, f);
            for (std::size_t i = 0; i < term.a.size(); ++i)
                out.hamiltonian.a[i] += u0 * term.a[i];
        };

        if (const auto* poc = dynamic_cast<const ParticleOrthogonalToCavity*>(&ia)) {
            const auto& part = static_cast<const PumpedMovingParticle&>(*bound[1]);
            add_coupling(subs[0], subs[1], mode_function_terms(part.pump_mode()),
                         coupling_strength(poc->u0(), part.eta_eff()));
        } else if (const auto* pac = dynamic_cast<const ParticleAlongCavity*>(&ia)) {
            add_dispersive(subs[0], subs[1], intensity_split(pac->cavity_mode()).terms, pac->u0());
            add_coupling(subs[0], subs[1], conjugate_terms(mode_function_terms(pac->cavity_mode())),
                         coupling_strength(pac->u0(), pac->resolve_eta_eff(bspan)));
        } else if (const auto* pc2 = dynamic_cast<const ParticleCavity2D*>(&ia)) {
            add_dispersive(subs[0], subs[1], intensity_split(pc2->cavity_mode()).terms, pc2->u0());
            const double A = coupling_strength(pc2->u0(), pc2->resolve_eta_eff(bspan));
            if (A != 0.0) {
                const auto& p2 = static_cast<const PumpedMovingParticle&>(*bound[2]);
                std::map<std::size_t, Matrix> f;
                f.emplace(subs[0], dagger(mode_lower(sys.free_at(subs[0]).dim())));
                f.emplace(subs[1],
                          position_operator_sum(sys.free_at(subs[1]).dim(),
                                                conjugate_terms(mode_function_terms(pc2->cavity_mode()))));
                f.emplace(subs[2], position_operator_sum(sys.free_at(subs[2]).dim(),
                                                         mode_function_terms(p2.pump_mode())));
                Matrix term = embed_factors(dims, f);
                const Matrix herm = dagger(term);
                for (std::size_t i = 0; i < term.a.size(); ++i)
                    out.hamiltonian.a[i] += A * (term.a[i] + herm.a[i]);
            }
        } else if (const auto* ptm = dynamic_cast<const ParticleTwoModes*>(&ia)) {
            if (ptm->coupling() != 0.0) {
                std::map<std::size_t, Matrix> f;
                f.emplace(subs[0], dagger(mode_lower(sys.free_at(subs[0]).dim())));
                f.emplace(subs[2], mode_lower(sys.free_at(subs[2]).dim()));
                if (subs[1] == subs[3]) {
                    const auto combined = product_terms(conjugate_terms(mode_function_terms(ptm->mode1())),
                                                        mode_function_terms(ptm->mode2()));
                    f.emplace(subs[1], position_operator_sum(sys.free_at(subs[1]).dim(), combined));
                } else {
                    f.emplace(subs[1],
                              position_operator_sum(sys.free_at(subs[1]).dim(),
                                                    conjugate_terms(mode_function_terms(ptm->mode1()))));
                    f.emplace(subs[3], position_operator_sum(sys.free_at(subs[3]).dim(),
                                                             mode_function_terms(ptm->mode2())));
                }
                Matrix term = embed_factors(dims, f);
                const Matrix herm = dagger(term);
                for (std::size_t i = 0; i < term.a.size(); ++i)
                    out.hamiltonian.a[i] += ptm->coupling() * (term.a[i] + herm.a[i]);
            }
        } else if (dynamic_cast<const IdenticalParticles*>(&ia)) {
            // display-only
        } else {
            throw ConfigError("oracle: unsupported interaction " + ia.name());
        }
    }

    return out;
}

// ---------------------------------------------------------------------------
// Master equation
// ---------------------------------------------------------------------------

// drho/dt = i[rho, H] + sum_m (J rho J^dag - 1/2 {J^dag J, rho})
inline void liouvillian_rhs(const Matrix& rho, const Matrix& H, std::span<const Matrix> jumps,
                            std::span<const Matrix> jdagj, Matrix& drho) {
    const std::size_t n = rho.n;
    drho = Matrix(n);
    const Matrix rh = multiply(rho, H);
    const Matrix hr = multiply(H, rho);
    const complex ii{0.0, 1.0};
    for (std::size_t i = 0; i < drho.a.size(); ++i) drho.a[i] = ii * (rh.a[i] - hr.a[i]);
    for (std::size_t m = 0; m < jumps.size(); ++m) {
        const Matrix jr = multiply(jumps[m], rho);
        const Matrix jrj = multiply(jr, dagger(jumps[m]));
        const Matrix kr = multiply(jdagj[m], rho);
        const Matrix rk = multiply(rho, jdagj[m]);
        for (std::size_t i = 0; i < drho.a.size(); ++i)
            drho.a[i] += jrj.a[i] - 0.5 * (kr.a[i] + rk.a[i]);
    }
}

inline Matrix liouvillian_rhs(const Matrix& rho, const Matrix& H, std::span<const Matrix> jumps) {
    std::vector<Matrix> jdagj;
    for (const auto& j : jumps) jdagj.push_back(multiply(dagger(j), j));
    Matrix drho;
    liouvillian_rhs(rho, H, jumps, jdagj, drho);
    return drho;
}

struct MasterSeries {
    std::vector<double> times;
    std::vector<std::string> labels;             // subset of the engine's display labels
    std::vector<std::vector<double>> rows;       // one per time
};

inline Matrix pure_density(const StateVector& psi) {
    Matrix rho(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i)
        for (std::size_t j = 0; j < psi.size(); ++j) rho(i, j) = psi[i] * std::conj(psi[j]);
    return rho;
}

inline double trace_real(const Matrix& rho) {
    double t = 0.0;
    for (std::size_t i = 0; i < rho.n; ++i) t += rho(i, i).real();
    return t;
}

inline double hermiticity_defect(const Matrix& rho) {
    double d = 0.0;
    for (std::size_t i = 0; i < rho.n; ++i)
        for (std::size_t j = i; j < rho.n; ++j)
            d = std::max(d, std::abs(rho(i, j) - std::conj(rho(j, i))));
    return d;
}

inline double purity(const Matrix& rho) { return trace_real(multiply(rho, rho)); }

// Integrates the master equation for the composite and emits the free
// elements' average groups (modes and particles, unsuppressed positions, in
// free order) at exactly the requested times.
inline MasterSeries integrate_master(const Composite& sys, const StateVector& psi0, double eps,
                                     std::span<const double> times) {
    const DenseSystem ds = assemble_dense(sys);
    std::vector<Matrix> jdagj;
    for (const auto& j : ds.jumps) jdagj.push_back(multiply(dagger(j), j));

    // observables mirroring the engine's display layout
    struct Group {
        enum class Kind { Mode, Particle } kind;
        Matrix m1, m2, m3, m4; // mode: N, N^2, a; particle: k, k^2, x, x^2
    };
    std::vector<Group> groups;
    MasterSeries out;
    const std::span<const std::size_t> dims = sys.dims();
    for (std::size_t p = 0; p < sys.free_count(); ++p) {
        if (sys.free_display_suppressed(p)) continue;
        const FreeElement& f = sys.free_at(p);
        const std::string prefix = "free" + std::to_string(p) + " ";
        if (f.kind() == FreeKind::Mode) {
            const Matrix n = mode_number(f.dim());
            groups.push_back({Group::Kind::Mode, embed_one(dims, p, n),
                              embed_one(dims, p, multiply(n, n)), embed_one(dims, p, mode_lower(f.dim())),
                              Matrix()});
            for (const char* l : {"<N>", "varN", "re<a>", "im<a>"}) out.labels.push_back(prefix + l);
        } else {
            groups.push_back({Group::Kind::Particle, embed_one(dims, p, particle_momentum_diag(f.dim(), 1)),
                              embed_one(dims, p, particle_momentum_diag(f.dim(), 2)),
                              embed_one(dims, p, position_moment_matrix(f.dim(), 1)),
                              embed_one(dims, p, position_moment_matrix(f.dim(), 2))});
            for (const char* l : {"<k>", "vark", "<x>", "dx"}) out.labels.push_back(prefix + l);
        }
    }

    Matrix rho = pure_density(psi0);
    std::vector<complex> y(rho.a);
    OdeStepper stepper(eps, 0.1 / sys.highest_frequency());

    Matrix scratch_rho(ds.dim), scratch_drho(ds.dim);
    auto rhs = [&](double, std::span<const complex> yv, std::span<complex> dy) {
        std::copy(yv.begin(), yv.end(), scratch_rho.a.begin());
        liouvillian_rhs(scratch_rho, ds.hamiltonian, ds.jumps, jdagj, scratch_drho);
        std::copy(scratch_drho.a.begin(), scratch_drho.a.end(), dy.begin());
    };

    auto emit = [&](double t) {
        std::copy(y.begin(), y.end(), rho.a.begin());
        std::vector<double> row;
        for (const auto& g : groups) {
            if (g.kind == Group::Kind::Mode) {
                const double n1 = trace_product(rho, g.m1).real();
                const double nn = trace_product(rho, g.m2).real();
                const complex a = trace_product(rho, g.m3);
                row.push_back(n1);
                row.push_back(nn - n1 * n1);
                row.push_back(a.real());
                row.push_back(a.imag());
            } else {
                const double k1 = trace_product(rho, g.m1).real();
                const double k2 = trace_product(rho, g.m2).real();
                const double x1 = trace_product(rho, g.m3).real();
                const double x2 = trace_product(rho, g.m4).real();
                row.push_back(k1);
                row.push_back(k2 - k1 * k1);
                row.push_back(x1);
                row.push_back(std::sqrt(std::max(0.0, x2 - x1 * x1)));
            }
        }
        out.times.push_back(t);
        out.rows.push_back(std::move(row));
    };

    double t = 0.0;
    for (double target : times) {
        if (target < t - 1e-12)
            throw ConfigError("integrate_master: output times must be non-decreasing");
        while (t < target - 1e-12 * std::max(1.0, target)) {
            stepper.set_dttry(std::min(stepper.dttry(), target - t));
            stepper.step(rhs, y, t);
        }
        emit(t);
    }
    return out;
}

} // namespace qtraj::oracle
