// statevec.hpp — tensor-product state vectors, flat indexing, strided views,
// state factories, and the out-of-place momentum<->position transform.
//
// Layout convention: row-major with the LAST factor varying fastest, so for
// dims (d0,...,dN) the flat index of (i0,...,iN) is sum_n i_n * prod_{m>n} d_m.
// Momentum grids of size D hold amplitudes in signed order k = -D/2 ... D/2-1,
// on a box of length 2*pi (Delta k = 1).
#pragma once

#include "qtraj/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace qtraj {

using complex = std::complex<double>;

inline std::size_t product(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::size_t flat_index(std::span<const std::size_t> dims, std::span<const std::size_t> idx) {
    if (dims.empty() || idx.size() != dims.size())
        throw std::out_of_range("flat_index: idx arity does not match dims");
    std::size_t flat = 0;
    for (std::size_t n = 0; n < dims.size(); ++n) {
        if (idx[n] >= dims[n])
            throw std::out_of_range("flat_index: component " + std::to_string(n) + " out of range");
        flat = flat * dims[n] + idx[n];
    }
    return flat;
}

// One strided run through the flat array: indices first + stride*i, i < extent.
struct Slice {
    std::size_t first = 0;
    std::size_t stride = 1;
    std::size_t extent = 0;
};

// All slices an element needs to act on its own factor(s): one entry of
// `firsts` per combination of the remaining ("dummy") quantum numbers, one
// stride per spanned subsystem. Iterating every slice of a single-subsystem
// view visits each flat index exactly once.
struct SliceView {
    std::vector<std::size_t> subsystems; // spanned subsystem indices, declared order
    std::vector<std::size_t> sub_dims;   // their dimensions
    std::vector<std::size_t> strides;    // one per spanned subsystem
    std::vector<std::size_t> firsts;     // one per dummy combination

    std::size_t slice_count() const { return firsts.size(); }

    // Single-subsystem convenience accessor.
    Slice slice(std::size_t i) const { return Slice{firsts[i], strides[0], sub_dims[0]}; }
};

inline SliceView make_view(std::span<const std::size_t> dims, std::span<const std::size_t> subsystems) {
    if (dims.empty())
        throw ConstructionError("make_view: empty dimension list");
    if (subsystems.empty())
        throw ConstructionError("make_view: view must span at least one subsystem");

    SliceView view;
    view.subsystems.assign(subsystems.begin(), subsystems.end());
    std::vector<bool> spanned(dims.size(), false);
    for (std::size_t s : subsystems) {
        if (s >= dims.size())
            throw ConstructionError("make_view: subsystem index " + std::to_string(s) + " out of range");
        if (spanned[s])
            throw ConstructionError("make_view: subsystem index " + std::to_string(s) + " repeated");
        spanned[s] = true;
    }

    for (std::size_t s : subsystems) {
        view.sub_dims.push_back(dims[s]);
        std::size_t stride = 1;
        for (std::size_t m = s + 1; m < dims.size(); ++m) stride *= dims[m];
        view.strides.push_back(stride);
    }

    // Enumerate the dummy multi-index box in row-major order (last dummy fastest).
    std::vector<std::size_t> dummy_axes;
    for (std::size_t n = 0; n < dims.size(); ++n)
        if (!spanned[n]) dummy_axes.push_back(n);

    std::vector<std::size_t> idx(dims.size(), 0);
    const std::size_t n_dummy_combos = [&] {
        std::size_t p = 1;
        for (std::size_t a : dummy_axes) p *= dims[a];
        return p;
    }();
    view.firsts.reserve(n_dummy_combos);
    for (std::size_t combo = 0;; ++combo) {
        view.firsts.push_back(flat_index(dims, idx));
        // odometer over the dummy axes
        std::size_t a = dummy_axes.size();
        while (a > 0) {
            --a;
            if (++idx[dummy_axes[a]] < dims[dummy_axes[a]]) break;
            idx[dummy_axes[a]] = 0;
            if (a == 0) return view;
        }
        if (dummy_axes.empty()) return view;
    }
}

class StateVector {
public:
    StateVector() = default;

    explicit StateVector(std::vector<std::size_t> dims)
        : dims_(std::move(dims)), amps_(product(dims_)) {
        if (dims_.empty()) throw ConfigError("StateVector: empty dimension list");
    }

    StateVector(std::vector<std::size_t> dims, std::vector<complex> amps)
        : dims_(std::move(dims)), amps_(std::move(amps)) {
        if (dims_.empty()) throw ConfigError("StateVector: empty dimension list");
        if (amps_.size() != product(dims_))
            throw ConfigError("StateVector: amplitude count does not match dimensions");
    }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t size() const { return amps_.size(); }

    std::vector<complex>& amps() { return amps_; }
    const std::vector<complex>& amps() const { return amps_; }

    complex& operator[](std::size_t i) { return amps_[i]; }
    const complex& operator[](std::size_t i) const { return amps_[i]; }

    complex& at(std::span<const std::size_t> idx) { return amps_[flat_index(dims_, idx)]; }
    const complex& at(std::span<const std::size_t> idx) const { return amps_[flat_index(dims_, idx)]; }

    void normalize();

private:
    std::vector<std::size_t> dims_;
    std::vector<complex> amps_;
};

inline complex inner(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("inner: vector lengths differ");
    complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

inline double norm(const StateVector& a) {
    double acc = 0.0;
    for (const complex& c : a.amps()) acc += std::norm(c);
    return std::sqrt(acc);
}

inline void StateVector::normalize() {
    const double n = qtraj::norm(*this);
    if (n < 1e-14)
        throw DegenerateStateError("normalize: state vector has (numerically) zero norm");
    for (complex& c : amps_) c /= n;
}

inline StateVector normalized(StateVector v) {
    v.normalize();
    return v;
}

inline StateVector direct_product(const StateVector& a, const StateVector& b) {
    std::vector<std::size_t> dims = a.dims();
    dims.insert(dims.end(), b.dims().begin(), b.dims().end());
    StateVector out(std::move(dims));
    const std::size_t nb = b.size();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < nb; ++j)
            out[i * nb + j] = a[i] * b[j];
    return out;
}

inline bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

// Grid conventions for a momentum factor of size D.
inline long momentum_of(std::size_t array_index, std::size_t D) {
    return static_cast<long>(array_index) - static_cast<long>(D / 2);
}
inline double position_of(std::size_t array_index, std::size_t D) {
    return -std::numbers::pi + 2.0 * std::numbers::pi * double(array_index) / double(D);
}

namespace detail {

// Unnormalized radix-2 transform, exponent sign given by `sign`.
inline void fft_pow2(std::span<complex> a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = double(sign) * 2.0 * std::numbers::pi / double(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const complex w = std::polar(1.0, ang * double(k));
                const complex u = a[i + k];
                const complex v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

// Unitary transform between signed-order momentum amplitudes and the position
// grid x_j = -pi + 2*pi*j/D. Writing k = m - D/2 one finds
//   psi_x[j] = (-1)^(D/2) (-1)^j (1/sqrt(D)) sum_m (c[m] (-1)^m) e^{+2*pi*i*m*j/D},
// so the reorder to transform-natural order reduces to sign flips.
inline void momentum_to_position(std::span<complex> buf) {
    const std::size_t D = buf.size();
    for (std::size_t m = 1; m < D; m += 2) buf[m] = -buf[m];
    fft_pow2(buf, +1);
    const double scale = 1.0 / std::sqrt(double(D));
    const double edge = (D / 2) % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < D; ++j)
        buf[j] *= (j % 2 == 0 ? edge : -edge) * scale;
}

inline void position_to_momentum(std::span<complex> buf) {
    const std::size_t D = buf.size();
    const double scale = 1.0 / std::sqrt(double(D));
    const double edge = (D / 2) % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < D; ++j)
        buf[j] *= (j % 2 == 0 ? edge : -edge) * scale;
    fft_pow2(buf, -1);
    for (std::size_t m = 1; m < D; m += 2) buf[m] = -buf[m];
}

template <typename Transform>
StateVector fourier_copy(const StateVector& psi, std::size_t axis, Transform&& transform) {
    const auto& dims = psi.dims();
    if (axis >= dims.size())
        throw ConfigError("fourier transform: axis out of range");
    const std::size_t D = dims[axis];
    if (!is_power_of_two(D))
        throw ConfigError("fourier transform: axis dimension " + std::to_string(D) +
                          " is not a power of two");
    StateVector out = psi;
    const std::size_t ax[1] = {axis};
    const SliceView view = make_view(dims, ax);
    std::vector<complex> buf(D);
    for (std::size_t s = 0; s < view.slice_count(); ++s) {
        const Slice sl = view.slice(s);
        for (std::size_t i = 0; i < D; ++i) buf[i] = out[sl.first + sl.stride * i];
        transform(std::span<complex>(buf));
        for (std::size_t i = 0; i < D; ++i) out[sl.first + sl.stride * i] = buf[i];
    }
    return out;
}

} // namespace detail

// Momentum -> position along one axis, always on a fresh copy; the input is
// never touched (no in-place transforms anywhere in the evolution path).
inline StateVector position_copy(const StateVector& psi, std::size_t axis) {
    return detail::fourier_copy(psi, axis, [](std::span<complex> b) { detail::momentum_to_position(b); });
}

// Inverse of position_copy.
inline StateVector momentum_copy(const StateVector& psi, std::size_t axis) {
    return detail::fourier_copy(psi, axis, [](std::span<complex> b) { detail::position_to_momentum(b); });
}

inline StateVector fock_state(std::size_t n, std::size_t cutoff) {
    if (cutoff < 1) throw ConfigError("fock_state: cutoff must be positive");
    if (n >= cutoff)
        throw std::out_of_range("fock_state: n = " + std::to_string(n) +
                                " not below cutoff " + std::to_string(cutoff));
    StateVector v({cutoff});
    v[n] = 1.0;
    return v;
}

inline StateVector coherent_state(complex alpha, std::size_t cutoff) {
    if (cutoff < 1) throw ConfigError("coherent_state: cutoff must be positive");
    StateVector v({cutoff});
    complex c{1.0, 0.0};
    v[0] = c;
    for (std::size_t n = 1; n < cutoff; ++n) {
        c *= alpha / std::sqrt(double(n));
        v[n] = c;
    }
    v.normalize();
    return v;
}

// Gaussian packet centred at x0 with spread xsig and mean momentum k0, built
// directly on the integer momentum grid; sampling in k periodizes the
// envelope over the [-pi, pi) box automatically.
inline StateVector wave_packet(double x0, double k0, double xsig, std::size_t resolution) {
    if (!is_power_of_two(resolution) || resolution < 2)
        throw ConfigError("wave_packet: resolution must be a power of two");
    if (xsig <= 0.0) throw ConfigError("wave_packet: xsig must be positive");
    StateVector v({resolution});
    for (std::size_t m = 0; m < resolution; ++m) {
        const double k = double(momentum_of(m, resolution));
        const double dk = k - k0;
        v[m] = std::polar(std::exp(-xsig * xsig * dk * dk), -dk * x0);
    }
    v.normalize();
    return v;
}

} // namespace qtraj
