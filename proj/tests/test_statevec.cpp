#include <catch2/catch_amalgamated.hpp>

#include "qtraj/statevec.hpp"

#include <cstring>
#include <random>

using namespace qtraj;

namespace {

StateVector random_state(std::vector<std::size_t> dims, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    StateVector v(std::move(dims));
    for (auto& a : v.amps()) a = {nd(gen), nd(gen)};
    return v;
}

// Brute-force check that the slices of a view tile the flat index space
// exactly once.
void check_partition(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& subs) {
    const SliceView view = make_view(dims, subs);
    std::size_t combos = 1;
    for (std::size_t d : view.sub_dims) combos *= d;
    std::vector<int> hits(product(dims), 0);
    for (std::size_t first : view.firsts) {
        for (std::size_t c = 0; c < combos; ++c) {
            std::size_t rest = c, off = first;
            for (std::size_t a = view.sub_dims.size(); a-- > 0;) {
                off += view.strides[a] * (rest % view.sub_dims[a]);
                rest /= view.sub_dims[a];
            }
            ++hits[off];
        }
    }
    for (int h : hits) REQUIRE(h == 1);
}

double mean_x(const StateVector& v) {
    const StateVector px = position_copy(v, 0);
    double x1 = 0.0;
    for (std::size_t j = 0; j < px.size(); ++j) x1 += position_of(j, px.size()) * std::norm(px[j]);
    return x1;
}

double mean_k(const StateVector& v) {
    double k1 = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) k1 += double(momentum_of(j, v.size())) * std::norm(v[j]);
    return k1;
}

} // namespace

TEST_CASE("flat_index follows the row-major layout", "[statevec]") {
    const std::vector<std::size_t> dims{3, 4, 2};
    REQUIRE(flat_index(dims, std::vector<std::size_t>{0, 0, 0}) == 0);
    REQUIRE(flat_index(dims, std::vector<std::size_t>{1, 2, 1}) == 13);
    REQUIRE(flat_index(dims, std::vector<std::size_t>{2, 3, 1}) == 23);

    REQUIRE_THROWS_AS(flat_index(dims, std::vector<std::size_t>{3, 0, 0}), std::out_of_range);
    REQUIRE_THROWS_AS(flat_index(dims, std::vector<std::size_t>{0, 0}), std::out_of_range);
}

TEST_CASE("flat_index is a bijection onto [0, prod dims)", "[statevec]") {
    std::mt19937_64 gen(42);
    std::vector<std::vector<std::size_t>> cases{{3, 4, 2}};
    while (cases.size() < 10) {
        std::vector<std::size_t> dims(1 + gen() % 4);
        for (auto& d : dims) d = 2 + gen() % 7;
        if (product(dims) <= 4096) cases.push_back(dims);
    }
    for (const auto& dims : cases) {
        std::vector<int> hit(product(dims), 0);
        std::vector<std::size_t> idx(dims.size(), 0);
        for (;;) {
            ++hit[flat_index(dims, idx)];
            std::size_t a = idx.size();
            while (a-- > 0) {
                if (++idx[a] < dims[a]) break;
                idx[a] = 0;
                if (a == 0) goto exhausted;
            }
        }
    exhausted:
        for (int h : hit) REQUIRE(h == 1);
    }
}

TEST_CASE("make_view computes the strides and firsts of the layout", "[statevec]") {
    const std::vector<std::size_t> dims{3, 4, 2};

    const SliceView v1 = make_view(dims, std::vector<std::size_t>{1});
    REQUIRE(v1.strides == std::vector<std::size_t>{2});
    REQUIRE(v1.firsts == std::vector<std::size_t>{0, 1, 8, 9, 16, 17});

    const SliceView v0 = make_view(dims, std::vector<std::size_t>{0});
    REQUIRE(v0.strides == std::vector<std::size_t>{8});
    REQUIRE(v0.firsts == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});

    const SliceView vb = make_view(std::vector<std::size_t>{2, 2}, std::vector<std::size_t>{0, 1});
    REQUIRE(vb.strides == std::vector<std::size_t>{2, 1});
    REQUIRE(vb.firsts == std::vector<std::size_t>{0});

    REQUIRE_THROWS_AS(make_view(dims, std::vector<std::size_t>{1, 1}), ConstructionError);
    REQUIRE_THROWS_AS(make_view(dims, std::vector<std::size_t>{3}), ConstructionError);
}

TEST_CASE("views tile the index space exactly once", "[statevec]") {
    const std::vector<std::size_t> fig{3, 4, 2};
    for (std::size_t s = 0; s < fig.size(); ++s) check_partition(fig, {s});
    check_partition(fig, {0, 1});
    check_partition(fig, {1, 2});
    check_partition(fig, {0, 2});
    check_partition(fig, {2, 0}); // declared order need not be ascending

    std::mt19937_64 gen(7);
    for (int c = 0; c < 20; ++c) {
        std::vector<std::size_t> dims(2 + gen() % 3);
        for (auto& d : dims) d = 2 + gen() % 7;
        if (product(dims) > 4096) {
            --c;
            continue;
        }
        for (std::size_t s = 0; s < dims.size(); ++s) check_partition(dims, {s});
        check_partition(dims, {0, dims.size() - 1});
    }
}

TEST_CASE("direct product concatenates factors with the last one fastest", "[statevec]") {
    const StateVector p = direct_product(fock_state(0, 2), fock_state(1, 2));
    REQUIRE(p.dims() == std::vector<std::size_t>{2, 2});
    REQUIRE(p[0] == complex{0.0, 0.0});
    REQUIRE(p[1] == complex{1.0, 0.0});
    REQUIRE(p[2] == complex{0.0, 0.0});
    REQUIRE(p[3] == complex{0.0, 0.0});
}

TEST_CASE("norm of a direct product factorizes", "[statevec]") {
    const StateVector a = random_state({3}, 1);
    const StateVector b = random_state({4, 2}, 2);
    REQUIRE_THAT(norm(direct_product(a, b)),
                 Catch::Matchers::WithinRel(norm(a) * norm(b), 1e-13));
}

TEST_CASE("direct product is associative elementwise", "[statevec]") {
    const StateVector a = random_state({2}, 3);
    const StateVector b = random_state({3}, 4);
    const StateVector c = random_state({2}, 5);
    const StateVector l = direct_product(direct_product(a, b), c);
    const StateVector r = direct_product(a, direct_product(b, c));
    REQUIRE(l.size() == r.size());
    REQUIRE(l.dims() == r.dims());
    for (std::size_t i = 0; i < l.size(); ++i) REQUIRE(std::abs(l[i] - r[i]) < 1e-15);
}

TEST_CASE("metric operations", "[statevec]") {
    const StateVector x = random_state({5}, 6);
    const complex xx = inner(x, x);
    REQUIRE_THAT(xx.real(), Catch::Matchers::WithinRel(norm(x) * norm(x), 1e-13));
    REQUIRE(std::abs(xx.imag()) < 1e-13);

    REQUIRE(inner(fock_state(0, 4), fock_state(1, 4)) == complex{0.0, 0.0});

    StateVector y({2}, {complex{3.0, 0.0}, complex{0.0, 4.0}});
    y.normalize();
    REQUIRE(std::abs(norm(y) - 1.0) < 1e-12);

    StateVector z({3});
    REQUIRE_THROWS_AS(z.normalize(), DegenerateStateError);

    REQUIRE_THROWS_AS(inner(fock_state(0, 3), fock_state(0, 4)), std::invalid_argument);
}

TEST_CASE("position_copy of a momentum eigenstate is flat", "[statevec]") {
    const std::size_t D = 16;
    const StateVector px = position_copy(fock_state(D / 2, D), 0); // k = 0
    for (std::size_t j = 0; j < D; ++j)
        REQUIRE_THAT(std::norm(px[j]), Catch::Matchers::WithinAbs(1.0 / double(D), 1e-14));
}

TEST_CASE("forward then inverse transform reproduces the input", "[statevec]") {
    const StateVector v = normalized(random_state({3, 8, 2}, 8));
    const StateVector round = momentum_copy(position_copy(v, 1), 1);
    for (std::size_t i = 0; i < v.size(); ++i) REQUIRE(std::abs(round[i] - v[i]) < 1e-12);
}

TEST_CASE("position_copy never touches its input and preserves norm", "[statevec]") {
    const StateVector v = normalized(random_state({4, 8}, 9));
    std::vector<complex> before = v.amps();
    const StateVector px = position_copy(v, 1);
    REQUIRE(std::memcmp(before.data(), v.amps().data(), before.size() * sizeof(complex)) == 0);
    REQUIRE_THAT(norm(px), Catch::Matchers::WithinAbs(norm(v), 1e-12));
}

TEST_CASE("non-power-of-two axis is rejected", "[statevec]") {
    const StateVector v = random_state({3, 8}, 10);
    REQUIRE_THROWS_AS(position_copy(v, 0), ConfigError);
    REQUIRE_NOTHROW(position_copy(v, 1));
}

TEST_CASE("coherent state reduces to the vacuum at alpha = 0", "[statevec]") {
    const StateVector c = coherent_state({0.0, 0.0}, 8);
    const StateVector f = fock_state(0, 8);
    for (std::size_t i = 0; i < 8; ++i) REQUIRE(c[i] == f[i]);
}

TEST_CASE("coherent state photon number matches the truncated series", "[statevec]") {
    const std::size_t cutoff = 64;
    const double alpha = 2.0;

    // independent truncated-series oracle
    long double p = 1.0L, zsum = 1.0L, nsum = 0.0L;
    for (std::size_t n = 1; n < cutoff; ++n) {
        p *= (long double)(alpha * alpha) / n;
        zsum += p;
        nsum += n * p;
    }
    const double expected = double(nsum / zsum);

    const StateVector c = coherent_state({alpha, 0.0}, cutoff);
    double measured = 0.0;
    for (std::size_t n = 0; n < cutoff; ++n) measured += double(n) * std::norm(c[n]);

    REQUIRE_THAT(measured, Catch::Matchers::WithinAbs(expected, 1e-12));
    REQUIRE_THAT(measured, Catch::Matchers::WithinAbs(4.0, 1e-10));
}

TEST_CASE("fock state rejects n at or above the cutoff", "[statevec]") {
    REQUIRE_THROWS_AS(fock_state(8, 8), std::out_of_range);
    REQUIRE_NOTHROW(fock_state(7, 8));
}

TEST_CASE("wave packet at the origin has symmetric moments", "[statevec]") {
    const StateVector w = wave_packet(0.0, 0.0, 0.1, 128);
    REQUIRE(std::abs(mean_x(w)) < 1e-9);
    REQUIRE(std::abs(mean_k(w)) < 1e-9);
    REQUIRE_THAT(norm(w), Catch::Matchers::WithinAbs(1.0, 1e-12));

    REQUIRE_THROWS_AS(wave_packet(0.0, 0.0, 0.1, 100), ConfigError);
    REQUIRE_THROWS_AS(wave_packet(0.0, 0.0, -1.0, 128), ConfigError);
}
