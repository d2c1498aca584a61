#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <vector>

#include "phi4/field.hpp"
#include "phi4/norms.hpp"

using namespace phi4;

namespace {

// O(N^4) reference DFT with the same normalization as Field::ensure_fourier.
std::vector<std::complex<double>> direct_dft(const TorusGrid& g,
                                             const std::vector<double>& x) {
    std::vector<std::complex<double>> out(static_cast<size_t>(g.points()));
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            std::complex<double> s = 0.0;
            for (int a = 0; a < g.n; ++a)
                for (int b = 0; b < g.n; ++b) {
                    double phase = -2.0 * kPi * (double(j1) * a + double(j2) * b) / g.n;
                    s += x[static_cast<size_t>(a) * g.n + b] *
                         std::complex<double>(std::cos(phase), std::sin(phase));
                }
            out[static_cast<size_t>(j1) * g.n + j2] = s / double(g.points());
        }
    return out;
}

std::vector<double> random_samples(const TorusGrid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> x(static_cast<size_t>(g.points()));
    for (auto& v : x) v = nd(rng);
    return x;
}

}  // namespace

TEST_CASE("grid validates its parameters") {
    CHECK_THROWS(TorusGrid(7, 1.0));
    CHECK_THROWS(TorusGrid(4, 1.0));
    CHECK_THROWS(TorusGrid(16, -1.0));
    TorusGrid g(16, 2.0);
    CHECK(g.freq(0) == 0);
    CHECK(g.freq(8) == -8);
    CHECK(g.freq(15) == -1);
    CHECK(g.idx_of_freq(-1) == 15);
    CHECK(g.k_phys(1) == doctest::Approx(2.0 * kPi / 2.0));
}

TEST_CASE("forward transform matches the direct DFT at N=8") {
    TorusGrid g(8, 1.0);
    auto x = random_samples(g, 11);
    Field f = Field::from_real(g, x);
    auto ref = direct_dft(g, x);
    Field scratch;
    const auto& got = fourier_view(f, scratch);
    for (size_t i = 0; i < ref.size(); ++i) {
        CHECK(std::abs(got[i] - ref[i]) < 1e-12);
    }
}

TEST_CASE("transform round trip is lossless") {
    TorusGrid g(16, 3.0);
    auto x = random_samples(g, 5);
    Field f = Field::from_real(g, x);
    f.ensure_fourier();
    f.ensure_real();
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(f.real_data()[i] == doctest::Approx(x[i]).epsilon(1e-13));
}

TEST_CASE("const representation access never converts") {
    TorusGrid g(8, 1.0);
    Field f = Field::constant(g, 2.0);
    CHECK_THROWS(f.fourier_data());
    Field h = to_fourier(f);
    CHECK_THROWS(h.real_data());
}

TEST_CASE("norms of a constant field") {
    TorusGrid g(16, 2.0);
    Field f = Field::constant(g, -3.0);
    CHECK(norm(f, NormKind::lp(2)) == doctest::Approx(3.0 * 2.0).epsilon(1e-12));
    CHECK(norm(f, NormKind::lp(4)) ==
          doctest::Approx(3.0 * std::pow(4.0, 0.25)).epsilon(1e-12));
    CHECK(norm(f, NormKind::sobolev(0.0)) == doctest::Approx(6.0).epsilon(1e-12));
    // Only block -1 is populated, so the Besov norm is 2^{-s} * sup.
    CHECK(norm(f, NormKind::besov(1.0)) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(norm(f, NormKind::besov(-0.5)) ==
          doctest::Approx(3.0 * std::pow(2.0, 0.5)).epsilon(1e-12));
}

TEST_CASE("norms of a single cosine mode") {
    TorusGrid g(16, 1.0);
    // f(x) = cos(2 pi k . x), coefficients 1/2 at +-k.
    Field f = Field::mode(g, 3, 0, 0.5);
    double k2 = std::pow(2.0 * kPi * 3.0, 2);
    CHECK(norm(f, NormKind::lp(2)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(norm(f, NormKind::sobolev(1.0)) ==
          doctest::Approx(std::sqrt(0.5 * (1.0 + k2))).epsilon(1e-12));
    // |k| = 3 sits in dyadic block j = 1; sup of cos is 1.
    CHECK(norm(f, NormKind::besov(-0.5)) ==
          doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-9));
    Field pj = dyadic_project(f, 1);
    CHECK(pj.max_abs() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dyadic_project(f, 0).max_abs() == doctest::Approx(0.0));
}

TEST_CASE("inner product is the L^2 pairing") {
    TorusGrid g(16, 2.0);
    Field a = Field::mode(g, 1, 0, 0.5);  // cos
    CHECK(inner(a, a) == doctest::Approx(0.5 * 4.0).epsilon(1e-12));  // L^2/2
    Field b = Field::mode(g, 0, 1, 0.5);
    CHECK(inner(a, b) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dealiased product matches the truncated convolution at N=8") {
    TorusGrid g(8, 1.0);
    auto xa = random_samples(g, 21);
    auto xb = random_samples(g, 22);
    Field fa = Field::from_real(g, xa);
    Field fb = Field::from_real(g, xb);
    auto ca = direct_dft(g, xa);
    auto cb = direct_dft(g, xb);
    // Reference: full convolution over true frequency sums on the symmetric
    // band |k| <= 3 (the product operators annihilate the Nyquist rows), then
    // keep modes in that band.
    auto idx = [&](int k) { return (k % g.n + g.n) % g.n; };
    std::vector<std::complex<double>> ref(static_cast<size_t>(g.points()), 0.0);
    for (int p1 = -3; p1 < 4; ++p1)
        for (int p2 = -3; p2 < 4; ++p2)
            for (int q1 = -3; q1 < 4; ++q1)
                for (int q2 = -3; q2 < 4; ++q2) {
                    int r1 = p1 + q1, r2 = p2 + q2;
                    if (r1 <= -4 || r1 >= 4 || r2 <= -4 || r2 >= 4) continue;
                    ref[static_cast<size_t>(idx(r1)) * g.n + idx(r2)] +=
                        ca[static_cast<size_t>(idx(p1)) * g.n + idx(p2)] *
                        cb[static_cast<size_t>(idx(q1)) * g.n + idx(q2)];
                }
    Field prod = multiply(fa, fb);
    Field scratch;
    const auto& got = fourier_view(prod, scratch);
    for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) < 1e-10);
}

TEST_CASE("triple product is alias-free at N=8") {
    TorusGrid g(8, 1.0);
    auto xa = random_samples(g, 31);
    auto xb = random_samples(g, 32);
    auto xc = random_samples(g, 33);
    Field fa = Field::from_real(g, xa);
    Field fb = Field::from_real(g, xb);
    Field fc = Field::from_real(g, xc);
    auto ca = direct_dft(g, xa);
    auto cb = direct_dft(g, xb);
    auto cc = direct_dft(g, xc);
    auto idx = [&](int k) { return (k % g.n + g.n) % g.n; };
    auto at = [&](const std::vector<std::complex<double>>& v, int k1, int k2) {
        return v[static_cast<size_t>(idx(k1)) * g.n + idx(k2)];
    };
    std::vector<std::complex<double>> ref(static_cast<size_t>(g.points()), 0.0);
    for (int p1 = -3; p1 < 4; ++p1)
        for (int p2 = -3; p2 < 4; ++p2)
            for (int q1 = -3; q1 < 4; ++q1)
                for (int q2 = -3; q2 < 4; ++q2)
                    for (int s1 = -3; s1 < 4; ++s1)
                        for (int s2 = -3; s2 < 4; ++s2) {
                            int r1 = p1 + q1 + s1, r2 = p2 + q2 + s2;
                            if (r1 <= -4 || r1 >= 4 || r2 <= -4 || r2 >= 4) continue;
                            ref[static_cast<size_t>(idx(r1)) * g.n + idx(r2)] +=
                                at(ca, p1, p2) * at(cb, q1, q2) * at(cc, s1, s2);
                        }
    Field prod = multiply3(fa, fb, fc);
    Field scratch;
    const auto& got = fourier_view(prod, scratch);
    for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) < 1e-9);
}

TEST_CASE("heat semigroup decays each mode exactly") {
    TorusGrid g(16, 1.0);
    Field f = Field::mode(g, 2, 1, std::complex<double>(0.3, -0.1));
    double m = 1.5, t = 0.2;
    double lambda = m + std::pow(2.0 * kPi, 2) * (4.0 + 1.0);
    Field out = heat_semigroup(f, t, m);
    Field scratch;
    const auto& c = fourier_view(out, scratch);
    size_t i = static_cast<size_t>(g.idx_of_freq(2)) * g.n + g.idx_of_freq(1);
    CHECK(std::abs(c[i] - std::complex<double>(0.3, -0.1) * std::exp(-t * lambda)) <
          1e-14);
    CHECK_THROWS(heat_semigroup(f, -0.1, m));
}

TEST_CASE("bessel multiplier and gradient") {
    TorusGrid g(16, 1.0);
    Field f = Field::mode(g, 3, 0, 0.5);  // cos(6 pi x)
    double k = 2.0 * kPi * 3.0;
    Field lf = bessel_multiplier(f, 2.0);
    CHECK(norm(lf, NormKind::lp(2)) ==
          doctest::Approx((1.0 + k * k) * std::sqrt(0.5)).epsilon(1e-12));
    CHECK(grad_sup_norm(f) == doctest::Approx(k).epsilon(1e-10));
}

TEST_CASE("Besov embedding direction holds on random fields") {
    TorusGrid g(16, 1.0);
    auto x = random_samples(g, 44);
    Field f = Field::from_real(g, x);
    // For s' < s the weights shrink on every block except j = -1, where the
    // ratio is 2^{s-s'}; so the norms compare after that one-block correction.
    double s = -0.25, sp = -0.75;
    CHECK(norm(f, NormKind::besov(sp)) <=
          std::pow(2.0, s - sp) * norm(f, NormKind::besov(s)) + 1e-12);
}

TEST_CASE("field snapshot round trip is bit exact") {
    TorusGrid g(8, 2.5);
    auto x = random_samples(g, 55);
    Field f = Field::from_real(g, x);
    std::stringstream ss;
    save_field(f, ss);
    Field back = load_field(ss);
    CHECK(back.grid() == g);
    for (size_t i = 0; i < x.size(); ++i) CHECK(back.real_data()[i] == x[i]);
}

TEST_CASE("snapshot loader rejects corrupt headers") {
    TorusGrid g(8, 1.0);
    Field f = Field::zero(g);
    std::stringstream ss;
    save_field(f, ss);
    std::string raw = ss.str();
    raw[0] = 'X';
    std::stringstream bad(raw);
    CHECK_THROWS(load_field(bad));
    std::stringstream trunc(ss.str().substr(0, 40));
    CHECK_THROWS(load_field(trunc));
}

TEST_CASE("multiplicative inequality report is populated") {
    TorusGrid g(16, 1.0);
    Field f = Field::from_real(g, random_samples(g, 66));
    Field h = heat_semigroup(Field::from_real(g, random_samples(g, 67)), 0.05, 1.0);
    auto rep = multiplicative_inequality_check(f, h, -0.3, 0.8);
    CHECK(rep.product_norm > 0.0);
    CHECK(rep.ratio > 0.0);
    CHECK_THROWS(multiplicative_inequality_check(f, h, 0.3, 0.8));
}
