#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include "phi4/field.hpp"

namespace phi4 {

// Norm selector: Lp(p), Sobolev H^kappa, or C^s = B^s_{inf,inf} via sharp
// dyadic Fourier blocks.
struct NormKind {
    enum class Tag { Lp, Sobolev, BesovInfInf } tag;
    double param;

    static NormKind lp(double p) {
        if (!(p >= 1.0)) throw std::invalid_argument("NormKind: p >= 1 required");
        return {Tag::Lp, p};
    }
    static NormKind sobolev(double kappa) { return {Tag::Sobolev, kappa}; }
    static NormKind besov(double s) { return {Tag::BesovInfInf, s}; }
};

namespace detail {

// Dyadic block index of a mode with lattice radius r = |k|:
// j = -1 for r <= 1, otherwise the unique j >= 0 with 2^j <= r < 2^{j+1}.
inline int dyadic_block(double r) {
    if (r <= 1.0) return -1;
    return static_cast<int>(std::floor(std::log2(r)));
}

inline int max_block(int n) {
    // Largest lattice radius is sqrt(2)*(n/2).
    return dyadic_block(std::sqrt(2.0) * (n / 2));
}

}  // namespace detail

// Sharp Littlewood-Paley projection onto dyadic block j.
inline Field dyadic_project(const Field& f, int j) {
    Field scratch;
    const auto& c = fourier_view(f, scratch);
    const TorusGrid& g = f.grid();
    std::vector<std::complex<double>> out(c.size(), 0.0);
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            size_t i = static_cast<size_t>(j1) * g.n + j2;
            if (detail::dyadic_block(g.k_lattice(j1, j2)) == j) out[i] = c[i];
        }
    return Field::from_fourier(g, std::move(out));
}

inline double norm(const Field& f, const NormKind& kind) {
    f.require_finite("norm");
    const TorusGrid& g = f.grid();
    switch (kind.tag) {
        case NormKind::Tag::Lp: {
            Field scratch;
            const auto& x = real_view(f, scratch);
            double p = kind.param;
            double s = 0.0;
            for (double v : x) s += std::pow(std::abs(v), p);
            return std::pow(s / x.size() * g.length * g.length, 1.0 / p);
        }
        case NormKind::Tag::Sobolev: {
            Field scratch;
            const auto& c = fourier_view(f, scratch);
            double kappa = kind.param;
            double s = 0.0;
            for (int j1 = 0; j1 < g.n; ++j1)
                for (int j2 = 0; j2 < g.n; ++j2) {
                    double w = std::pow(1.0 + g.k2_phys(j1, j2), kappa);
                    s += w * std::norm(c[static_cast<size_t>(j1) * g.n + j2]);
                }
            return std::sqrt(s * g.length * g.length);
        }
        case NormKind::Tag::BesovInfInf: {
            double s = kind.param;
            double best = 0.0;
            for (int j = -1; j <= detail::max_block(g.n); ++j) {
                double mj = dyadic_project(f, j).max_abs();
                if (mj > 0.0) best = std::max(best, std::pow(2.0, j * s) * mj);
            }
            return best;
        }
    }
    return 0.0;
}

// All dyadic-block sup norms at once (one inverse transform per block); used
// on the hot path of the stopping harness.
inline double besov_inf_norm(const Field& f, double s) {
    return norm(f, NormKind::besov(s));
}

// B^s_{2,2} norm via the same sharp blocks.
inline double besov_22_norm(const Field& f, double s) {
    Field scratch;
    const auto& c = fourier_view(f, scratch);
    const TorusGrid& g = f.grid();
    int jmax = detail::max_block(g.n);
    std::vector<double> block_energy(static_cast<size_t>(jmax) + 2, 0.0);
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            int j = detail::dyadic_block(g.k_lattice(j1, j2));
            block_energy[static_cast<size_t>(j + 1)] +=
                std::norm(c[static_cast<size_t>(j1) * g.n + j2]);
        }
    double total = 0.0;
    for (int j = -1; j <= jmax; ++j)
        total += std::pow(4.0, j * s) * block_energy[static_cast<size_t>(j + 1)] *
                 g.length * g.length;
    return std::sqrt(total);
}

// Heat semigroup S_t = e^{-t(m - Laplacian)}: per-mode factor e^{-t(m+|k_phys|^2)}.
inline Field heat_semigroup(const Field& f, double t, double m) {
    if (t < 0.0) throw std::invalid_argument("heat_semigroup: t >= 0 required");
    if (m < 0.0) throw std::invalid_argument("heat_semigroup: m >= 0 required");
    const TorusGrid& g = f.grid();
    Field scratch;
    auto c = fourier_view(f, scratch);
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2)
            c[static_cast<size_t>(j1) * g.n + j2] *= std::exp(-t * (m + g.k2_phys(j1, j2)));
    return Field::from_fourier(g, std::move(c));
}

// Fourier multiplier (1+|k_phys|^2)^{s/2}; realizes Lambda^{s/2} used in the
// H^kappa operator-norm targets.
inline Field bessel_multiplier(const Field& f, double s) {
    const TorusGrid& g = f.grid();
    Field scratch;
    auto c = fourier_view(f, scratch);
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2)
            c[static_cast<size_t>(j1) * g.n + j2] *=
                std::pow(1.0 + g.k2_phys(j1, j2), 0.5 * s);
    return Field::from_fourier(g, std::move(c));
}

// Spectral partial derivatives and sup norm of |grad f|.
inline std::pair<Field, Field> gradient(const Field& f) {
    const TorusGrid& g = f.grid();
    Field scratch;
    const auto& c = fourier_view(f, scratch);
    std::vector<std::complex<double>> d1(c.size()), d2(c.size());
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            size_t i = static_cast<size_t>(j1) * g.n + j2;
            std::complex<double> iu(0.0, 1.0);
            d1[i] = iu * g.k_phys(g.freq(j1)) * c[i];
            d2[i] = iu * g.k_phys(g.freq(j2)) * c[i];
        }
    return {Field::from_fourier(g, std::move(d1)), Field::from_fourier(g, std::move(d2))};
}

inline double grad_sup_norm(const Field& f) {
    auto [d1, d2] = gradient(f);
    d1.ensure_real();
    d2.ensure_real();
    const auto& a = d1.real_data();
    const auto& b = d2.real_data();
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::sqrt(a[i] * a[i] + b[i] * b[i]));
    return m;
}

struct MultIneqReport {
    double product_norm;   // ||fg||_{B^alpha_{2,2}}
    double f_norm;         // ||f||_{C^alpha}
    double g_norm;         // ||g||_{C^beta}
    double ratio;          // product_norm / (f_norm * g_norm), 0 if degenerate
};

// Data for the empirical two-exponent product estimate: alpha < 0 < beta with
// alpha + beta > 0. Property tests track the ratio over corpora.
inline MultIneqReport multiplicative_inequality_check(const Field& f, const Field& g,
                                                      double alpha, double beta) {
    if (!(alpha < 0.0 && beta > 0.0 && alpha + beta > 0.0))
        throw std::invalid_argument(
            "multiplicative_inequality_check: need alpha<0<beta, alpha+beta>0");
    MultIneqReport r{};
    r.product_norm = besov_22_norm(multiply(f, g), alpha);
    r.f_norm = besov_inf_norm(f, alpha);
    r.g_norm = besov_inf_norm(g, beta);
    double denom = r.f_norm * r.g_norm;
    r.ratio = denom > 0.0 ? r.product_norm / denom : 0.0;
    return r;
}

}  // namespace phi4
