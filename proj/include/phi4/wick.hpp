#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "phi4/field.hpp"
#include "phi4/norms.hpp"
#include "phi4/pool.hpp"
#include "phi4/rng.hpp"

namespace phi4 {

namespace detail {

// Stationary-variance kernel (1 - e^{-2*lambda*e}) / lambda with the
// lambda -> 0 limit handled.
inline double ou_var_kernel(double lambda, double elapsed) {
    if (lambda * elapsed < 1e-12) return 2.0 * elapsed;
    return -std::expm1(-2.0 * lambda * elapsed) / lambda;
}

}  // namespace detail

// Lattice variance c_{s,t} = E[ou(x)^2] at elapsed time t - s: the truncated
// mode sum sum_k (1 - e^{-2 lambda_k e}) / (lambda_k L^2).
inline double wick_constant(const TorusGrid& g, double m, double elapsed) {
    if (elapsed < 0.0) throw std::invalid_argument("wick_constant: elapsed >= 0 required");
    double s = 0.0;
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2)
            s += detail::ou_var_kernel(m + g.k2_phys(j1, j2), elapsed);
    return s / (g.length * g.length);
}

// Tail renormalization constant: grid-truncated sum_k e^{-t lambda_k} / (lambda_k L^2).
inline double c_t_infty(const TorusGrid& g, double m, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("c_t_infty: t > 0 required");
    double s = 0.0;
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            double lambda = m + g.k2_phys(j1, j2);
            s += std::exp(-t * lambda) / lambda;
        }
    return s / (g.length * g.length);
}

// Ornstein-Uhlenbeck solution of the stochastic heat equation, restarted at
// birth time s with zero data; coefficients carry Hermitian symmetry.
struct OuState {
    TorusGrid grid;
    double m = 1.0;
    double birth = 0.0;
    double t = 0.0;
    std::vector<std::complex<double>> coeffs;

    OuState() = default;
    OuState(const TorusGrid& g, double mass, double s)
        : grid(g), m(mass), birth(s), t(s), coeffs(g.points(), 0.0) {}

    double elapsed() const { return t - birth; }
    Field field() const { return Field::from_fourier(grid, coeffs); }
};

inline OuState restart(const TorusGrid& g, double m, double s) {
    if (s < 0.0) throw std::invalid_argument("restart: s >= 0 required");
    return OuState(g, m, s);
}

// Exact-in-law per-mode update over a step of length dt. Hermitian mode pairs
// are driven by one complex draw; self-conjugate modes by one real draw. The
// law of the spectral Galerkin truncation is reproduced for any dt.
inline void ou_step(OuState& state, double dt, NoiseStream& stream) {
    if (!(dt > 0.0)) throw std::invalid_argument("ou_step: dt > 0 required");
    const TorusGrid& g = state.grid;
    const int n = g.n;
    const double l2 = g.length * g.length;
    for (int j1 = 0; j1 < n; ++j1) {
        int m1 = (n - j1) % n;
        for (int j2 = 0; j2 < n; ++j2) {
            int m2 = (n - j2) % n;
            size_t i = static_cast<size_t>(j1) * n + j2;
            size_t ic = static_cast<size_t>(m1) * n + m2;
            if (ic < i) continue;  // mirror handled at its representative
            double lambda = state.m + g.k2_phys(j1, j2);
            double decay = std::exp(-lambda * dt);
            double var = detail::ou_var_kernel(lambda, dt) / l2;
            if (ic == i) {
                double gdraw = stream.normal() * std::sqrt(var);
                state.coeffs[i] = state.coeffs[i].real() * decay + gdraw;
            } else {
                double sd = std::sqrt(0.5 * var);
                std::complex<double> gdraw(stream.normal() * sd, stream.normal() * sd);
                state.coeffs[i] = state.coeffs[i] * decay + gdraw;
                state.coeffs[ic] = std::conj(state.coeffs[i]);
            }
        }
    }
    state.t += dt;
}

// The OU field together with its Wick square and cube at one time. The powers
// are plain lattice products, which keeps the Wick identities exact at fixed N:
//   W2 = W1^2 - c,  W3 = W1^3 - 3 c W1   pointwise.
struct WickTriple {
    Field w1, w2, w3;
    double c_now = 0.0;
    double elapsed = 0.0;
};

inline WickTriple make_wick(const OuState& state) {
    WickTriple w;
    w.elapsed = state.elapsed();
    w.c_now = wick_constant(state.grid, state.m, w.elapsed);
    w.w1 = to_real(state.field());
    const auto& x = w.w1.real_data();
    std::vector<double> w2(x.size()), w3(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        w2[i] = x[i] * x[i] - w.c_now;
        w3[i] = x[i] * x[i] * x[i] - 3.0 * w.c_now * x[i];
    }
    w.w2 = Field::from_real(state.grid, std::move(w2));
    w.w3 = Field::from_real(state.grid, std::move(w3));
    return w;
}

// max over k=1,2,3 of ||W_k||_{C^{-alpha}}.
inline double wick_sup_norm(const WickTriple& w, double alpha) {
    double a = besov_inf_norm(w.w1, -alpha);
    double b = besov_inf_norm(w.w2, -alpha);
    double c = besov_inf_norm(w.w3, -alpha);
    return std::max(a, std::max(b, c));
}

// Per-replica running supremum over t <= T of the three C^{-alpha} norms of
// the Wick triple started at 0; returned values are one sup per replica.
inline std::vector<double> sup_norm_profile(const TorusGrid& g, double m, double T,
                                            double dt, double alpha,
                                            std::uint64_t base_seed, int replicas,
                                            std::uint64_t replica_offset = 0,
                                            int workers = 1) {
    if (!(alpha > 0.0 && T > 0.0)) throw std::invalid_argument("sup_norm_profile: bad args");
    int steps = static_cast<int>(std::llround(T / dt));
    return parallel_map<double>(replicas, workers, [&](int r) {
        NoiseStream stream(base_seed, replica_offset + static_cast<std::uint64_t>(r));
        OuState state(g, m, 0.0);
        double sup = 0.0;
        for (int s = 0; s < steps; ++s) {
            ou_step(state, dt, stream);
            sup = std::max(sup, wick_sup_norm(make_wick(state), alpha));
        }
        return sup;
    });
}

}  // namespace phi4
