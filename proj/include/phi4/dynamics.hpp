#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "phi4/field.hpp"
#include "phi4/norms.hpp"
#include "phi4/rng.hpp"
#include "phi4/stopping.hpp"
#include "phi4/wick.hpp"

namespace phi4 {

struct BlowupError : std::runtime_error {
    double time;
    explicit BlowupError(double t)
        : std::runtime_error("blow-up detected at t = " + std::to_string(t) +
                             " (dt too large for this configuration)"),
          time(t) {}
};

// Model switches. cubic=false drops the whole nonlinearity and renormalization
// (linear stochastic heat equation, the Gaussian control); renorm=false drops
// only the 3 c_{t,inf} (W1 + v) term; noise=false freezes the OU sector at 0.
struct ModelOptions {
    bool cubic = true;
    bool renorm = true;
    bool noise = true;
};

inline constexpr double kBlowupThreshold = 1e8;

// phi1(z) = (1 - e^{-z}) / z, the exponential-Euler weight.
inline double phi1(double z) {
    if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
    return -std::expm1(-z) / z;
}

// Noise layer of a run: per grid step, the restarted Wick triple together
// with restart bookkeeping. Independent of v, so it can be built once and
// replayed under different initial data or step sizes.
struct WickStepRecord {
    WickTriple wick;   // triple in force on [t_i, t_{i+1}) (post-restart at restart steps)
    double birth;      // birth time of the generating OU process
    bool restarted = false;
    bool capped = false;
    Field rebase;      // pre-restart W1 at a restart step (empty otherwise)
};

struct NoisePath {
    TorusGrid grid;
    double m = 1.0;
    double dt = 1e-3;
    bool noise_on = true;
    NoiseStream spec;  // stream state at the start of the build
    std::vector<WickStepRecord> records;  // index i <-> time i*dt
    StoppingRecord stopping;
    bool has_stopping = false;

    double time(int i) const { return i * dt; }
};

// Drive the OU/Wick sector for at least ceil(T/dt) steps, applying the
// restart rule on the grid. With stopping engaged the build continues past T
// until the open interval closes, so N(t) is defined for all t <= T.
inline NoisePath build_noise_path(const TorusGrid& g, double m, double T, double dt,
                                  NoiseStream stream,
                                  const std::optional<StoppingConfig>& stopping,
                                  bool noise_on = true) {
    if (!(T > 0.0 && dt > 0.0)) throw std::invalid_argument("build_noise_path: T, dt > 0");
    int steps = static_cast<int>(std::llround(T / dt));
    if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T))
        throw std::invalid_argument("build_noise_path: dt must divide T");
    int cap_steps = 0;
    if (stopping) {
        stopping->validate();
        cap_steps = static_cast<int>(std::ceil(stopping->theta / dt - 1e-9));
    }

    NoisePath path;
    path.grid = g;
    path.m = m;
    path.dt = dt;
    path.noise_on = noise_on;
    path.spec = stream;
    path.has_stopping = stopping.has_value();

    OuState state(g, m, 0.0);
    WickStepRecord first;
    first.wick = make_wick(state);
    first.birth = 0.0;
    path.records.push_back(std::move(first));

    int steps_since_restart = 0;
    for (int i = 1;; ++i) {
        if (noise_on)
            ou_step(state, dt, stream);
        else
            state.t += dt;
        WickStepRecord rec;
        rec.wick = make_wick(state);
        rec.birth = state.birth;
        ++steps_since_restart;

        bool closed_interval = false;
        if (stopping) {
            bool barrier = wick_sup_norm(rec.wick, stopping->alpha) >= stopping->eta;
            bool cap = steps_since_restart >= cap_steps;
            if (barrier || cap) {
                double tau = i * dt;
                path.stopping.taus.push_back(tau);
                path.stopping.capped.push_back(!barrier);
                rec.restarted = true;
                rec.capped = !barrier;
                rec.rebase = rec.wick.w1;
                state = OuState(g, m, tau);
                rec.wick = make_wick(state);
                rec.birth = tau;
                steps_since_restart = 0;
                closed_interval = true;
            }
        }
        path.records.push_back(std::move(rec));
        if (i >= steps && (!stopping || closed_interval)) break;
    }
    return path;
}

// One exponential-Euler step of the remainder equation. The linear flow is
// exact per mode; the nonlinearity
//   N(v) = -v^3 - 3 v^2 W1 - 3 v W2 - W3 + 3 c_inf (W1 + v)
// enters through dt * phi1(lambda dt), with the cubic-order products alias-free.
inline Field v_step(const Field& v, const WickTriple& wick, double c_inf, double dt,
                    double m, const ModelOptions& opts, double t_now) {
    const TorusGrid& g = v.grid();
    Field vhat = to_fourier(v);
    std::vector<std::complex<double>> nl(static_cast<size_t>(g.points()), 0.0);
    if (opts.cubic) {
        Field cubic = multiply3(v, v, v);                      // v^3
        Field cross = multiply3(v, v, wick.w1);                // v^2 W1
        Field quad = multiply(v, wick.w2);                     // v W2
        const auto& c3 = cubic.fourier_data();
        const auto& cx = cross.fourier_data();
        const auto& q = quad.fourier_data();
        Field s1, s2, s3;
        const auto& w1 = fourier_view(wick.w1, s1);
        const auto& w3 = fourier_view(wick.w3, s2);
        const auto& vh = vhat.fourier_data();
        double cr = opts.renorm ? c_inf : 0.0;
        for (size_t i = 0; i < nl.size(); ++i)
            nl[i] = -c3[i] - 3.0 * cx[i] - 3.0 * q[i] - w3[i] + 3.0 * cr * (w1[i] + vh[i]);
    }
    auto out = vhat.fourier_data();
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            size_t i = static_cast<size_t>(j1) * g.n + j2;
            double lambda = m + g.k2_phys(j1, j2);
            out[i] = std::exp(-lambda * dt) * out[i] + dt * phi1(lambda * dt) * nl[i];
        }
    Field next = to_real(Field::from_fourier(g, std::move(out)));
    double ma = next.max_abs();
    if (!std::isfinite(ma) || ma > kBlowupThreshold) throw BlowupError(t_now + dt);
    return next;
}

// A full run: the shared noise path plus the v states and the midpoint
// renormalization constants, enough to replay linearized and adjoint passes.
struct Trajectory {
    TorusGrid grid;
    double m = 1.0;
    double dt = 1e-3;
    ModelOptions opts;
    NoisePath noise;
    std::vector<Field> v;        // size M+1, real representation
    std::vector<double> c_mid;   // c_{elapsed+dt/2, inf} used on step i -> i+1

    int steps() const { return static_cast<int>(v.size()) - 1; }
    double time(int i) const { return i * dt; }

    int index_of(double t) const {
        int i = static_cast<int>(std::llround(t / dt));
        if (i < 0 || i > steps() || std::abs(i * dt - t) > 1e-9 * std::max(1.0, t))
            throw std::invalid_argument("Trajectory: time not on the grid");
        return i;
    }

    Field full_solution(int i) const {
        Field u = v[static_cast<size_t>(i)];
        u += noise.records[static_cast<size_t>(i)].wick.w1;
        return to_real(u);
    }
    Field full_solution_at(double t) const { return full_solution(index_of(t)); }
};

// Integrate the remainder over a prebuilt noise path. At each restart time the
// decomposition is re-based, v_tau := v + W1_pre, so u stays continuous.
inline Trajectory evolve_over(const Field& f, const NoisePath& path, double T,
                              const ModelOptions& opts) {
    const TorusGrid& g = path.grid;
    Field::check_same_grid(f, Field::zero(g));
    int steps = static_cast<int>(std::llround(T / path.dt));
    if (steps + 1 > static_cast<int>(path.records.size()))
        throw std::invalid_argument("evolve_over: noise path shorter than horizon");
    Trajectory traj;
    traj.grid = g;
    traj.m = path.m;
    traj.dt = path.dt;
    traj.opts = opts;
    traj.noise = path;
    traj.v.reserve(static_cast<size_t>(steps) + 1);
    traj.c_mid.reserve(static_cast<size_t>(steps));
    traj.v.push_back(to_real(f));
    for (int i = 0; i < steps; ++i) {
        const auto& rec = path.records[static_cast<size_t>(i)];
        if (rec.restarted) {
            Field rebased = traj.v.back();
            rebased += rec.rebase;
            traj.v.back() = to_real(rebased);
        }
        double elapsed_mid = path.time(i) - rec.birth + 0.5 * path.dt;
        double c = (opts.renorm && opts.cubic) ? c_t_infty(g, path.m, elapsed_mid) : 0.0;
        traj.c_mid.push_back(c);
        traj.v.push_back(
            v_step(traj.v.back(), rec.wick, c, path.dt, path.m, opts, path.time(i)));
    }
    return traj;
}

// Convenience wrapper: build noise and integrate in one call.
inline Trajectory evolve(const Field& f, double m, double T, double dt,
                                   NoiseStream stream, const ModelOptions& opts = {},
                                   const std::optional<StoppingConfig>& stopping =
                                       std::nullopt) {
    NoisePath path = build_noise_path(f.grid(), m, T, dt, stream, stopping, opts.noise);
    return evolve_over(f, path, T, opts);
}

inline std::pair<Trajectory, StoppingRecord> run_with_restarts(
    const Field& f, double m, double T, double dt, const StoppingConfig& config,
    NoiseStream stream, const ModelOptions& opts = {}) {
    Trajectory traj = evolve(f, m, T, dt, stream, opts, config);
    return {traj, traj.noise.stopping};
}

// ---- Coming-down-from-infinity profiling ----------------------------------

struct ComingDownStats {
    double magnitude;
    std::vector<double> sups;  // per replica: sup_{t<=T} t^{1/2} ||v||_{L^p}
};

// For f = magnitude * profile, the running supremum of t^{1/2} ||v_t||_{L^p}.
// The explicit cubic term limits the stable step to O(1/|v|^2), and |v| decays
// like t^{-1/2}, so the step starts at the stability limit of the initial
// datum and doubles every 8 steps (keeping dt ~ t/8) up to a coarse cap. The
// schedule depends only on the magnitude, so runs replay bit-exactly.
inline std::vector<ComingDownStats> coming_down_profile(
    const TorusGrid& g, double m, const Field& profile,
    const std::vector<double>& magnitudes, double p, double T, double dt,
    int replicas, std::uint64_t base_seed, const ModelOptions& opts = {},
    std::uint64_t replica_offset = 0, int workers = 1) {
    if (!(T <= 1.0 && p < 1e12)) throw std::invalid_argument("coming_down_profile: bad args");
    double dt_coarse = 8.0 * dt;
    NormKind lp = NormKind::lp(p);
    std::vector<ComingDownStats> out;
    for (double mag : magnitudes) {
        ComingDownStats st;
        st.magnitude = mag;
        double vmax = mag * profile.max_abs();
        double step0 = std::min(dt, 0.125 / (3.0 * vmax * vmax + 1.0));
        st.sups = parallel_map<double>(replicas, workers, [&](int r) {
            NoiseStream stream(base_seed, replica_offset + static_cast<std::uint64_t>(r));
            OuState state(g, m, 0.0);
            Field v = to_real(mag * profile);
            double sup = 0.0;
            double t = 0.0;
            double step = step0;
            int count = 0;
            while (t < T - 1e-12) {
                double h = std::min(step, T - t);
                WickTriple w = make_wick(state);
                if (opts.noise)
                    ou_step(state, h, stream);
                else
                    state.t += h;
                double c = (opts.renorm && opts.cubic)
                               ? c_t_infty(g, m, t + 0.5 * h)
                               : 0.0;
                v = v_step(v, w, c, h, m, opts, t);
                t += h;
                sup = std::max(sup, std::sqrt(t) * norm(v, lp));
                if (++count % 8 == 0) step = std::min(2.0 * step, dt_coarse);
            }
            return sup;
        });
        out.push_back(std::move(st));
    }
    return out;
}

struct GradientProfileStats {
    std::vector<double> sups;  // per replica: sup_{t<=T} t^{1+eps} ||grad v||_inf
};

inline GradientProfileStats gradient_profile(const TorusGrid& g, double m,
                                             const Field& f, double T, double dt,
                                             double eps, int replicas,
                                             std::uint64_t base_seed,
                                             const ModelOptions& opts = {},
                                             std::uint64_t replica_offset = 0) {
    if (!(eps > 0.0 && T <= 1.0)) throw std::invalid_argument("gradient_profile: bad args");
    GradientProfileStats out;
    int steps = static_cast<int>(std::llround(T / dt));
    for (int r = 0; r < replicas; ++r) {
        NoiseStream stream(base_seed, replica_offset + static_cast<std::uint64_t>(r));
        OuState state(g, m, 0.0);
        Field v = to_real(f);
        double sup = 0.0;
        for (int i = 0; i < steps; ++i) {
            WickTriple w = make_wick(state);
            if (opts.noise)
                ou_step(state, dt, stream);
            else
                state.t += dt;
            double c = (opts.renorm && opts.cubic)
                           ? c_t_infty(g, m, i * dt - (state.birth) + 0.5 * dt)
                           : 0.0;
            v = v_step(v, w, c, dt, m, opts, i * dt);
            double t = (i + 1) * dt;
            sup = std::max(sup, std::pow(t, 1.0 + eps) * grad_sup_norm(v));
        }
        out.sups.push_back(sup);
    }
    return out;
}

}  // namespace phi4
