#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "phi4/dynamics.hpp"
#include "phi4/linearization.hpp"
#include "phi4/stats.hpp"
#include "phi4/stopping.hpp"

namespace phi4 {

// ---- Cylinder functionals ---------------------------------------------------
// F(u) = outer(u(h_1), ..., u(h_n)) with u(h) the L^2 pairing. The derivative
// is the field DF(u) = sum_i d_i outer(...) h_i.
struct CylinderFunctional {
    std::vector<Field> h;
    std::function<double(const std::vector<double>&)> outer;
    std::function<std::vector<double>(const std::vector<double>&)> outer_grad;

    std::vector<double> pairings(const Field& u) const {
        std::vector<double> x(h.size());
        for (size_t i = 0; i < h.size(); ++i) x[i] = inner(u, h[i]);
        return x;
    }
    double value(const Field& u) const { return outer(pairings(u)); }
    Field df(const Field& u) const {
        std::vector<double> gv = outer_grad(pairings(u));
        Field out = Field::zero(h[0].grid());
        for (size_t i = 0; i < h.size(); ++i) out += gv[i] * h[i];
        return out;
    }
};

// F(u) = u(h).
inline CylinderFunctional linear_functional(Field h) {
    CylinderFunctional f;
    f.h.push_back(std::move(h));
    f.outer = [](const std::vector<double>& x) { return x[0]; };
    f.outer_grad = [](const std::vector<double>&) { return std::vector<double>{1.0}; };
    return f;
}

// F(u) = sum_i a_i u(h_i)^2.
inline CylinderFunctional quadratic_functional(std::vector<Field> hs,
                                               std::vector<double> a) {
    if (hs.size() != a.size() || hs.empty())
        throw std::invalid_argument("quadratic_functional: matched nonempty lists");
    CylinderFunctional f;
    f.h = std::move(hs);
    f.outer = [a](const std::vector<double>& x) {
        double s = 0.0;
        for (size_t i = 0; i < x.size(); ++i) s += a[i] * x[i] * x[i];
        return s;
    };
    f.outer_grad = [a](const std::vector<double>& x) {
        std::vector<double> g(x.size());
        for (size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * a[i] * x[i];
        return g;
    };
    return f;
}

// F(u) = sum_i tanh(u(h_i)), a bounded smooth family.
inline CylinderFunctional tanh_functional(std::vector<Field> hs) {
    if (hs.empty()) throw std::invalid_argument("tanh_functional: nonempty list");
    CylinderFunctional f;
    f.h = std::move(hs);
    f.outer = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += std::tanh(v);
        return s;
    };
    f.outer_grad = [](const std::vector<double>& x) {
        std::vector<double> g(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            double t = std::tanh(x[i]);
            g[i] = 1.0 - t * t;
        }
        return g;
    };
    return f;
}

// ---- The drift functional g(s,t) and the Young-absorption constant ----------

// g(s,t) = 1/(2 lambda) ||W1||^2
//        + (1+alpha)/(2 lambda^{(1+alpha)/2}) ||W1||^{2/(1+alpha)} ||grad v||_inf^{2 alpha/(1+alpha)}
//        + (1-alpha)/(2^{1/(1-alpha)} lambda^{2/(1-alpha)}) ||W1||^{2/(1-alpha)}
//        + ||W2|| + 2^alpha (2-alpha)/(2 lambda^{2/(2-alpha)}) ||W2||^{2/(2-alpha)}
//        + 3 c_inf,
// with all Wick norms in C^{-alpha}.
inline double g_drift_from_norms(double w1, double w2, double grad_v_sup, double c_inf,
                                 double lambda, double alpha) {
    if (!(lambda > 0.0)) throw std::invalid_argument("g_drift: lambda > 0 required");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("g_drift: alpha in (0,1) required");
    double t1 = 1.0 / (2.0 * lambda) * w1 * w1;
    double t2 = (1.0 + alpha) / (2.0 * std::pow(lambda, 0.5 * (1.0 + alpha))) *
                std::pow(w1, 2.0 / (1.0 + alpha)) *
                std::pow(grad_v_sup, 2.0 * alpha / (1.0 + alpha));
    double t3 = (1.0 - alpha) /
                (std::pow(2.0, 1.0 / (1.0 - alpha)) * std::pow(lambda, 2.0 / (1.0 - alpha))) *
                std::pow(w1, 2.0 / (1.0 - alpha));
    double t4 = w2;
    double t5 = std::pow(2.0, alpha) * (2.0 - alpha) /
                (2.0 * std::pow(lambda, 2.0 / (2.0 - alpha))) *
                std::pow(w2, 2.0 / (2.0 - alpha));
    return t1 + t2 + t3 + t4 + t5 + 3.0 * c_inf;
}

inline double g_drift(const WickTriple& wick, double grad_v_sup, double c_inf,
                      double lambda, double alpha) {
    double w1 = besov_inf_norm(wick.w1, -alpha);
    double w2 = besov_inf_norm(wick.w2, -alpha);
    return g_drift_from_norms(w1, w2, grad_v_sup, c_inf, lambda, alpha);
}

struct LambdaChoice {
    double lambda = 0.0;
    double c_alpha = 0.0;  // max of g's lambda-dependent prefactors at this lambda
};

inline bool lambda_feasible(double lambda, double alpha) {
    // Absorbed coefficients: the two grad-J terms each below 1/8, the two
    // vJ-absorptions (lambda/2 each) and the (1-alpha)/2 lambda^{2/(1-alpha)}
    // term below 1/4, so the totals fit into 1/2 ||grad J||^2 and 1/2 ||vJ||^2.
    return alpha * std::pow(lambda, 1.0 / alpha) <= 0.125 &&
           0.5 * alpha * std::pow(lambda, 2.0 / alpha) <= 0.125 &&
           0.5 * lambda * 2.0 <= 0.25 &&
           0.5 * (1.0 - alpha) * std::pow(lambda, 2.0 / (1.0 - alpha)) <= 0.25;
}

// Largest lambda on the grid {k/100 : k = 1..100} for which the Young
// absorptions into 1/2 ||grad J||^2 and 1/2 ||v J||^2 are valid.
inline LambdaChoice choose_lambda(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("choose_lambda: alpha in (0,1) required");
    for (int k = 100; k >= 1; --k) {
        double lambda = k / 100.0;
        if (!lambda_feasible(lambda, alpha)) continue;
        LambdaChoice out;
        out.lambda = lambda;
        double p1 = 1.0 / (2.0 * lambda);
        double p2 = (1.0 + alpha) / (2.0 * std::pow(lambda, 0.5 * (1.0 + alpha)));
        double p3 = (1.0 - alpha) / (std::pow(2.0, 1.0 / (1.0 - alpha)) *
                                     std::pow(lambda, 2.0 / (1.0 - alpha)));
        double p5 = std::pow(2.0, alpha) * (2.0 - alpha) /
                    (2.0 * std::pow(lambda, 2.0 / (2.0 - alpha)));
        out.c_alpha = std::max(std::max(p1, p2), std::max(p3, p5));
        return out;
    }
    throw std::logic_error("choose_lambda: grid exhausted");  // unreachable: k=1 feasible
}

// ---- Pathwise energy inequality --------------------------------------------

struct EnergyReport {
    double lhs = 0.0;      // ||J h||^2 at t plus the two exponentially weighted integrals
    double rhs = 0.0;      // e^{-2m(t-t') + 2 int g} ||J h||^2 at t'
    double margin = 0.0;   // rhs / lhs
    bool pass = false;
    double c_required = 0.0;  // max over restart intervals of (int g) / theta^gamma
};

// Checks, along one recorded trajectory and one tangent initial datum h, the
// energy inequality
//   ||J_{t',t}h||^2 + int_{t'}^t e^{-2m(t-r)+2 int_r^t g} (||grad J||^2 + ||v J||^2) dr
//     <= e^{-2m(t-t') + 2 int_{t'}^t g} ||h||^2
// with g evaluated per step from the stored (possibly restarted) Wick records.
// All time integrals use the trapezoid rule; tol covers the quadrature error.
inline EnergyReport verify_energy_inequality(const Trajectory& traj, const Field& h,
                                             double t_from, double t_to, double lambda,
                                             double alpha, double tol = 0.05,
                                             double theta_gamma = 0.0) {
    int i0 = traj.index_of(t_from), i1 = traj.index_of(t_to);
    if (i0 >= i1) throw std::invalid_argument("verify_energy_inequality: empty interval");
    double dt = traj.dt;
    LinearizedFlow flow(traj);

    int count = i1 - i0 + 1;
    std::vector<double> jn2(count), gr2(count), vj2(count), gval(count);
    Field scratch;
    std::vector<std::complex<double>> coeffs = fourier_view(h, scratch);
    for (int i = i0; i <= i1; ++i) {
        int r = i - i0;
        Field j = Field::from_fourier(traj.grid, coeffs);
        jn2[r] = inner(j, j);
        Field gj1, gj2f;
        std::tie(gj1, gj2f) = gradient(j);
        gr2[r] = inner(gj1, gj1) + inner(gj2f, gj2f);
        Field vj = multiply(traj.v[static_cast<size_t>(i)], j, /*dealias=*/false);
        vj2[r] = inner(vj, vj);
        const auto& rec = traj.noise.records[static_cast<size_t>(i)];
        double elapsed = std::max(traj.time(i) - rec.birth, 0.5 * dt);
        double c_inf = c_t_infty(traj.grid, traj.m, elapsed);
        double gvs = grad_sup_norm(traj.v[static_cast<size_t>(i)]);
        gval[r] = g_drift(rec.wick, gvs, c_inf, lambda, alpha);
        if (i < i1) flow.step(coeffs, i);
    }

    // Cumulative int_{t_r}^{t} g by trapezoid, measured backwards from t.
    std::vector<double> gint(count, 0.0);
    for (int r = count - 2; r >= 0; --r)
        gint[r] = gint[r + 1] + 0.5 * dt * (gval[r] + gval[r + 1]);

    double integral = 0.0;
    for (int r = 0; r < count; ++r) {
        double w = (r == 0 || r == count - 1) ? 0.5 : 1.0;
        double weight = std::exp(-2.0 * traj.m * (t_to - (t_from + r * dt)) + 2.0 * gint[r]);
        integral += w * dt * weight * (gr2[r] + vj2[r]);
    }

    EnergyReport rep;
    rep.lhs = jn2[count - 1] + integral;
    rep.rhs = std::exp(-2.0 * traj.m * (t_to - t_from) + 2.0 * gint[0]) * jn2[0];
    rep.margin = rep.rhs / rep.lhs;
    rep.pass = rep.margin >= 1.0 / (1.0 + tol);

    // Empirical per-restart-interval constant for the composed bound
    // ||J_{0,t}h||^2 <= e^{-2mt + 2 c theta^gamma N(t)} ||h||^2.
    if (theta_gamma > 0.0) {
        double acc = 0.0;
        for (int r = 0; r + 1 < count; ++r) {
            acc += 0.5 * dt * (gval[r] + gval[r + 1]);
            bool interval_end = traj.noise.records[static_cast<size_t>(i0 + r + 1)].restarted ||
                                r + 2 == count;
            if (interval_end) {
                rep.c_required = std::max(rep.c_required, acc / theta_gamma);
                acc = 0.0;
            }
        }
    }
    return rep;
}

// ---- Contraction and smoothing fits ----------------------------------------

struct NormCurve {
    std::vector<double> t;
    std::vector<Ci> estimate;  // E^{1/p} ||J_{0,t}||, per t
};

// Per-t ensemble estimate E^{1/p} ||J_{0,t}||_{L^2 -> H^kappa}^p over
// independent realizations of the dynamics started from zero data.
inline NormCurve flow_norm_curve(const TorusGrid& g, double m,
                                 const std::vector<double>& t_grid, double kappa,
                                 double p, int replicas, double dt,
                                 std::uint64_t base_seed, const ModelOptions& opts = {},
                                 int power_budget = 40,
                                 std::uint64_t replica_offset = 0, int workers = 1) {
    if (t_grid.empty() || replicas < 1)
        throw std::invalid_argument("flow_norm_curve: bad args");
    double t_max = t_grid.back();
    auto per_replica = parallel_map<std::vector<double>>(replicas, workers, [&](int r) {
        NoiseStream stream(base_seed, replica_offset + static_cast<std::uint64_t>(r));
        Trajectory traj = evolve(Field::zero(g), m, t_max, dt, stream, opts);
        LinearizedFlow flow(traj);
        std::vector<double> vals(t_grid.size());
        for (size_t j = 0; j < t_grid.size(); ++j) {
            OperatorNormEstimate est =
                operator_norm(flow, traj.index_of(t_grid[j]), kappa,
                              NormMethod::PowerIteration, power_budget,
                              base_seed ^ 0x517cc1b727220a95ULL);
            if (!std::isfinite(est.value))
                throw std::runtime_error("flow_norm_curve: non-finite estimate");
            vals[j] = std::pow(est.value, p);
        }
        return vals;
    });
    std::vector<std::vector<double>> samples(t_grid.size());
    for (const auto& vals : per_replica)
        for (size_t j = 0; j < t_grid.size(); ++j) samples[j].push_back(vals[j]);
    NormCurve curve;
    curve.t = t_grid;
    double inv_p = 1.0 / p;
    for (auto& s : samples) {
        if (s.size() == 1) {
            curve.estimate.push_back({std::pow(s[0], inv_p), 0.0, 0.0, 1});
            continue;
        }
        Ci c = mean_ci(s);
        curve.estimate.push_back({std::pow(c.estimate, inv_p),
                                  std::pow(std::max(c.lo, 0.0), inv_p),
                                  std::pow(c.hi, inv_p), c.n});
    }
    return curve;
}

struct RateFit {
    double m = 0.0;
    NormCurve curve;
    LinearFit fit;      // log estimate vs t
    double rate = 0.0;  // -slope
};

struct ContractionReport {
    std::vector<RateFit> rows;
    double m_star_hat = 0.0;       // max over m of (m - r(m))
    bool rates_increasing = true;  // r(m) strictly increasing along the m-list
};

// Fits log E^{1/p}||J_{0,t}||_{L^2 -> L^2} vs t for each mass in the list.
inline ContractionReport contraction_rate(const TorusGrid& g,
                                          const std::vector<double>& m_list,
                                          const std::vector<double>& t_grid, double p,
                                          int replicas, double dt,
                                          std::uint64_t base_seed,
                                          const ModelOptions& opts = {},
                                          int power_budget = 40, int workers = 1) {
    if (t_grid.size() < 4)
        throw std::invalid_argument("contraction_rate: >= 4 t-points required");
    ContractionReport rep;
    rep.m_star_hat = -std::numeric_limits<double>::infinity();
    for (double m : m_list) {
        RateFit row;
        row.m = m;
        row.curve = flow_norm_curve(g, m, t_grid, 0.0, p, replicas, dt, base_seed, opts,
                                    power_budget, 0, workers);
        std::vector<double> logs(t_grid.size());
        for (size_t j = 0; j < t_grid.size(); ++j)
            logs[j] = std::log(row.curve.estimate[j].estimate);
        row.fit = least_squares(t_grid, logs);
        row.rate = -row.fit.slope;
        rep.m_star_hat = std::max(rep.m_star_hat, m - row.rate);
        rep.rows.push_back(std::move(row));
    }
    for (size_t i = 1; i < rep.rows.size(); ++i)
        if (!(rep.rows[i].rate > rep.rows[i - 1].rate)) rep.rates_increasing = false;
    return rep;
}

struct SmoothingReport {
    NormCurve curve;
    LinearFit fit;          // log estimate vs log t
    double exponent = 0.0;  // e-hat: estimate ~ t^{-e-hat} as t -> 0
    double exponent_ci = 0.0;
    double bound = 0.0;     // (kappa + 5 alpha) / 2
    bool pass = false;
};

// Short-time blow-up exponent of E^{1/p} ||J_{0,t}||_{L^2 -> H^kappa}.
inline SmoothingReport smoothing_exponent(const TorusGrid& g, double m, double kappa,
                                          double alpha,
                                          const std::vector<double>& t_grid, double p,
                                          int replicas, double dt,
                                          std::uint64_t base_seed,
                                          const ModelOptions& opts = {},
                                          int power_budget = 40, int workers = 1) {
    if (!(alpha < (1.0 - kappa) / 5.0 || kappa == 0.0))
        throw std::invalid_argument("smoothing_exponent: need alpha < (1-kappa)/5");
    SmoothingReport rep;
    rep.curve = flow_norm_curve(g, m, t_grid, kappa, p, replicas, dt, base_seed, opts,
                                power_budget, 0, workers);
    std::vector<double> lt(t_grid.size()), le(t_grid.size());
    for (size_t j = 0; j < t_grid.size(); ++j) {
        lt[j] = std::log(t_grid[j]);
        le[j] = std::log(rep.curve.estimate[j].estimate);
    }
    rep.fit = least_squares(lt, le);
    rep.exponent = -rep.fit.slope;
    rep.exponent_ci = 1.96 * rep.fit.slope_se;
    rep.bound = 0.5 * (kappa + 5.0 * alpha);
    rep.pass = rep.exponent <= rep.bound + rep.exponent_ci;
    return rep;
}

// ---- Semigroup gradient and the Bakry-Emery identity ------------------------

struct GradientEstimate {
    Field field;
    long used = 0;
    long dropped = 0;  // blow-up replicas
};

// DP_tF(f) = E[ J_{0,t}^* DF(u_t) ], estimated by Monte Carlo.
inline GradientEstimate semigroup_gradient(const CylinderFunctional& F, const Field& f,
                                           double t, double m, double dt, int replicas,
                                           std::uint64_t base_seed,
                                           const ModelOptions& opts = {},
                                           std::uint64_t replica_offset = 0) {
    GradientEstimate out;
    if (t == 0.0) {
        out.field = F.df(f);
        out.used = replicas;
        return out;
    }
    out.field = Field::zero(f.grid());
    for (int r = 0; r < replicas; ++r) {
        NoiseStream stream(base_seed, replica_offset + static_cast<std::uint64_t>(r));
        try {
            Trajectory traj = evolve(f, m, t, dt, stream, opts);
            LinearizedFlow flow(traj);
            Field df = F.df(traj.full_solution(traj.steps()));
            out.field += flow.adjoint_propagate(df, 0, traj.steps());
            ++out.used;
        } catch (const BlowupError&) {
            ++out.dropped;
        }
    }
    if (out.used == 0) throw std::runtime_error("semigroup_gradient: all replicas blew up");
    out.field *= 1.0 / out.used;
    return out;
}

struct BeReport {
    Ci lhs;  // P_t F^2 - (P_t F)^2
    Ci rhs;  // 2 int_0^t P_{t-s} ||DP_s F||^2_{L^2} (f) ds
    bool overlap = false;
    std::vector<double> s_grid;
};

namespace detail {

// s-grid on trajectory times, geometrically refined near s = 0 where the
// integrand can blow up like s^{-kappa}.
inline std::vector<double> be_s_grid(double t, double dt) {
    std::vector<double> s{0.0};
    int steps = static_cast<int>(std::llround(t / dt));
    for (int i = 1; i < steps; i = std::max(i + 1, (i * 7 + 4) / 5)) s.push_back(i * dt);
    s.push_back(t);
    return s;
}

}  // namespace detail

// Both sides of the variance identity
//   P_t F^2 (f) - (P_t F (f))^2 = 2 int_0^t P_{t-s}( ||DP_s F||^2_{L^2} )(f) ds.
// One path per outer replica supplies the states u_{t-s} at every s (common
// random numbers across the s-grid); the inner gradient estimate is split in
// two independent halves so that <A, B> is an unbiased estimate of the squared
// norm.
inline BeReport be_identity_check(const CylinderFunctional& F, const Field& f, double t,
                                  double m, double dt, int outer, int inner_reps,
                                  std::uint64_t base_seed,
                                  const ModelOptions& opts = {}, int workers = 1) {
    if (outer < 8 || inner_reps < 4 || inner_reps % 2 != 0)
        throw std::invalid_argument("be_identity_check: need outer >= 8, even inner >= 4");
    BeReport rep;
    rep.s_grid = detail::be_s_grid(t, dt);
    const int half = inner_reps / 2;

    // Per outer replica: (F(u_t), 2 * trapezoid integral along its own path).
    auto samples = parallel_map<std::pair<double, double>>(outer, workers, [&](int r) {
        NoiseStream stream(base_seed, static_cast<std::uint64_t>(r));
        Trajectory traj = evolve(f, m, t, dt, stream, opts);
        double f_sample = F.value(traj.full_solution(traj.steps()));

        std::vector<double> integrand(rep.s_grid.size());
        for (size_t j = 0; j < rep.s_grid.size(); ++j) {
            double s = rep.s_grid[j];
            Field x = traj.full_solution_at(t - s);
            if (s == 0.0) {
                Field d = F.df(x);
                integrand[j] = inner(d, d);
                continue;
            }
            std::uint64_t tag = 0x100000ULL * static_cast<std::uint64_t>(r + 1) +
                                0x1000ULL * static_cast<std::uint64_t>(j);
            GradientEstimate a = semigroup_gradient(F, x, s, m, dt, half,
                                                    base_seed ^ 0xabcdef12345ULL, opts, tag);
            GradientEstimate b = semigroup_gradient(F, x, s, m, dt, half,
                                                    base_seed ^ 0xabcdef12345ULL, opts,
                                                    tag + 0x800ULL);
            integrand[j] = inner(a.field, b.field);
        }
        double integral = 0.0;
        for (size_t j = 0; j + 1 < rep.s_grid.size(); ++j)
            integral += 0.5 * (rep.s_grid[j + 1] - rep.s_grid[j]) *
                        (integrand[j] + integrand[j + 1]);
        return std::make_pair(f_sample, 2.0 * integral);
    });
    std::vector<double> f_samples, rhs_samples;
    for (const auto& [fs, rs] : samples) {
        f_samples.push_back(fs);
        rhs_samples.push_back(rs);
    }
    rep.lhs = var_ci(f_samples);
    rep.rhs = mean_ci(rhs_samples);
    rep.overlap = rep.lhs.lo <= rep.rhs.hi && rep.rhs.lo <= rep.lhs.hi;
    return rep;
}

// Closed form for the Gaussian control (cubic off) with F(u) = u(h), zero
// initial data: Var u_t(h) = L^2 sum_k |h_k|^2 (1 - e^{-2 lambda_k t}) / lambda_k.
inline double gaussian_linear_variance(const Field& h, double m, double t) {
    const TorusGrid& g = h.grid();
    Field scratch;
    const auto& c = fourier_view(h, scratch);
    double s = 0.0;
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            double lambda = m + g.k2_phys(j1, j2);
            s += std::norm(c[static_cast<size_t>(j1) * g.n + j2]) *
                 -std::expm1(-2.0 * lambda * t) / lambda;
        }
    return s * g.length * g.length;
}

// ---- Spectral gap -----------------------------------------------------------

struct GapEstimate {
    Ci variance;    // Var_nu F by batch means along the chain
    Ci dirichlet;   // E_nu ||DF||^2_{H^{-kappa}}
    double ratio = 0.0;
    bool trivial = false;     // Var and Dirichlet both ~ 0 (constant F)
    bool stationary = false;  // two-half mean diagnostic
    long samples = 0;
};

// Ergodic-average estimate of (Var_nu F, E_nu ||DF||^2_{H^-kappa}) by running
// the dynamics as an MCMC sampler of the invariant measure.
inline GapEstimate spectral_gap_estimate(const CylinderFunctional& F, const TorusGrid& g,
                                         double m, double kappa, double dt,
                                         int burn_in_steps, int samples, int thin,
                                         std::uint64_t base_seed,
                                         const ModelOptions& opts = {}) {
    if (samples < 40 || thin < 1 || burn_in_steps < 0)
        throw std::invalid_argument("spectral_gap_estimate: bad budgets");
    NoiseStream stream(base_seed, 0);
    OuState state(g, m, 0.0);
    Field v = Field::zero(g);
    std::vector<double> f_chain, d_chain;
    f_chain.reserve(static_cast<size_t>(samples));
    long total_steps = static_cast<long>(burn_in_steps) +
                       static_cast<long>(samples) * thin;
    for (long i = 0; i < total_steps; ++i) {
        WickTriple w = make_wick(state);
        double c = (opts.renorm && opts.cubic)
                       ? c_t_infty(g, m, state.elapsed() + 0.5 * dt)
                       : 0.0;
        v = v_step(v, w, c, dt, m, opts, i * dt);
        ou_step(state, dt, stream);
        if (i >= burn_in_steps && (i - burn_in_steps + 1) % thin == 0) {
            Field u = v;
            u += state.field();
            u.ensure_real();
            f_chain.push_back(F.value(u));
            double dn = norm(F.df(u), NormKind::sobolev(-kappa));
            d_chain.push_back(dn * dn);
        }
    }
    GapEstimate est;
    est.samples = static_cast<long>(f_chain.size());
    est.variance = batch_means_var(f_chain);
    est.dirichlet = mean_ci(d_chain);
    if (est.variance.estimate < 1e-14 && est.dirichlet.estimate < 1e-14) {
        est.trivial = true;
        est.stationary = true;
        return est;
    }
    est.ratio = est.variance.estimate / est.dirichlet.estimate;
    size_t hn = f_chain.size() / 2;
    std::vector<double> a(f_chain.begin(), f_chain.begin() + hn);
    std::vector<double> b(f_chain.begin() + hn, f_chain.end());
    double gap = std::abs(mean(a) - mean(b));
    est.stationary = gap <= 2.0 * (std_error(a) + std_error(b)) + 1e-12;
    return est;
}

// Analytic gap ratio of the Gaussian (cubic-off) stationary measure for
// F(u) = u(h): Var/Dirichlet = sum |h_k|^2/lambda_k over sum (1+|k|^2)^{-kappa} |h_k|^2.
inline double gaussian_gap_ratio(const Field& h, double m, double kappa) {
    const TorusGrid& g = h.grid();
    Field scratch;
    const auto& c = fourier_view(h, scratch);
    double num = 0.0, den = 0.0;
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2) {
            double k2 = g.k2_phys(j1, j2);
            double a2 = std::norm(c[static_cast<size_t>(j1) * g.n + j2]);
            num += a2 / (m + k2);
            den += a2 * std::pow(1.0 + k2, -kappa);
        }
    if (den == 0.0) throw std::invalid_argument("gaussian_gap_ratio: zero functional");
    return num / den;
}

// Gaussian stationary variance of u(h) (for validating the chain sampler).
inline double gaussian_stationary_variance(const Field& h, double m) {
    const TorusGrid& g = h.grid();
    Field scratch;
    const auto& c = fourier_view(h, scratch);
    double s = 0.0;
    for (int j1 = 0; j1 < g.n; ++j1)
        for (int j2 = 0; j2 < g.n; ++j2)
            s += std::norm(c[static_cast<size_t>(j1) * g.n + j2]) /
                 (m + g.k2_phys(j1, j2));
    return s * g.length * g.length;
}

}  // namespace phi4
