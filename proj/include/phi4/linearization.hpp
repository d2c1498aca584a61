#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "phi4/dynamics.hpp"

namespace phi4 {

namespace detail {

// Dealiased multiplication by a fixed real field, with the padded real-space
// samples cached. As an L^2 operator this is (truncate o multiply o pad) and
// is exactly self-adjoint, which the adjoint pass relies on.
class PaddedMultiplier {
public:
    PaddedMultiplier() = default;
    PaddedMultiplier(const Field& q, int pad) : n_(q.n()), m_(pad) {
        Field scratch;
        auto padded = to_padded_real(fourier_view(q, scratch), n_, m_);
        samples_.resize(padded.size());
        for (size_t i = 0; i < padded.size(); ++i) samples_[i] = padded[i].real();
    }

    bool empty() const { return samples_.empty(); }

    std::vector<std::complex<double>> apply(
        const std::vector<std::complex<double>>& coeffs) const {
        auto buf = to_padded_real(coeffs, n_, m_);
        for (size_t i = 0; i < buf.size(); ++i) buf[i] *= samples_[i];
        fft2(buf.data(), m_, FFTW_FORWARD);
        double inv = 1.0 / (static_cast<double>(m_) * m_);
        for (auto& z : buf) z *= inv;
        return truncate_spectrum(buf, m_, n_);
    }

private:
    int n_ = 0, m_ = 0;
    std::vector<double> samples_;
};

}  // namespace detail

// The linearized flow along one trajectory: per-step multiplication by the
// frozen potential v^2 + 2 v W1 + W2 (dealiased) plus the c_{t,inf} counter
// term, stepped with the same exponential-Euler scheme as the nonlinear run.
class LinearizedFlow {
public:
    explicit LinearizedFlow(const Trajectory& traj) : traj_(&traj) {
        const TorusGrid& g = traj.grid;
        int steps = traj.steps();
        if (traj.opts.cubic) {
            potentials_.reserve(static_cast<size_t>(steps));
            for (int i = 0; i < steps; ++i) {
                const Field& v = traj.v[static_cast<size_t>(i)];
                const WickTriple& w = traj.noise.records[static_cast<size_t>(i)].wick;
                Field q = multiply(v, v);
                q += 2.0 * multiply(v, w.w1);
                q += w.w2;
                potentials_.emplace_back(to_fourier(q), 3 * g.n / 2);
            }
        }
        exp_.resize(static_cast<size_t>(g.points()));
        phi_.resize(static_cast<size_t>(g.points()));
        for (int j1 = 0; j1 < g.n; ++j1)
            for (int j2 = 0; j2 < g.n; ++j2) {
                size_t i = static_cast<size_t>(j1) * g.n + j2;
                double lambda = traj.m + g.k2_phys(j1, j2);
                exp_[i] = std::exp(-lambda * traj.dt);
                phi_[i] = phi1(lambda * traj.dt);
            }
    }

    const Trajectory& trajectory() const { return *traj_; }

    // J over step i: Jhat <- E Jhat + dt Phi (-3 q Jhat + 3 c Jhat).
    void step(std::vector<std::complex<double>>& coeffs, int i) const {
        std::vector<std::complex<double>> force = potential_term(coeffs, i);
        double dt = traj_->dt;
        for (size_t k = 0; k < coeffs.size(); ++k)
            coeffs[k] = exp_[k] * coeffs[k] + dt * phi_[k] * force[k];
    }

    // Exact transpose of step: ghat <- E ghat + (-3 q + 3 c)(dt Phi ghat).
    void step_adjoint(std::vector<std::complex<double>>& coeffs, int i) const {
        std::vector<std::complex<double>> weighted(coeffs.size());
        double dt = traj_->dt;
        for (size_t k = 0; k < coeffs.size(); ++k) weighted[k] = dt * phi_[k] * coeffs[k];
        std::vector<std::complex<double>> force = potential_term(weighted, i);
        for (size_t k = 0; k < coeffs.size(); ++k)
            coeffs[k] = exp_[k] * coeffs[k] + force[k];
    }

    Field propagate(const Field& h, int i_from, int i_to) const {
        check_range(i_from, i_to);
        Field scratch;
        std::vector<std::complex<double>> coeffs = fourier_view(h, scratch);
        for (int i = i_from; i < i_to; ++i) step(coeffs, i);
        return Field::from_fourier(traj_->grid, std::move(coeffs));
    }

    Field adjoint_propagate(const Field& gfield, int i_from, int i_to) const {
        check_range(i_from, i_to);
        Field scratch;
        std::vector<std::complex<double>> coeffs = fourier_view(gfield, scratch);
        for (int i = i_to - 1; i >= i_from; --i) step_adjoint(coeffs, i);
        return Field::from_fourier(traj_->grid, std::move(coeffs));
    }

private:
    std::vector<std::complex<double>> potential_term(
        const std::vector<std::complex<double>>& coeffs, int i) const {
        std::vector<std::complex<double>> force(coeffs.size(), 0.0);
        if (traj_->opts.cubic) {
            force = potentials_[static_cast<size_t>(i)].apply(coeffs);
            for (auto& z : force) z *= -3.0;
            double c = traj_->c_mid[static_cast<size_t>(i)];
            for (size_t k = 0; k < force.size(); ++k) force[k] += 3.0 * c * coeffs[k];
        }
        return force;
    }

    void check_range(int i_from, int i_to) const {
        if (i_from < 0 || i_to > traj_->steps() || i_from > i_to)
            throw std::invalid_argument("LinearizedFlow: step range out of bounds");
    }

    const Trajectory* traj_;
    std::vector<detail::PaddedMultiplier> potentials_;
    std::vector<double> exp_, phi_;
};

inline Field propagate(const Field& h, const Trajectory& traj, double t_from, double t_to) {
    LinearizedFlow flow(traj);
    return flow.propagate(h, traj.index_of(t_from), traj.index_of(t_to));
}

inline Field adjoint_propagate(const Field& g, const Trajectory& traj, double t_from,
                               double t_to) {
    LinearizedFlow flow(traj);
    return flow.adjoint_propagate(g, traj.index_of(t_from), traj.index_of(t_to));
}

// Deterministic Gaussian probe field, unit L^2 norm.
inline Field random_unit_field(const TorusGrid& g, std::uint64_t seed, std::uint64_t id) {
    NoiseStream stream(seed, id);
    std::vector<double> x(static_cast<size_t>(g.points()));
    for (auto& v : x) v = stream.normal();
    Field f = Field::from_real(g, std::move(x));
    double nrm = std::sqrt(inner(f, f));
    f *= 1.0 / nrm;
    return f;
}

enum class NormMethod { Probes, PowerIteration };

struct OperatorNormEstimate {
    double value = 0.0;
    bool converged = true;
    int iterations = 0;
    std::vector<double> probe_values;
};

// ||J_{0,t}||_{L^2 -> H^kappa} of one realization: max Rayleigh probe or the
// dominant singular value of Lambda^{kappa/2} J via power iteration on
// J* Lambda^kappa J.
inline OperatorNormEstimate operator_norm(const LinearizedFlow& flow, int i_to,
                                          double kappa, NormMethod method, int budget,
                                          std::uint64_t probe_seed = 7771) {
    if (budget <= 0) throw std::invalid_argument("operator_norm: budget > 0 required");
    OperatorNormEstimate out;
    if (method == NormMethod::Probes) {
        for (int b = 0; b < budget; ++b) {
            Field h = random_unit_field(flow.trajectory().grid, probe_seed, static_cast<std::uint64_t>(b));
            Field jh = flow.propagate(h, 0, i_to);
            double val = norm(jh, NormKind::sobolev(kappa));
            out.probe_values.push_back(val);
            out.value = std::max(out.value, val);
        }
        out.iterations = budget;
        return out;
    }
    Field x = random_unit_field(flow.trajectory().grid, probe_seed, 0);
    double sigma = 0.0;
    for (int it = 0; it < budget; ++it) {
        Field y = flow.propagate(x, 0, i_to);
        Field z = bessel_multiplier(y, 2.0 * kappa);  // Lambda^kappa
        Field w = flow.adjoint_propagate(z, 0, i_to);
        double quad = inner(x, w);
        double nx = inner(x, x);
        double next = std::sqrt(std::max(quad, 0.0) / nx);
        out.iterations = it + 1;
        double wn = std::sqrt(inner(w, w));
        if (wn == 0.0) {
            out.value = 0.0;
            return out;
        }
        x = (1.0 / wn) * w;
        bool settled = sigma > 0.0 && std::abs(next - sigma) <= 1e-6 * next;
        sigma = next;
        if (settled) {
            out.value = sigma;
            out.converged = true;
            return out;
        }
    }
    out.value = sigma;
    out.converged = false;
    return out;
}

// Relative linearization error || (v^{f+eps h} - v^f)/eps - J h || / || J h ||
// at time T, both nonlinear runs driven by the identical noise path.
inline double finite_diff_check(const Field& f, const Field& h, double eps, double T,
                                double dt, double m, NoiseStream stream,
                                const ModelOptions& opts = {},
                                const std::optional<StoppingConfig>& stopping =
                                    std::nullopt) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps > 0 required");
    NoisePath path = build_noise_path(f.grid(), m, T, dt, stream, stopping, opts.noise);
    Trajectory base = evolve_over(f, path, T, opts);
    Field fp = f;
    fp += eps * h;
    Trajectory bumped = evolve_over(fp, path, T, opts);
    LinearizedFlow flow(base);
    Field jh = flow.propagate(h, 0, base.steps());
    Field diff = bumped.v.back();
    diff -= base.v.back();
    diff *= 1.0 / eps;
    diff -= jh;
    return std::sqrt(inner(diff, diff) / inner(jh, jh));
}

}  // namespace phi4
