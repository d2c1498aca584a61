#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "phi4/stats.hpp"
#include "phi4/wick.hpp"

namespace phi4 {

// gamma = (1 - alpha(1+2*eps)) / (1 + alpha).
inline double gamma_exponent(double alpha, double eps) {
    if (!(alpha > 0.0 && eps > 0.0 && alpha * (1.0 + 2.0 * eps) < 1.0))
        throw std::invalid_argument("gamma_exponent: need alpha,eps > 0, alpha(1+2eps) < 1");
    return (1.0 - alpha * (1.0 + 2.0 * eps)) / (1.0 + alpha);
}

// Restart rule of the stopping-time scheme: barrier eta on the C^{-alpha}
// norms of the restarted Wick triple, interval cap theta.
struct StoppingConfig {
    double eta = std::numeric_limits<double>::infinity();
    double theta = 0.5;
    double alpha = 0.3;
    double epsilon = 0.1;

    double gamma() const { return gamma_exponent(alpha, epsilon); }

    void validate() const {
        if (!(theta > 0.0 && theta < 1.0))
            throw std::invalid_argument("StoppingConfig: theta in (0,1) required");
        if (!(eta > 0.0)) throw std::invalid_argument("StoppingConfig: eta > 0 required");
        gamma_exponent(alpha, epsilon);  // range checks
    }
};

// The realized restart times tau_1 < tau_2 < ... of one path, with the cause
// of each (theta-cap vs barrier hit).
struct StoppingRecord {
    std::vector<double> taus;
    std::vector<bool> capped;

    // N(t) = inf{ n >= 1 : tau_n >= t }, recomputed from the tau list.
    int count(double t) const {
        for (size_t i = 0; i < taus.size(); ++i)
            if (taus[i] >= t - 1e-12) return static_cast<int>(i) + 1;
        throw std::out_of_range("StoppingRecord::count: t beyond recorded horizon");
    }
    double last_tau() const { return taus.empty() ? 0.0 : taus.back(); }
};

struct EtaCalibration {
    double eta = 0.0;
    Ci exceedance;        // empirical P(sup >= eta) with Wilson CI
    double upper_bound;   // one-sided 95% upper confidence bound used
    int replicas = 0;
};

// Smallest grid-searched eta whose one-sided 95% upper confidence bound on
// P(sup_{t<=1} max_k ||W_k||_{-alpha} >= eta) is below 1/4. Since the first
// barrier crossing before any theta <= 1 forces the sup over [0,1] above eta,
// this certifies the 1/4 condition uniformly in theta.
inline EtaCalibration calibrate_eta_from_sups(const std::vector<double>& sups) {
    int replicas = static_cast<int>(sups.size());
    if (replicas < 400)
        throw std::invalid_argument("calibrate_eta: replicas >= 400 required");
    double top = *std::max_element(sups.begin(), sups.end());
    const int grid_points = 400;
    double step = top / grid_points;
    for (int j = 1; j <= grid_points + 1; ++j) {
        double eta = j * step;
        long exceed = 0;
        for (double s : sups)
            if (s >= eta) ++exceed;
        Ci ci = wilson_ci(exceed, replicas, 1.645);  // one-sided 95%
        if (ci.hi < 0.25) {
            EtaCalibration out;
            out.eta = eta;
            out.exceedance = wilson_ci(exceed, replicas);
            out.upper_bound = ci.hi;
            out.replicas = replicas;
            return out;
        }
    }
    throw std::runtime_error("calibrate_eta: search range exhausted");
}

inline EtaCalibration calibrate_eta(const TorusGrid& g, double m, double alpha,
                                    int replicas, std::uint64_t base_seed,
                                    double dt = 0.01, std::uint64_t replica_offset = 0,
                                    int workers = 1) {
    if (replicas < 400)
        throw std::invalid_argument("calibrate_eta: replicas >= 400 required");
    return calibrate_eta_from_sups(sup_norm_profile(g, m, 1.0, dt, alpha, base_seed,
                                                    replicas, replica_offset, workers));
}

struct TailEstimate {
    Ci probability;     // empirical P(N(t) >= n)
    double bound;       // 2^{-n} e^{(2 ln 2 / theta) t}
    bool within_bound;  // CI-adjusted: lower CI end <= bound
    long events;        // observed count of N(t) >= n
};

inline TailEstimate tail_estimate(const std::vector<StoppingRecord>& records, double t,
                                  int n, double theta) {
    if (records.size() < 1000)
        throw std::invalid_argument("tail_estimate: >= 1000 records required");
    long hits = 0;
    for (const auto& r : records)
        if (r.count(t) >= n) ++hits;
    TailEstimate e;
    e.probability = wilson_ci(hits, static_cast<long>(records.size()));
    e.bound = std::pow(2.0, -n) * std::exp(2.0 * std::log(2.0) / theta * t);
    e.within_bound = e.probability.lo <= e.bound;
    e.events = hits;
    return e;
}

struct ExpMomentEstimate {
    Ci value;          // E^{1/p} exp(p c theta^gamma N(t))
    bool overflowed;   // theta above the empirical theta_0 for this sample
};

// Monte Carlo estimate of E^{1/p} exp(p c theta^gamma N(t)).
inline ExpMomentEstimate exp_moment(const std::vector<StoppingRecord>& records, double p,
                                    double c, double theta, double gamma, double t) {
    if (!(c >= 0.0)) throw std::invalid_argument("exp_moment: c >= 0 required");
    ExpMomentEstimate out;
    out.overflowed = false;
    std::vector<double> samples;
    samples.reserve(records.size());
    double rate = p * c * std::pow(theta, gamma);
    for (const auto& r : records) {
        double e = std::exp(rate * r.count(t));
        if (!std::isfinite(e)) {
            out.overflowed = true;
            return out;
        }
        samples.push_back(e);
    }
    Ci m = mean_ci(samples);
    double inv_p = 1.0 / p;
    out.value = {std::pow(m.estimate, inv_p), std::pow(std::max(m.lo, 0.0), inv_p),
                 std::pow(m.hi, inv_p), m.n};
    return out;
}

}  // namespace phi4
