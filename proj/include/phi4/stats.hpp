#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace phi4 {

struct Ci {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    long n = 0;
};

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("mean: empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / x.size();
}

inline double sample_var(const std::vector<double>& x) {
    if (x.size() < 2) throw std::invalid_argument("sample_var: need n >= 2");
    double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / (x.size() - 1);
}

inline double std_error(const std::vector<double>& x) {
    return std::sqrt(sample_var(x) / x.size());
}

// 95% normal CI of the mean.
inline Ci mean_ci(const std::vector<double>& x) {
    double m = mean(x), se = std_error(x);
    return {m, m - 1.96 * se, m + 1.96 * se, static_cast<long>(x.size())};
}

// Variance with a normal-approximation CI via the fourth central moment.
inline Ci var_ci(const std::vector<double>& x) {
    double m = mean(x);
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        double d = v - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= x.size();
    m4 /= x.size();
    double se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / x.size());
    return {m2, m2 - 1.96 * se, m2 + 1.96 * se, static_cast<long>(x.size())};
}

// Wilson score interval for a binomial proportion at normal quantile z.
inline Ci wilson_ci(long successes, long n, double z = 1.96) {
    if (n <= 0) throw std::invalid_argument("wilson_ci: n > 0 required");
    double p = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {p, std::max(center - half, 0.0), std::min(center + half, 1.0), n};
}

inline double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(x.begin(), x.end());
    double pos = q * (x.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, x.size() - 1);
    double w = pos - lo;
    return (1.0 - w) * x[lo] + w * x[hi];
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_se = 0.0;  // standard error of the slope
};

inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares: need matched samples, n >= 2");
    size_t n = x.size();
    double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    f.slope_se = n > 2 ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;
    return f;
}

// Variance of a correlated chain via non-overlapping batch means.
inline Ci batch_means_var(const std::vector<double>& chain, int batches = 20) {
    if (static_cast<int>(chain.size()) < 2 * batches)
        throw std::invalid_argument("batch_means_var: chain too short");
    size_t bs = chain.size() / batches;
    double overall = 0.0;
    for (double v : chain) overall += v;
    overall /= chain.size();
    // Plain sample variance of the chain as the point estimate; batch means
    // give the uncertainty of the mean used inside it.
    double v2 = 0.0;
    for (double v : chain) v2 += (v - overall) * (v - overall);
    v2 /= (chain.size() - 1);
    std::vector<double> bmeans(static_cast<size_t>(batches));
    std::vector<double> bvars(static_cast<size_t>(batches));
    for (int b = 0; b < batches; ++b) {
        double s = 0.0;
        for (size_t i = 0; i < bs; ++i) s += chain[b * bs + i];
        bmeans[static_cast<size_t>(b)] = s / bs;
        double sv = 0.0;
        for (size_t i = 0; i < bs; ++i) {
            double d = chain[b * bs + i] - bmeans[static_cast<size_t>(b)];
            sv += d * d;
        }
        bvars[static_cast<size_t>(b)] = sv / (bs - 1);
    }
    double se = std_error(bvars);
    return {v2, v2 - 1.96 * se, v2 + 1.96 * se, static_cast<long>(chain.size())};
}

}  // namespace phi4
