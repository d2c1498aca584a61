#include <doctest.h>

#include <cmath>
#include <vector>

#include "phi4/estimators.hpp"

using namespace phi4;

TEST_CASE("drift functional evaluates the closed formula") {
    // Zero inputs give zero.
    CHECK(g_drift_from_norms(0.0, 0.0, 0.0, 0.0, 1.0, 0.5) == 0.0);
    // Frozen value from independent direct arithmetic of the five terms at
    // w1 = w2 = 1, grad = 0, c = 0, lambda = 1, alpha = 1/2:
    //   1/2 + 0 + (1/2)/2^2 + 1 + 2^{1/2} (3/2)/2 = 2.6856601717798212.
    CHECK(g_drift_from_norms(1.0, 1.0, 0.0, 0.0, 1.0, 0.5) ==
          doctest::Approx(2.6856601717798212).epsilon(1e-12));
    CHECK_THROWS(g_drift_from_norms(1.0, 1.0, 0.0, 0.0, 0.0, 0.5));
    CHECK_THROWS(g_drift_from_norms(1.0, 1.0, 0.0, 0.0, 1.0, 1.0));
}

TEST_CASE("drift formula agrees with an independently coded evaluation") {
    auto oracle = [](double w1, double w2, double gv, double c, double l, double a) {
        double s = 0.0;
        s += 0.5 * std::pow(w1, 2) / l;
        s += 0.5 * (1.0 + a) * std::pow(l, -0.5 * (1.0 + a)) *
             std::pow(w1, 2.0 / (1.0 + a)) * std::pow(gv, 2.0 * a / (1.0 + a));
        s += 0.5 * (1.0 - a) * std::pow(0.5, a / (1.0 - a)) *
             std::pow(w1 * w1 / (l * l), 1.0 / (1.0 - a));
        s += w2;
        s += 0.5 * (2.0 - a) * std::pow(2.0, a) *
             std::pow(w2 / l, 2.0 / (2.0 - a));
        s += 3.0 * c;
        return s;
    };
    // s3 check: (1-a)/2^{1/(1-a)} l^{-2/(1-a)} w1^{2/(1-a)}
    //         = (1-a)/2 * (1/2)^{a/(1-a)} * (w1^2/l^2)^{1/(1-a)}.
    struct Case { double w1, w2, gv, c, l, a; };
    for (const Case& cs : {Case{2.0, 3.0, 1.5, 0.1, 0.5, 0.3},
                           Case{0.7, 0.2, 4.0, 0.0, 0.25, 0.6},
                           Case{5.0, 1.0, 0.3, 2.0, 0.16, 0.9}}) {
        double a = g_drift_from_norms(cs.w1, cs.w2, cs.gv, cs.c, cs.l, cs.a);
        double b = oracle(cs.w1, cs.w2, cs.gv, cs.c, cs.l, cs.a);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
    // Monotone nonincreasing in lambda (every lambda power is negative).
    CHECK(g_drift_from_norms(2.0, 3.0, 1.5, 0.1, 0.25, 0.3) >=
          g_drift_from_norms(2.0, 3.0, 1.5, 0.1, 0.5, 0.3));
}

TEST_CASE("lambda is the largest feasible grid point") {
    for (double alpha : {0.1, 0.3, 0.5, 0.9}) {
        LambdaChoice lc = choose_lambda(alpha);
        CHECK(lambda_feasible(lc.lambda, alpha));
        CHECK(!lambda_feasible(lc.lambda + 0.01, alpha));
        // Reported constant is the max of the lambda-dependent prefactors.
        double l = lc.lambda;
        double p1 = 0.5 / l;
        double p2 = 0.5 * (1.0 + alpha) * std::pow(l, -0.5 * (1.0 + alpha));
        double p3 = (1.0 - alpha) * std::pow(2.0, -1.0 / (1.0 - alpha)) *
                    std::pow(l, -2.0 / (1.0 - alpha));
        double p5 = 0.5 * (2.0 - alpha) * std::pow(2.0, alpha) *
                    std::pow(l, -2.0 / (2.0 - alpha));
        CHECK(lc.c_alpha ==
              doctest::Approx(std::max({p1, p2, p3, p5})).epsilon(1e-12));
    }
    // The vJ absorption lambda <= 1/4 caps every alpha.
    CHECK(choose_lambda(0.3).lambda <= 0.25);
    CHECK_THROWS(choose_lambda(0.0));
}

TEST_CASE("cylinder functional derivative matches directional differences") {
    TorusGrid g(8, 1.0);
    Field h1 = Field::mode(g, 1, 0, 0.5);
    Field h2 = Field::mode(g, 0, 1, 0.5);
    Field u = random_unit_field(g, 21, 0);
    Field dir = random_unit_field(g, 21, 1);
    double eps = 1e-5;
    for (const CylinderFunctional& F :
         {quadratic_functional({h1, h2}, {1.0, 0.5}), tanh_functional({h1, h2}),
          linear_functional(h1)}) {
        double fd =
            (F.value(u + eps * dir) - F.value(u + (-eps) * dir)) / (2.0 * eps);
        double an = inner(F.df(u), dir);
        CHECK(fd == doctest::Approx(an).epsilon(1e-6));
    }
    CHECK_THROWS(quadratic_functional({h1}, {1.0, 2.0}));
    CHECK_THROWS(tanh_functional({}));
}

TEST_CASE("energy inequality holds on a restarted noisy trajectory") {
    TorusGrid g(8, 1.0);
    StoppingConfig sc;
    sc.theta = 0.1;
    sc.alpha = 0.3;
    Trajectory traj = evolve(Field::zero(g), 1.0, 0.2, 0.01, NoiseStream(8, 0),
                             ModelOptions{}, sc);
    LambdaChoice lc = choose_lambda(0.3);
    // Smooth the tangent datum so the initial layer of ||grad J||^2 is
    // resolved by the trapezoid rule on the trajectory's time grid.
    Field h = heat_semigroup(random_unit_field(g, 17, 0), 0.05, 1.0);
    h *= 1.0 / std::sqrt(inner(h, h));
    EnergyReport rep = verify_energy_inequality(traj, h, 0.0, 0.2, lc.lambda, 0.3,
                                                0.05, std::pow(sc.theta, sc.gamma()));
    CHECK(rep.pass);
    CHECK(rep.margin >= 1.0 / 1.05);
    CHECK(rep.c_required > 0.0);
    CHECK_THROWS(verify_energy_inequality(traj, h, 0.1, 0.1, lc.lambda, 0.3));
}

TEST_CASE("semigroup gradient at t=0 returns the bare derivative bitwise") {
    TorusGrid g(8, 1.0);
    Field h1 = Field::mode(g, 1, 0, 0.5);
    CylinderFunctional F = quadratic_functional({h1}, {1.0});
    Field f = random_unit_field(g, 33, 0);
    GradientEstimate est = semigroup_gradient(F, f, 0.0, 1.0, 0.01, 5, 1);
    Field want = F.df(f);
    Field got = to_real(est.field), ref = to_real(want);
    const auto& a = got.real_data();
    const auto& b = ref.real_data();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    CHECK(est.used == 5);
    CHECK(est.dropped == 0);
}

TEST_CASE("potential-free norm curve decays with slope exactly -m") {
    TorusGrid g(8, 1.0);
    ModelOptions opts;
    opts.cubic = false;
    double m = 2.0;
    std::vector<double> t_grid{0.05, 0.1, 0.15, 0.2};
    NormCurve curve = flow_norm_curve(g, m, t_grid, 0.0, 2.0, 1, 0.01, 3, opts, 60);
    std::vector<double> logs;
    for (const Ci& c : curve.estimate) logs.push_back(std::log(c.estimate));
    LinearFit fit = least_squares(t_grid, logs);
    CHECK(std::abs(fit.slope + m) <= 1e-6);
    CHECK(fit.r2 > 1.0 - 1e-9);
}

TEST_CASE("variance identity s-grid refines geometrically from both ends") {
    auto s = detail::be_s_grid(0.25, 0.0125);  // 20 steps
    CHECK(s.front() == 0.0);
    CHECK(s.back() == 0.25);
    CHECK(s[1] == doctest::Approx(0.0125));
    for (size_t i = 1; i < s.size(); ++i) {
        CHECK(s[i] > s[i - 1]);
        if (i + 1 < s.size()) CHECK(s[i + 1] - s[i] <= 2.0 * (s[i] - s[i - 1]) + 1e-12);
    }
}

TEST_CASE("variance identity CIs overlap on a small noisy problem") {
    TorusGrid g(8, 1.0);
    Field h = Field::mode(g, 1, 0, 0.5);
    CylinderFunctional F = quadratic_functional({h}, {1.0});
    BeReport rep = be_identity_check(F, Field::zero(g), 0.05, 5.0, 0.0125, 12, 4, 2);
    CHECK(rep.lhs.n == 12);
    CHECK(rep.overlap);
    CHECK_THROWS(be_identity_check(F, Field::zero(g), 0.05, 5.0, 0.0125, 4, 4, 2));
    CHECK_THROWS(be_identity_check(F, Field::zero(g), 0.05, 5.0, 0.0125, 12, 3, 2));
}

TEST_CASE("Gaussian closed forms for linear functionals") {
    TorusGrid g(8, 2.0);
    double m = 1.5, t = 0.4, kappa = 0.5;
    Field h = Field::mode(g, 1, 0, 0.5);  // coefficients 1/2 at +-(1,0)
    double k2 = std::pow(2.0 * kPi / g.length, 2);
    double lambda = m + k2;
    double sum_h2 = 2 * 0.25;
    double want_var = g.length * g.length * sum_h2 * -std::expm1(-2 * lambda * t) / lambda;
    CHECK(gaussian_linear_variance(h, m, t) == doctest::Approx(want_var).epsilon(1e-12));
    double want_stat = g.length * g.length * sum_h2 / lambda;
    CHECK(gaussian_stationary_variance(h, m) == doctest::Approx(want_stat).epsilon(1e-12));
    double want_ratio = std::pow(1.0 + k2, kappa) / lambda;
    CHECK(gaussian_gap_ratio(h, m, kappa) == doctest::Approx(want_ratio).epsilon(1e-12));
    CHECK_THROWS(gaussian_gap_ratio(Field::zero(g), m, kappa));
}

TEST_CASE("gap estimate flags constant functionals as trivial") {
    TorusGrid g(8, 1.0);
    CylinderFunctional F;
    F.h.push_back(Field::mode(g, 1, 0, 0.5));
    F.outer = [](const std::vector<double>&) { return 1.0; };
    F.outer_grad = [](const std::vector<double>& x) {
        return std::vector<double>(x.size(), 0.0);
    };
    GapEstimate est = spectral_gap_estimate(F, g, 1.0, 0.5, 0.02, 10, 40, 1, 4);
    CHECK(est.trivial);
    CHECK(est.stationary);
    CHECK_THROWS(spectral_gap_estimate(F, g, 1.0, 0.5, 0.02, 10, 30, 1, 4));
}

TEST_CASE("Gaussian chain recovers the analytic gap ratio") {
    TorusGrid g(8, 1.0);
    ModelOptions opts;
    opts.cubic = false;
    double m = 5.0, kappa = 0.5;
    Field h = Field::mode(g, 1, 0, 0.5);
    CylinderFunctional F = linear_functional(h);
    GapEstimate est = spectral_gap_estimate(F, g, m, kappa, 0.02, 200, 300, 2, 6, opts);
    double oracle = gaussian_gap_ratio(h, m, kappa);
    CHECK(std::abs(est.ratio - oracle) / oracle < 0.5);
    CHECK(est.stationary);
    // The Dirichlet term of a linear functional is deterministic.
    double want = std::pow(norm(F.df(Field::zero(g)), NormKind::sobolev(-kappa)), 2);
    CHECK(est.dirichlet.estimate == doctest::Approx(want).epsilon(1e-12));
}
