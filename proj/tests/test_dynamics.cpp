#include <doctest.h>

#include <cmath>
#include <optional>

#include "phi4/dynamics.hpp"

using namespace phi4;

namespace {

WickTriple zero_wick(const TorusGrid& g) {
    WickTriple w;
    w.w1 = Field::zero(g);
    w.w2 = Field::zero(g);
    w.w3 = Field::zero(g);
    return w;
}

}  // namespace

TEST_CASE("one step on constant data reduces to the scalar exponential Euler map") {
    TorusGrid g(8, 1.0);
    double a = 0.7, m = 1.3, dt = 0.05, c = 0.2;
    Field v = Field::constant(g, a);
    Field next = v_step(v, zero_wick(g), c, dt, m, ModelOptions{}, 0.0);
    double expected =
        std::exp(-m * dt) * a + dt * phi1(m * dt) * (-a * a * a + 3.0 * c * a);
    Field next_real = to_real(next);
    for (double x : next_real.real_data())
        CHECK(x == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("with the nonlinearity off one step is the exact heat semigroup") {
    TorusGrid g(16, 1.0);
    Field v = Field::mode(g, 2, 1, std::complex<double>(0.4, 0.1));
    v += Field::constant(g, 0.3);
    ModelOptions opts;
    opts.cubic = false;
    double m = 2.0, dt = 0.03;
    Field got = v_step(v, zero_wick(g), 0.0, dt, m, opts, 0.0);
    Field want = heat_semigroup(v, dt, m);
    Field diff = to_real(got) - to_real(want);
    CHECK(diff.max_abs() < 1e-14);
}

TEST_CASE("overflowing data raises a blow-up error with the failure time") {
    TorusGrid g(8, 1.0);
    Field v = Field::constant(g, 1e4);
    CHECK_THROWS_AS(v_step(v, zero_wick(g), 0.0, 0.1, 1.0, ModelOptions{}, 0.7),
                    BlowupError);
    try {
        v_step(v, zero_wick(g), 0.0, 0.1, 1.0, ModelOptions{}, 0.7);
    } catch (const BlowupError& e) {
        CHECK(e.time == doctest::Approx(0.8));
    }
}

TEST_CASE("runs are bit-exact replays of the same stream") {
    TorusGrid g(8, 1.0);
    Field f = Field::mode(g, 1, 0, 0.2);
    Trajectory t1 = evolve(f, 1.0, 0.1, 0.01, NoiseStream(5, 3));
    Trajectory t2 = evolve(f, 1.0, 0.1, 0.01, NoiseStream(5, 3));
    const auto& a = t1.v.back().real_data();
    const auto& b = t2.v.back().real_data();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    // The prebuilt-path route is the same computation.
    NoisePath path = build_noise_path(g, 1.0, 0.1, 0.01, NoiseStream(5, 3), std::nullopt);
    Trajectory t3 = evolve_over(f, path, 0.1, ModelOptions{});
    const auto& c = t3.v.back().real_data();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("an infinite barrier makes restarts exactly theta-periodic") {
    TorusGrid g(8, 1.0);
    StoppingConfig sc;
    sc.theta = 0.1;  // eta stays at +infinity
    NoisePath path = build_noise_path(g, 1.0, 0.3, 0.02, NoiseStream(11, 0), sc);
    REQUIRE(path.stopping.taus.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(path.stopping.taus[i] == doctest::Approx(0.1 * (i + 1)).epsilon(1e-12));
        CHECK(path.stopping.capped[i]);
    }
    CHECK(path.stopping.count(0.05) == 1);
    CHECK(path.stopping.count(0.25) == 3);
    // Restart bookkeeping on the per-step records.
    int restarts = 0;
    for (const auto& rec : path.records)
        if (rec.restarted) {
            ++restarts;
            CHECK(to_real(rec.wick.w1).max_abs() == 0.0);  // fresh driver
            CHECK(rec.rebase.grid() == g);                 // pre-restart field kept
        }
    CHECK(restarts == 3);
}

TEST_CASE("the full solution is continuous across a restart") {
    TorusGrid g(8, 1.0);
    StoppingConfig sc;
    sc.theta = 0.1;
    Trajectory traj = evolve(Field::zero(g), 1.0, 0.2, 0.02, NoiseStream(21, 0),
                             ModelOptions{}, sc);
    // At the first restart index the decomposition was re-based: v jumped by
    // exactly the pre-restart W1, and the new W1 is zero, so u = v + W1 has no
    // jump contributed by the bookkeeping itself.
    int i_restart = traj.index_of(0.1);
    const auto& rec = traj.noise.records[static_cast<size_t>(i_restart)];
    REQUIRE(rec.restarted);
    Field u = traj.full_solution(i_restart);
    Field direct = traj.v[static_cast<size_t>(i_restart)];
    Field diff = to_real(u) - to_real(direct);
    CHECK(diff.max_abs() == 0.0);  // W1 vanishes right after the restart
}

TEST_CASE("horizon and step validation") {
    TorusGrid g(8, 1.0);
    CHECK_THROWS(build_noise_path(g, 1.0, 0.0, 0.01, NoiseStream(1, 0), std::nullopt));
    CHECK_THROWS(build_noise_path(g, 1.0, 0.105, 0.01, NoiseStream(1, 0), std::nullopt));
    NoisePath path = build_noise_path(g, 1.0, 0.05, 0.01, NoiseStream(1, 0), std::nullopt);
    CHECK_THROWS(evolve_over(Field::zero(g), path, 0.1, ModelOptions{}));
    Trajectory traj = evolve_over(Field::zero(g), path, 0.05, ModelOptions{});
    CHECK(traj.steps() == 5);
    CHECK(traj.index_of(0.03) == 3);
    CHECK_THROWS(traj.index_of(0.033));
}

TEST_CASE("coming-down sups concentrate regardless of the initial magnitude") {
    TorusGrid g(8, 1.0);
    Field profile = Field::constant(g, 1.0);
    profile += Field::mode(g, 1, 0, 0.25);
    auto stats = coming_down_profile(g, 1.0, profile, {1.0, 100.0}, 4.0, 0.25, 1e-3,
                                     3, 77);
    REQUIRE(stats.size() == 2);
    for (const auto& st : stats) {
        REQUIRE(st.sups.size() == 3);
        for (double s : st.sups) {
            CHECK(s > 0.0);
            CHECK(std::isfinite(s));
        }
    }
    // Worker invariance of the parallel fan-out.
    auto par = coming_down_profile(g, 1.0, profile, {1.0, 100.0}, 4.0, 0.25, 1e-3,
                                   3, 77, ModelOptions{}, 0, 3);
    for (size_t i = 0; i < stats.size(); ++i)
        for (size_t r = 0; r < stats[i].sups.size(); ++r)
            CHECK(stats[i].sups[r] == par[i].sups[r]);
}

TEST_CASE("gradient profile stays finite with a singular-looking weight") {
    TorusGrid g(8, 1.0);
    GradientProfileStats st =
        gradient_profile(g, 1.0, Field::zero(g), 0.1, 0.01, 0.1, 2, 13);
    REQUIRE(st.sups.size() == 2);
    for (double s : st.sups) {
        CHECK(std::isfinite(s));
        CHECK(s > 0.0);
    }
}
