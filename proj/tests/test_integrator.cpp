#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "vpsim/diagnostics.hpp"
#include "vpsim/integrator.hpp"
#include "vpsim/rng.hpp"
#include "vpsim/sampling.hpp"

using namespace vpsim;

namespace {

Ensemble random_cloud(std::size_t count, std::uint64_t seed) {
    Ensemble ens;
    RngStream rng(seed, RngPurpose::scratch, 0);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3 x{2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                     2.0 * rng.next_double() - 1.0};
        const Vec3 v{rng.next_double() - 0.5, rng.next_double() - 0.5, rng.next_double() - 0.5};
        ens.push_back(x, v, 0.01 + 0.01 * rng.next_double(), i);
    }
    return ens;
}

FieldOptions field_opts(double eps, double theta = 0.4) {
    FieldOptions f;
    f.softening = {eps};
    f.theta = theta;
    return f;
}

}  // namespace

TEST_CASE("free streaming is exact") {
    Ensemble lone;
    lone.push_back({0.5, -1.0, 2.0}, {0.25, 0.5, -1.0}, 1.0, 0);
    const Ensemble next = leapfrog_step(lone, 0.125, field_opts(0.1));
    CHECK(next.pos[0] == Vec3{0.5 + 0.25 * 0.125, -1.0 + 0.5 * 0.125, 2.0 - 1.0 * 0.125});
    CHECK(next.vel[0] == lone.vel[0]);

    Ensemble massless = random_cloud(32, 3);
    for (auto& w : massless.weight) w = 0.0;
    RecorderConfig rec;
    rec.record_interval = 0.5;
    rec.energy_series = false;
    const TrajectoryRecord traj = integrate(massless, 1.0, 0.125, field_opts(0.0), rec);
    for (std::size_t i = 0; i < massless.size(); ++i) {
        // Eight exact dt*v increments; only the running additions round.
        CHECK(norm(traj.final_state.pos[i] - (massless.pos[i] + 1.0 * massless.vel[i])) < 1e-13);
        CHECK(traj.final_state.vel[i] == massless.vel[i]);
    }
    // No field anywhere, so the time integral of |G| vanishes identically.
    const FieldIntegralReport fir = field_time_integral(traj);
    CHECK(fir.max_integral == 0.0);
}

TEST_CASE("two-body circular orbit returns after one period") {
    const double period = oracles::two_body_period(1.0);
    RecorderConfig rec;
    rec.record_interval = period;
    rec.store_snapshots = false;
    rec.energy_series = false;

    std::vector<double> dts, errs;
    for (int k = 6; k <= 9; ++k) {
        const double dt = period / std::pow(2.0, k);
        const TrajectoryRecord traj =
            integrate(oracles::two_body(1.0), period, dt, field_opts(0.0), rec);
        const Ensemble ref = oracles::two_body(1.0);
        double err = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            err += norm(traj.final_state.pos[i] - ref.pos[i]) +
                   norm(traj.final_state.vel[i] - ref.vel[i]);
        dts.push_back(dt);
        errs.push_back(err);
    }
    // O(dt^2) return at the finest step (scale: orbit radius 0.5).
    CHECK(errs.back() < 1e-3);
    const PowerLawFit fit = fit_power_law(dts, errs);
    CHECK(fit.slope > 1.8);
    CHECK(fit.slope < 2.2);
}

TEST_CASE("leapfrog is time reversible") {
    const Ensemble start = random_cloud(64, 11);
    const double dt = 0.02;
    const int steps = 25;
    Ensemble state = start;
    for (int s = 0; s < steps; ++s) state = leapfrog_step(state, dt, field_opts(0.1));
    for (auto& v : state.vel) v = -v;
    for (int s = 0; s < steps; ++s) state = leapfrog_step(state, dt, field_opts(0.1));
    for (auto& v : state.vel) v = -v;
    for (std::size_t i = 0; i < start.size(); ++i) {
        CHECK(norm(state.pos[i] - start.pos[i]) < 1e-10);
        CHECK(norm(state.vel[i] - start.vel[i]) < 1e-10);
    }
}

TEST_CASE("one step preserves phase-space volume in a frozen field") {
    const Ensemble sources = random_cloud(32, 17);
    const double eps = 0.5;
    const auto frozen = [&](const Ensemble& probe) {
        return field_direct(sources, probe.pos, {eps});
    };
    const double dt = 0.05;
    const auto advance = [&](const std::vector<double>& z) {
        Ensemble probe;
        probe.push_back({z[0], z[1], z[2]}, {z[3], z[4], z[5]}, 1.0, 0);
        const Ensemble out = leapfrog_step(probe, dt, frozen);
        return std::vector<double>{out.pos[0].x, out.pos[0].y, out.pos[0].z,
                                   out.vel[0].x, out.vel[0].y, out.vel[0].z};
    };

    const std::vector<double> z0{0.2, -0.1, 0.15, 0.3, 0.1, -0.2};
    const double h = 1e-5;
    std::vector<double> jac(36);
    for (int c = 0; c < 6; ++c) {
        std::vector<double> zp = z0, zm = z0;
        zp[c] += h;
        zm[c] -= h;
        const auto fp = advance(zp);
        const auto fm = advance(zm);
        for (int r = 0; r < 6; ++r) jac[r * 6 + c] = (fp[r] - fm[r]) / (2.0 * h);
    }
    CHECK(oracles::determinant(jac, 6) == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("weights, mass and momentum are conserved along trajectories") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams t{8.0, 0.3};
    const Ensemble ens = sample_ensemble(p, t, 256, 5);
    RecorderConfig rec;
    rec.record_interval = 0.25;
    const TrajectoryRecord traj = integrate(ens, 1.0, 0.0125, field_opts(0.05), rec);

    const double mass0 = total_mass(ens);
    const double wmax0 = max_weight(ens);
    for (const auto& snap : traj.snapshots) {
        CHECK(snap.weight == ens.weight);  // bitwise: weights are never touched
        CHECK(total_mass(snap) == mass0);
        CHECK(max_weight(snap) == wmax0);
    }
    const Vec3 dp = total_momentum(traj.final_state) - total_momentum(ens);
    CHECK(norm(dp) <= 1e-8 * mass0 * max_speed(traj.final_state));

    // Recorded times are strictly increasing from zero.
    REQUIRE(!traj.times.empty());
    CHECK(traj.times.front() == 0.0);
    for (std::size_t i = 1; i < traj.times.size(); ++i) CHECK(traj.times[i] > traj.times[i - 1]);
    CHECK(traj.total.front() == traj.kinetic.front() + traj.potential.front());
}

TEST_CASE("energy drift stays small on a sampled ensemble") {
    const InitialDataParams p{0.02, 1.0, 2.0};
    const TruncationParams t{16.0, 0.3};
    const Ensemble ens = sample_ensemble(p, t, 512, 21);
    const double eps = default_softening(t, ens.size()).eps;
    RecorderConfig rec;
    rec.record_interval = 0.25;
    const TrajectoryRecord traj = integrate(ens, 1.0, 0.003125, field_opts(eps), rec);
    const double e0 = traj.total.front();
    REQUIRE(e0 != 0.0);
    double drift = 0.0;
    for (double e : traj.total) drift = std::max(drift, std::abs(e - e0) / std::abs(e0));
    CHECK(drift < 1e-3);
}

TEST_CASE("integrator input validation") {
    const Ensemble ens = random_cloud(8, 23);
    RecorderConfig rec;
    rec.record_interval = 0.3;
    CHECK_THROWS_AS(integrate(ens, 1.0, -0.1, field_opts(0.1), rec), ConfigError);
    CHECK_THROWS_AS(integrate(ens, -1.0, 0.1, field_opts(0.1), rec), ConfigError);
    // dt must divide the recording interval.
    CHECK_THROWS_AS(integrate(ens, 0.9, 0.07, field_opts(0.1), rec), ConfigError);
    CHECK_THROWS_AS(leapfrog_step(ens, 0.0, field_opts(0.1)), ConfigError);
}

TEST_CASE("non-finite states abort with the offending particle") {
    Ensemble bad = random_cloud(4, 29);
    bad.pos[2].x = std::numeric_limits<double>::quiet_NaN();
    try {
        leapfrog_step(bad, 0.1, field_opts(0.1));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("particle 2") != std::string::npos);
    }

    RecorderConfig rec;
    rec.record_interval = 0.2;
    rec.energy_series = false;
    try {
        integrate(bad, 0.4, 0.1, field_opts(0.1), rec);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("step") != std::string::npos);
    }
}
