#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "support/oracles.hpp"
#include "vpsim/ensemble.hpp"
#include "vpsim/initial_data.hpp"
#include "vpsim/parallel.hpp"
#include "vpsim/rng.hpp"
#include "vpsim/sampling.hpp"

using namespace vpsim;
using oracles::kPi;

TEST_CASE("reference datum point values") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    CHECK(eval_f0(p, {0, 0, 0}, {0, 0, 0}) == 1.0);
    CHECK(eval_f0(p, {1, 0, 0}, {0, 0, 0}) == Catch::Approx(0.25).epsilon(1e-15));
    const InitialDataParams q{2.0, 0.5, 2.0};
    CHECK(eval_f0(q, {0, 0, 0}, {1.0, 1.0, 0}) ==
          Catch::Approx(2.0 * std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("truncated datum support") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams unit{1.0, 1.0};
    CHECK(eval_f0_truncated(p, unit, {2, 0, 0}, {0, 0, 0}) == 0.0);
    CHECK(eval_f0_truncated(p, unit, {0, 0, 0}, {1.0000001, 0, 0}) == 0.0);
    const TruncationParams wide{10.0, 0.3};
    CHECK(eval_f0_truncated(p, wide, {0, 0, 0}, {0, 0, 0}) == 1.0);
}

TEST_CASE("truncated datum is dominated by the full datum and nonnegative") {
    const InitialDataParams p{0.7, 2.0, 1.8};
    const TruncationParams t{3.0, 0.35};
    RngStream rng(11, RngPurpose::scratch, 0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 x{8.0 * (rng.next_double() - 0.5), 8.0 * (rng.next_double() - 0.5),
                     8.0 * (rng.next_double() - 0.5)};
        const Vec3 v{8.0 * (rng.next_double() - 0.5), 8.0 * (rng.next_double() - 0.5),
                     8.0 * (rng.next_double() - 0.5)};
        const double full = eval_f0(p, x, v);
        const double cut = eval_f0_truncated(p, t, x, v);
        CHECK(cut >= 0.0);
        CHECK(full >= cut);
    }
}

TEST_CASE("datum is radially nonincreasing in |x| and |v|") {
    const InitialDataParams p{1.3, 0.7, 2.4};
    RngStream rng(13, RngPurpose::scratch, 1);
    for (int i = 0; i < 200; ++i) {
        const double r1 = 5.0 * rng.next_double(), r2 = 5.0 * rng.next_double();
        const double s1 = 4.0 * rng.next_double(), s2 = 4.0 * rng.next_double();
        const double f1 = eval_f0(p, {r1, 0, 0}, {0, s1, 0});
        const double f2 = eval_f0(p, {r2, 0, 0}, {0, s1, 0});
        if (r1 <= r2) CHECK(f1 >= f2);
        const double g2 = eval_f0(p, {r1, 0, 0}, {0, s2, 0});
        if (s1 <= s2) CHECK(f1 >= g2);
    }
}

TEST_CASE("velocity mass factor approaches the Gaussian integral") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    CHECK(velocity_mass_factor(p, 50.0) == Catch::Approx(std::pow(kPi, 1.5)).epsilon(1e-12));
    // Closed-form check at a binding cutoff.
    CHECK(velocity_mass_factor(p, 2.0) ==
          Catch::Approx(std::pow(kPi, 1.5) * oracles::gaussian_ball_fraction(1.0, 2.0))
              .epsilon(1e-10));
}

TEST_CASE("truncated mass: quadrature vs closed form and Monte Carlo") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams t{5.0, 0.4};
    const double mass = truncated_mass(p, t);

    // Closed-form route for alpha = 2.
    const double R = t.spatial_radius();
    const double spatial = 4.0 * kPi * (R - 2.0 * std::log(1.0 + R) + 1.0 - 1.0 / (1.0 + R));
    const double velocity = std::pow(kPi, 1.5) * oracles::gaussian_ball_fraction(1.0, 5.0);
    CHECK(mass == Catch::Approx(spatial * velocity).epsilon(1e-10));

    // Independent 6-dim Monte Carlo oracle.
    const oracles::McMass mc = oracles::mc_truncated_mass(p, t, 1500000, 77);
    CHECK(std::abs(mass - mc.value) < 5.0 * mc.sigma);
    CHECK(mass == Catch::Approx(mc.value).epsilon(5e-3));
}

TEST_CASE("truncated mass ratio to the cutoff power stays bounded") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const double beta = 0.4;
    const double bound = p.c1 * std::pow(kPi / p.lambda, 1.5) * 4.0 * kPi / (3.0 - p.alpha);
    double prev_ratio = 0.0;
    for (double n : {10.0, 20.0, 40.0, 80.0}) {
        const TruncationParams t{n, beta};
        const double ratio = truncated_mass(p, t) / std::pow(n, beta * (3.0 - p.alpha));
        CHECK(ratio > 0.0);
        CHECK(ratio <= bound);
        CHECK(ratio >= prev_ratio);  // approaches the ceiling from below
        prev_ratio = ratio;
    }
}

TEST_CASE("truncated mass is monotone in cutoffs and amplitude") {
    RngStream rng(29, RngPurpose::scratch, 3);
    for (int i = 0; i < 20; ++i) {
        const InitialDataParams p{0.1 + rng.next_double(), 0.3 + rng.next_double(),
                                  1.2 + 1.5 * rng.next_double()};
        const TruncationParams t{2.0 + 10.0 * rng.next_double(), 0.1 + 0.5 * rng.next_double()};
        const double m = truncated_mass(p, t);
        CHECK(truncated_mass(p, {t.n_cut * 1.5, t.beta}) >= m);
        CHECK(truncated_mass(p, {t.n_cut, t.beta * 1.2}) >= m);
        CHECK(truncated_mass({p.c1 * 2.0, p.lambda, p.alpha}, t) >= m);
    }
}

TEST_CASE("beta admissibility flag") {
    CHECK(TruncationParams{8.0, 0.3}.beta_admissible(2.0));
    CHECK_FALSE(TruncationParams{8.0, 0.4}.beta_admissible(2.0));   // limit is exactly 0.4
    CHECK_FALSE(TruncationParams{8.0, 0.45}.beta_admissible(2.0));
    CHECK(TruncationParams{8.0, 5.0}.beta_admissible(3.5));         // vacuous above alpha = 3
}

TEST_CASE("sampling: mass, support, determinism") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams t{16.0, 0.3};
    const std::size_t count = 20000;
    const Ensemble ens = sample_ensemble(p, t, count, 99);

    const double mass = truncated_mass(p, t);
    CHECK(total_mass(ens) == Catch::Approx(mass).epsilon(1e-12));
    const double r_max = t.spatial_radius();
    for (std::size_t i = 0; i < ens.size(); ++i) {
        CHECK(norm(ens.pos[i]) <= r_max);
        CHECK(norm(ens.vel[i]) <= t.n_cut);
        CHECK(ens.weight[i] == mass / static_cast<double>(count));
    }

    const Ensemble again = sample_ensemble(p, t, count, 99);
    CHECK(ens.pos == again.pos);
    CHECK(ens.vel == again.vel);

    set_thread_count(1);
    const Ensemble serial = sample_ensemble(p, t, count, 99);
    set_thread_count(static_cast<int>(std::thread::hardware_concurrency()));
    CHECK(ens.pos == serial.pos);
    CHECK(ens.vel == serial.vel);

    const Ensemble other = sample_ensemble(p, t, count, 100);
    CHECK(ens.pos != other.pos);

    CHECK_THROWS_AS(sample_ensemble(p, t, 0, 1), ConfigError);
}

TEST_CASE("sampled kinetic energy matches the truncated Maxwellian moment") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams t{16.0, 0.3};
    const std::size_t count = 40000;
    const Ensemble ens = sample_ensemble(p, t, count, 7);

    const double mass = truncated_mass(p, t);
    const double lambda = p.lambda;
    const double den =
        integrate([lambda](double r) { return r * r * std::exp(-lambda * r * r); }, 0.0, t.n_cut);
    const double num = integrate(
        [lambda](double r) { return r * r * r * r * std::exp(-lambda * r * r); }, 0.0, t.n_cut);
    const double num6 = integrate(
        [lambda](double r) { return std::pow(r, 6.0) * std::exp(-lambda * r * r); }, 0.0, t.n_cut);
    const double v2 = num / den;   // <|v|^2>
    const double v4 = num6 / den;  // <|v|^4>
    const double expected = 0.5 * mass * v2;
    const double w = mass / static_cast<double>(count);
    const double sigma = w * std::sqrt(static_cast<double>(count) * 0.25 * (v4 - v2 * v2));

    CHECK(std::abs(kinetic_energy(ens) - expected) < 5.0 * sigma);
    // Untruncated limit: T/M -> 3/(4 lambda), loose agreement.
    CHECK(kinetic_energy(ens) / mass == Catch::Approx(0.75 / lambda).epsilon(0.02));
}

TEST_CASE("sampled radial marginal passes a KS test against the table CDF") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams t{16.0, 0.3};
    const std::size_t count = 100000;
    const Ensemble ens = sample_ensemble(p, t, count, 4242);

    const double alpha = p.alpha;
    const CdfTable table(
        [alpha](double r) { return r * r * std::pow(1.0 + r, -alpha); }, t.spatial_radius());
    std::vector<double> radii(count);
    for (std::size_t i = 0; i < count; ++i) radii[i] = norm(ens.pos[i]);
    std::sort(radii.begin(), radii.end());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double f = table.cdf(radii[i]);
        const double n = static_cast<double>(count);
        d_stat = std::max(d_stat, std::max(std::abs(f - static_cast<double>(i) / n),
                                           std::abs(f - static_cast<double>(i + 1) / n)));
    }
    // Significance 1e-3: c = sqrt(ln(2/1e-3)/2).
    const double critical = 1.9495 / std::sqrt(static_cast<double>(count));
    CHECK(d_stat < critical);
}

TEST_CASE("nested sampling yields identical shared particles") {
    const InitialDataParams p{1.0, 1.0, 2.0};
    const TruncationParams master{16.0, 0.3};
    const std::size_t master_count = 30000;
    const Ensemble big = nested_sample(p, master, master, master_count, 31);
    CHECK(big.size() == master_count);

    const TruncationParams small{8.0, 0.3};
    const Ensemble little = nested_sample(p, small, master, master_count, 31);
    CHECK(little.size() < big.size());
    CHECK(little.size() > 0);
    CHECK(total_mass(little) == Catch::Approx(truncated_mass(p, small)).epsilon(1e-12));

    // Index the big run by master id.
    std::vector<std::size_t> where(master_count, master_count);
    for (std::size_t i = 0; i < big.size(); ++i) where[big.id[i]] = i;
    const double r_small = small.spatial_radius();
    for (std::size_t i = 0; i < little.size(); ++i) {
        const std::size_t j = where[little.id[i]];
        REQUIRE(j < big.size());
        CHECK(little.pos[i] == big.pos[j]);
        CHECK(little.vel[i] == big.vel[j]);
        CHECK(norm(little.pos[i]) <= r_small);
        CHECK(norm(little.vel[i]) <= small.n_cut);
    }

    // Every kept-out particle of the big run is genuinely outside the small support.
    std::size_t outside = 0;
    for (std::size_t i = 0; i < big.size(); ++i)
        if (norm(big.pos[i]) > r_small || norm(big.vel[i]) > small.n_cut) ++outside;
    CHECK(outside + little.size() == big.size());
}
