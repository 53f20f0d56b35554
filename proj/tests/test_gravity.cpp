#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <thread>
#include <vector>

#include "support/oracles.hpp"
#include "vpsim/gravity.hpp"
#include "vpsim/parallel.hpp"
#include "vpsim/rng.hpp"

using namespace vpsim;

namespace {

Ensemble random_ensemble(std::size_t count, std::uint64_t seed, double box = 1.0) {
    Ensemble ens;
    RngStream rng(seed, RngPurpose::scratch, 0);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3 x{box * (2.0 * rng.next_double() - 1.0), box * (2.0 * rng.next_double() - 1.0),
                     box * (2.0 * rng.next_double() - 1.0)};
        const Vec3 v{rng.next_double() - 0.5, rng.next_double() - 0.5, rng.next_double() - 0.5};
        ens.push_back(x, v, 0.5 + rng.next_double(), i);
    }
    return ens;
}

}  // namespace

TEST_CASE("inverse-square law for a single source") {
    Ensemble ens;
    ens.push_back({0, 0, 0}, {0, 0, 0}, 1.0, 0);
    const auto g = field_direct(ens, {{2, 0, 0}}, {0.0});
    CHECK(g[0].x == -0.25);
    CHECK(g[0].y == 0.0);
    CHECK(g[0].z == 0.0);
}

TEST_CASE("symmetric sources cancel at the midpoint") {
    Ensemble ens;
    ens.push_back({-1, 0.5, 0}, {0, 0, 0}, 2.0, 0);
    ens.push_back({1, -0.5, 0}, {0, 0, 0}, 2.0, 1);
    const auto g = field_direct(ens, {{0, 0, 0}}, {0.0});
    CHECK(g[0].x == 0.0);
    CHECK(g[0].y == 0.0);
    CHECK(g[0].z == 0.0);
}

TEST_CASE("direct field matches the naive double loop") {
    const Ensemble ens = random_ensemble(64, 5);
    std::vector<Vec3> queries;
    RngStream rng(6, RngPurpose::scratch, 1);
    for (int q = 0; q < 8; ++q)
        queries.push_back({2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                           2.0 * rng.next_double() - 1.0});
    const auto got = field_direct(ens, queries, {0.01});
    const auto want = oracles::naive_field(ens, queries, 0.01);
    for (std::size_t q = 0; q < queries.size(); ++q)
        CHECK(norm(got[q] - want[q]) / norm(want[q]) < 1e-14);
}

TEST_CASE("attractivity for a two-particle ensemble") {
    Ensemble ens;
    ens.push_back({-0.3, 0.2, 0.1}, {0, 0, 0}, 1.5, 0);
    ens.push_back({0.7, -0.4, 0.5}, {0, 0, 0}, 0.5, 1);
    const auto g = field_direct(ens, ens.pos, {0.01});
    CHECK(dot(g[0], ens.pos[1] - ens.pos[0]) > 0.0);
    CHECK(dot(g[1], ens.pos[0] - ens.pos[1]) > 0.0);
}

TEST_CASE("potential energy values and oracle") {
    Ensemble pair;
    pair.push_back({0, 0, 0}, {0, 0, 0}, 1.0, 0);
    pair.push_back({1, 0, 0}, {0, 0, 0}, 1.0, 1);
    CHECK(potential_energy(pair, {0.0}) == -1.0);

    Ensemble single;
    single.push_back({0.3, 0.1, -0.2}, {0, 0, 0}, 2.0, 0);
    CHECK(potential_energy(single, {0.0}) == 0.0);

    const Ensemble ens = random_ensemble(128, 9);
    const double got = potential_energy(ens, {0.01});
    const double want = oracles::naive_potential(ens, 0.01);
    CHECK(got == Catch::Approx(want).epsilon(1e-12));
    CHECK(got < 0.0);
}

TEST_CASE("potential energy is nonpositive and nondecreasing in eps") {
    const Ensemble ens = random_ensemble(60, 17);
    double prev = -1e300;
    for (double eps : {0.001, 0.01, 0.1, 1.0}) {
        const double u = potential_energy(ens, {eps});
        CHECK(u <= 0.0);
        CHECK(u >= prev);
        prev = u;
    }
}

TEST_CASE("collisions at eps = 0 are reported") {
    Ensemble ens;
    ens.push_back({0.5, 0.5, 0.5}, {0, 0, 0}, 1.0, 0);
    ens.push_back({0.5, 0.5, 0.5}, {0, 0, 0}, 1.0, 1);
    CHECK_THROWS_AS(field_direct(ens, ens.pos, {0.0}), NumericalError);
    CHECK_THROWS_AS(potential_energy(ens, {0.0}), NumericalError);
}

TEST_CASE("momentum balance when queries are the sources") {
    const Ensemble ens = random_ensemble(300, 23);
    const auto g = field_direct(ens, ens.pos, {0.05});
    Vec3 sum{0, 0, 0};
    double gmax = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        sum += ens.weight[i] * g[i];
        gmax = std::max(gmax, norm(g[i]));
    }
    CHECK(norm(sum) <= 1e-10 * total_mass(ens) * gmax);
}

TEST_CASE("tree with theta = 0 equals the direct sum bitwise") {
    const Ensemble ens = random_ensemble(500, 12);
    std::vector<Vec3> queries(ens.pos.begin(), ens.pos.begin() + 50);
    const auto direct = field_direct(ens, queries, {0.02});
    const auto tree = field_tree(ens, queries, {0.02}, 0.0);
    for (std::size_t q = 0; q < queries.size(); ++q) CHECK(tree[q] == direct[q]);
}

TEST_CASE("tree error is small at moderate opening angles") {
    const Ensemble ens = random_ensemble(10000, 18);
    std::vector<Vec3> queries;
    RngStream rng(19, RngPurpose::scratch, 2);
    for (int q = 0; q < 100; ++q)
        queries.push_back({2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                           2.0 * rng.next_double() - 1.0});
    const auto exact = field_direct(ens, queries, {0.01});
    const auto approx = field_tree(ens, queries, {0.01}, 0.5);
    double worst = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q)
        worst = std::max(worst, norm(approx[q] - exact[q]) / norm(exact[q]));
    CHECK(worst < 1e-2);
}

TEST_CASE("tree error grows with the opening angle") {
    const Ensemble ens = random_ensemble(4000, 21);
    std::vector<Vec3> queries;
    RngStream rng(22, RngPurpose::scratch, 3);
    for (int q = 0; q < 60; ++q)
        queries.push_back({2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                           2.0 * rng.next_double() - 1.0});
    const auto exact = field_direct(ens, queries, {0.01});
    double prev = 0.0;
    for (double theta : {0.25, 0.5, 1.0}) {
        const auto approx = field_tree(ens, queries, {0.01}, theta);
        double worst = 0.0;
        for (std::size_t q = 0; q < queries.size(); ++q)
            worst = std::max(worst, norm(approx[q] - exact[q]) / norm(exact[q]));
        CHECK(worst >= prev);
        prev = worst;
    }
}

TEST_CASE("tree is exact for a single particle") {
    Ensemble ens;
    ens.push_back({0.2, -0.1, 0.4}, {0, 0, 0}, 3.0, 0);
    const std::vector<Vec3> queries{{1.5, 0.5, -0.5}, {-2, 0, 0}};
    const auto direct = field_direct(ens, queries, {0.0});
    for (double theta : {0.1, 0.5, 1.0, 5.0}) {
        const auto tree = field_tree(ens, queries, {0.0}, theta);
        CHECK(tree[0] == direct[0]);
        CHECK(tree[1] == direct[1]);
    }
}

TEST_CASE("tree potential approximates the pairwise potential") {
    const Ensemble ens = random_ensemble(5000, 27);
    const double exact = potential_energy(ens, {0.02});
    const double approx = potential_energy_tree(ens, {0.02}, 0.4);
    CHECK(approx == Catch::Approx(exact).epsilon(5e-3));
}

TEST_CASE("field and potential are identical for any worker count") {
    const Ensemble ens = random_ensemble(800, 33);
    set_thread_count(1);
    const auto f1 = field_direct(ens, ens.pos, {0.03});
    const double u1 = potential_energy(ens, {0.03});
    const auto t1 = field_tree(ens, ens.pos, {0.03}, 0.6);
    set_thread_count(4);
    const auto f4 = field_direct(ens, ens.pos, {0.03});
    const double u4 = potential_energy(ens, {0.03});
    const auto t4 = field_tree(ens, ens.pos, {0.03}, 0.6);
    set_thread_count(static_cast<int>(std::thread::hardware_concurrency()));
    CHECK(f1 == f4);
    CHECK(u1 == u4);
    CHECK(t1 == t4);
}

TEST_CASE("softening must be nonnegative") {
    const Ensemble ens = random_ensemble(4, 40);
    CHECK_THROWS_AS(field_direct(ens, ens.pos, {-0.1}), ConfigError);
}
