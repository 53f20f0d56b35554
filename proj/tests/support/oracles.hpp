#pragma once

// Independent brute-force oracles for the test suites.  These deliberately
// re-derive results through routes the library does not share: plain
// double-loop sums, golden-section minimization, Monte Carlo integration and
// closed-form special functions.

#include <cmath>
#include <cstdint>
#include <vector>

#include "vpsim/ensemble.hpp"
#include "vpsim/initial_data.hpp"
#include "vpsim/rng.hpp"
#include "vpsim/vec3.hpp"

namespace oracles {

constexpr double kPi = 3.14159265358979323846;

// Naive softened field, plain accumulation.
inline std::vector<vpsim::Vec3> naive_field(const vpsim::Ensemble& ens,
                                            const std::vector<vpsim::Vec3>& queries, double eps) {
    const double eps2 = eps * eps;
    std::vector<vpsim::Vec3> out(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        vpsim::Vec3 g{0, 0, 0};
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const vpsim::Vec3 d = queries[q] - ens.pos[i];
            const double r2 = vpsim::norm2(d) + eps2;
            g -= ens.weight[i] / (r2 * std::sqrt(r2)) * d;
        }
        out[q] = g;
    }
    return out;
}

// Naive pairwise softened potential energy.
inline double naive_potential(const vpsim::Ensemble& ens, double eps) {
    const double eps2 = eps * eps;
    double u = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i)
        for (std::size_t j = i + 1; j < ens.size(); ++j)
            u -= ens.weight[i] * ens.weight[j] /
                 std::sqrt(vpsim::norm2(ens.pos[i] - ens.pos[j]) + eps2);
    return u;
}

// Golden-section scalar minimization on [a, b].
template <class F>
double golden_min(const F& f, double a, double b, double tol = 1e-12) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return f(0.5 * (a + b));
}

// 6-dim Monte Carlo estimate of the truncated mass: Gaussian velocity
// proposal with the cutoff as an indicator, uniform-ball spatial proposal.
struct McMass {
    double value = 0.0;
    double sigma = 0.0;
};

inline McMass mc_truncated_mass(const vpsim::InitialDataParams& p,
                                const vpsim::TruncationParams& t, std::size_t samples,
                                std::uint64_t seed) {
    const double R = t.spatial_radius();
    const double sigma_v = std::sqrt(0.5 / p.lambda);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        vpsim::RngStream rng(seed, vpsim::RngPurpose::oracle_mc, i);
        const vpsim::Vec3 v{sigma_v * rng.next_gaussian(), sigma_v * rng.next_gaussian(),
                            sigma_v * rng.next_gaussian()};
        const double r = R * std::cbrt(rng.next_double());
        const double z = 1.0 - 2.0 * rng.next_double();
        const double phi = 2.0 * kPi * rng.next_double();
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        const vpsim::Vec3 x{r * s * std::cos(phi), r * s * std::sin(phi), r * z};
        const double h = vpsim::norm(v) <= t.n_cut ? std::pow(1.0 + vpsim::norm(x), -p.alpha) : 0.0;
        sum += h;
        sum2 += h * h;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    const double volume = 4.0 / 3.0 * kPi * R * R * R;
    const double gauss = std::pow(kPi / p.lambda, 1.5);
    McMass out;
    out.value = p.c1 * gauss * volume * mean;
    out.sigma = p.c1 * gauss * volume * std::sqrt(var / n);
    return out;
}

// Closed-form fraction of a Maxwell-Boltzmann distribution inside |v| <= N.
inline double gaussian_ball_fraction(double lambda, double n_cut) {
    const double z = std::sqrt(lambda) * n_cut;
    return std::erf(z) - 2.0 / std::sqrt(kPi) * z * std::exp(-z * z);
}

// Circular two-body configuration: unit masses, separation d, G = 1.
inline vpsim::Ensemble two_body(double d) {
    vpsim::Ensemble ens;
    const double vc = std::sqrt(0.5 / d);
    ens.push_back({-0.5 * d, 0, 0}, {0, -vc, 0}, 1.0, 0);
    ens.push_back({0.5 * d, 0, 0}, {0, vc, 0}, 1.0, 1);
    return ens;
}

inline double two_body_period(double d) { return 2.0 * kPi * std::sqrt(d * d * d / 2.0); }

// Determinant by Gaussian elimination with partial pivoting (n x n, row-major).
inline double determinant(std::vector<double> m, std::size_t n) {
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r * n + col]) > std::abs(m[pivot * n + col])) pivot = r;
        if (m[pivot * n + col] == 0.0) return 0.0;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(m[pivot * n + c], m[col * n + c]);
            det = -det;
        }
        det *= m[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m[r * n + col] / m[col * n + col];
            for (std::size_t c = col; c < n; ++c) m[r * n + c] -= f * m[col * n + c];
        }
    }
    return det;
}

}  // namespace oracles
