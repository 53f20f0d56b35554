#pragma once

// Reference initial datum: an isotropic Maxwell-Boltzmann velocity profile
// with amplitude c1 and inverse variance scale lambda, times a power-law
// spatial profile (1+|x|)^(-alpha).  The truncated datum keeps the phase-space
// region |x| <= N^beta, |v| <= N; for 1 < alpha < 3 the untruncated spatial
// mass is infinite, which is the regime the cutoff studies probe.

#include <cmath>
#include <string>

#include "vpsim/errors.hpp"
#include "vpsim/numerics.hpp"
#include "vpsim/vec3.hpp"

namespace vpsim {

struct InitialDataParams {
    double c1 = 0.02;    // phase-space amplitude (G = 1 code units)
    double lambda = 1.0; // inverse velocity-variance scale
    double alpha = 2.0;  // spatial decay exponent

    void validate() const {
        if (!(c1 > 0.0)) throw ConfigError("c1 must be > 0");
        if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
        if (!(alpha > 1.0))
            throw ConfigError(
                "alpha must be > 1 (a finite initial field requires spatial decay "
                "steeper than 1/|x|)");
    }
};

// Largest admissible beta for exponent-bound studies at a given alpha < 3.
inline double beta_admissible_limit(double alpha) {
    return 2.0 / (5.0 * (3.0 - alpha));
}

struct TruncationParams {
    double n_cut = 16.0; // velocity cutoff N
    double beta = 0.3;   // spatial cutoff exponent: |x| <= N^beta

    double spatial_radius() const { return std::pow(n_cut, beta); }

    // True iff the cutoff pair satisfies beta < 2/(5(3-alpha)); for alpha >= 3
    // the constraint is vacuous.
    bool beta_admissible(double alpha) const {
        if (alpha >= 3.0) return true;
        return beta < beta_admissible_limit(alpha);
    }

    void validate() const {
        if (!(n_cut > 0.0)) throw ConfigError("n must be > 0");
        if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    }
};

inline double eval_f0(const InitialDataParams& p, const Vec3& x, const Vec3& v) {
    return p.c1 * std::exp(-p.lambda * norm2(v)) * std::pow(1.0 + norm(x), -p.alpha);
}

inline double eval_f0_truncated(const InitialDataParams& p, const TruncationParams& t,
                                const Vec3& x, const Vec3& v) {
    if (norm(x) > t.spatial_radius() || norm(v) > t.n_cut) return 0.0;
    return eval_f0(p, x, v);
}

// Velocity-space mass of the cut Maxwellian: integral of exp(-lambda |v|^2)
// over |v| <= n_cut, by adaptive quadrature on the radial profile.
inline double velocity_mass_factor(const InitialDataParams& p, double n_cut,
                                   double rel_tol = 1e-10) {
    const double lambda = p.lambda;
    // Beyond ~9 sigma the integrand underflows relative tolerance anyway.
    const double r_hi = std::min(n_cut, 9.0 / std::sqrt(lambda));
    const double radial = integrate(
        [lambda](double r) { return r * r * std::exp(-lambda * r * r); }, 0.0, r_hi, rel_tol);
    return 4.0 * 3.14159265358979323846 * radial;
}

// Spatial mass of the cut power-law profile: integral of (1+|x|)^(-alpha)
// over |x| <= r_cut.
inline double spatial_mass_factor(const InitialDataParams& p, double r_cut,
                                  double rel_tol = 1e-10) {
    const double alpha = p.alpha;
    const double radial = integrate(
        [alpha](double r) { return r * r * std::pow(1.0 + r, -alpha); }, 0.0, r_cut, rel_tol);
    return 4.0 * 3.14159265358979323846 * radial;
}

// Total mass of the truncated datum, in factorized closed form.
inline double truncated_mass(const InitialDataParams& p, const TruncationParams& t) {
    p.validate();
    t.validate();
    return p.c1 * velocity_mass_factor(p, t.n_cut) * spatial_mass_factor(p, t.spatial_radius());
}

// Mean interparticle spacing of a P-particle discretization of the spatial
// support ball; sets the default softening and time step scales.
inline double mean_spacing(const TruncationParams& t, std::size_t particles) {
    const double r = t.spatial_radius();
    const double volume = 4.0 * 3.14159265358979323846 / 3.0 * r * r * r;
    return std::cbrt(volume / static_cast<double>(particles > 0 ? particles : 1));
}

}  // namespace vpsim
