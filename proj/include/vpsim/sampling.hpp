#pragma once

// Weighted Monte Carlo sampling of the truncated datum.  The normalized
// density factorizes into independent radial laws for |x| and |v| plus
// uniform directions, so each particle costs one inverse-CDF lookup per
// factor.  Draw i depends only on (seed, i): runs agree bit for bit across
// worker counts, and cutoff families built from one master draw are nested.

#include <cstdint>
#include <vector>

#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/initial_data.hpp"
#include "vpsim/numerics.hpp"
#include "vpsim/parallel.hpp"
#include "vpsim/rng.hpp"

namespace vpsim {

namespace detail {

struct RadialTables {
    CdfTable spatial;
    CdfTable velocity;

    RadialTables(const InitialDataParams& p, const TruncationParams& t)
        : spatial(
              [alpha = p.alpha](double r) { return r * r * std::pow(1.0 + r, -alpha); },
              t.spatial_radius()),
          velocity(
              [lambda = p.lambda](double r) { return r * r * std::exp(-lambda * r * r); },
              t.n_cut) {}
};

inline Vec3 sphere_point(double radius, double u1, double u2) {
    const double z = 1.0 - 2.0 * u1;
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 6.283185307179586476925286766559 * u2;
    return {radius * s * std::cos(phi), radius * s * std::sin(phi), radius * z};
}

// The six uniforms of particle `index` mapped through the radial tables.
inline void draw_particle(const RadialTables& tables, std::uint64_t seed, std::uint64_t index,
                          Vec3& x, Vec3& v) {
    RngStream rng(seed, RngPurpose::sample, index);
    const double rx = tables.spatial.sample(rng.next_double());
    const double ux1 = rng.next_double();
    const double ux2 = rng.next_double();
    const double rv = tables.velocity.sample(rng.next_double());
    const double uv1 = rng.next_double();
    const double uv2 = rng.next_double();
    x = sphere_point(rx, ux1, ux2);
    v = sphere_point(rv, uv1, uv2);
}

}  // namespace detail

// Equal-weight i.i.d. sample of the normalized truncated datum.
inline Ensemble sample_ensemble(const InitialDataParams& p, const TruncationParams& t,
                                std::size_t count, std::uint64_t seed) {
    p.validate();
    t.validate();
    if (count == 0) throw ConfigError("sample_ensemble: particle count must be >= 1");
    const double mass = truncated_mass(p, t);
    if (!std::isfinite(mass) || !(mass > 0.0))
        throw NumericalError("sample_ensemble: non-finite truncated mass");

    const detail::RadialTables tables(p, t);
    const double w = mass / static_cast<double>(count);

    Ensemble ens;
    ens.fparams = p;
    ens.tparams = t;
    ens.seed = seed;
    ens.pos.resize(count);
    ens.vel.resize(count);
    ens.weight.assign(count, w);
    ens.id.resize(count);
    parallel_for_blocks(count, 8192, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            detail::draw_particle(tables, seed, i, ens.pos[i], ens.vel[i]);
            ens.id[i] = i;
        }
    });
    return ens;
}

// Common-random-numbers sample for cutoff families: draw `master_count`
// candidates from the largest support, keep those inside the run support,
// and reweight so the total matches the run's truncated mass.  A particle's
// coordinates depend only on (seed, master index), so the particle sets of
// nested cutoffs agree identically on shared indices.
inline Ensemble nested_sample(const InitialDataParams& p, const TruncationParams& run,
                              const TruncationParams& master, std::size_t master_count,
                              std::uint64_t seed) {
    p.validate();
    run.validate();
    master.validate();
    if (master_count == 0) throw ConfigError("nested_sample: master count must be >= 1");
    if (run.n_cut > master.n_cut || run.spatial_radius() > master.spatial_radius())
        throw ConfigError("nested_sample: run support exceeds master support");

    const detail::RadialTables tables(p, master);
    const double r_run = run.spatial_radius();

    const std::size_t block = 8192;
    const std::size_t nblocks = (master_count + block - 1) / block;
    std::vector<Ensemble> partial(nblocks);
    parallel_for_blocks(master_count, block, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Ensemble& part = partial[b];
        for (std::size_t i = begin; i < end; ++i) {
            Vec3 x, v;
            detail::draw_particle(tables, seed, i, x, v);
            if (norm(x) <= r_run && norm(v) <= run.n_cut) part.push_back(x, v, 0.0, i);
        }
    });

    Ensemble ens;
    ens.fparams = p;
    ens.tparams = run;
    ens.seed = seed;
    std::size_t kept = 0;
    for (const auto& part : partial) kept += part.size();
    if (kept == 0) throw NumericalError("nested_sample: no master samples inside run support");
    ens.reserve(kept);
    for (const auto& part : partial)
        for (std::size_t i = 0; i < part.size(); ++i)
            ens.push_back(part.pos[i], part.vel[i], 0.0, part.id[i]);

    const double mass = truncated_mass(p, run);
    const double w = mass / static_cast<double>(kept);
    for (auto& wi : ens.weight) wi = w;
    return ens;
}

}  // namespace vpsim
