#pragma once

// Estimators for every quantity the truncation estimates speak about:
// energies, spatial density and second velocity moment, the rho^(5/3) <= K k
// interpolation inequality with its explicit constant, the near/far split of
// the potential integral, velocity/spatial decay fits, and the running
// maximal velocity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/gravity.hpp"
#include "vpsim/integrator.hpp"
#include "vpsim/numerics.hpp"
#include "vpsim/parallel.hpp"

namespace vpsim {

struct EnergyReport {
    double kinetic = 0.0;    // >= 0
    double potential = 0.0;  // <= 0
    double total = 0.0;      // kinetic + potential, exactly as computed
    double eps = 0.0;        // softening used
};

inline EnergyReport energy_report(const Ensemble& ens, const SofteningParams& s) {
    EnergyReport r;
    r.kinetic = kinetic_energy(ens);
    r.potential = ens.empty() ? 0.0 : potential_energy(ens, s);
    r.total = r.kinetic + r.potential;
    r.eps = s.eps;
    return r;
}

// ---------------------------------------------------------------------------
// Density and second-moment estimation on a uniform Cartesian grid.

struct GridSpec {
    Vec3 lo{0, 0, 0};
    double cell = 1.0;
    int nx = 1, ny = 1, nz = 1;

    std::size_t cells() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    double cell_volume() const { return cell * cell * cell; }
    Vec3 center(std::size_t idx) const {
        const int ix = static_cast<int>(idx % static_cast<std::size_t>(nx));
        const int iy = static_cast<int>((idx / static_cast<std::size_t>(nx)) %
                                        static_cast<std::size_t>(ny));
        const int iz = static_cast<int>(idx / (static_cast<std::size_t>(nx) *
                                               static_cast<std::size_t>(ny)));
        return {lo.x + (ix + 0.5) * cell, lo.y + (iy + 0.5) * cell, lo.z + (iz + 0.5) * cell};
    }

    // Cube grid of cells_per_dim^3 covering the ball |x| <= radius.
    static GridSpec cover_ball(double radius, int cells_per_dim) {
        GridSpec g;
        g.nx = g.ny = g.nz = cells_per_dim;
        g.cell = 2.0 * radius / cells_per_dim;
        g.lo = {-radius, -radius, -radius};
        return g;
    }

    // Cube grid covering all particle positions with a small margin.
    static GridSpec cover(const Ensemble& ens, int cells_per_dim) {
        double r = 0.0;
        for (const auto& p : ens.pos)
            r = std::max({r, std::abs(p.x), std::abs(p.y), std::abs(p.z)});
        return cover_ball(r * (1.0 + 1e-9) + 1e-300, cells_per_dim);
    }
};

enum class DensityMode { histogram, kernel };

struct DensityField {
    GridSpec grid;
    std::vector<double> rho;          // mass density estimate per cell
    std::vector<double> k;            // second velocity moment density per cell
    std::vector<std::size_t> count;   // particles per cell (histogram mode)
    DensityMode mode = DensityMode::histogram;
    double bandwidth = 0.0;           // kernel mode only
};

inline DensityField density_estimate(const Ensemble& ens, const GridSpec& grid,
                                     DensityMode mode = DensityMode::histogram,
                                     double bandwidth = 0.0) {
    if (grid.cells() == 0 || !(grid.cell > 0.0))
        throw ConfigError("density_estimate: empty grid");
    DensityField df;
    df.grid = grid;
    df.mode = mode;
    df.bandwidth = bandwidth;
    df.rho.assign(grid.cells(), 0.0);
    df.k.assign(grid.cells(), 0.0);
    df.count.assign(grid.cells(), 0);
    const double inv_vol = 1.0 / grid.cell_volume();

    if (mode == DensityMode::histogram) {
        const auto cell_of = [&](const Vec3& p) -> std::size_t {
            const int ix = static_cast<int>(std::floor((p.x - grid.lo.x) / grid.cell));
            const int iy = static_cast<int>(std::floor((p.y - grid.lo.y) / grid.cell));
            const int iz = static_cast<int>(std::floor((p.z - grid.lo.z) / grid.cell));
            if (ix < 0 || iy < 0 || iz < 0 || ix >= grid.nx || iy >= grid.ny || iz >= grid.nz)
                throw ConfigError("density_estimate: grid does not cover the ensemble support");
            return static_cast<std::size_t>(ix) +
                   static_cast<std::size_t>(grid.nx) *
                       (static_cast<std::size_t>(iy) +
                        static_cast<std::size_t>(grid.ny) * static_cast<std::size_t>(iz));
        };
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const std::size_t c = cell_of(ens.pos[i]);
            df.rho[c] += ens.weight[i] * inv_vol;
            df.k[c] += ens.weight[i] * norm2(ens.vel[i]) * inv_vol;
            df.count[c] += 1;
        }
        return df;
    }

    // Kernel mode: product triweight, normalized per dimension.
    if (!(bandwidth > 0.0)) throw ConfigError("density_estimate: kernel mode needs a bandwidth");
    const double norm1d = 35.0 / (32.0 * bandwidth);
    const auto kernel1d = [&](double d) {
        const double u = d / bandwidth;
        if (std::abs(u) >= 1.0) return 0.0;
        const double t = 1.0 - u * u;
        return norm1d * t * t * t;
    };
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const Vec3& p = ens.pos[i];
        const int ix0 = std::max(0, static_cast<int>(std::floor((p.x - bandwidth - grid.lo.x) / grid.cell)));
        const int iy0 = std::max(0, static_cast<int>(std::floor((p.y - bandwidth - grid.lo.y) / grid.cell)));
        const int iz0 = std::max(0, static_cast<int>(std::floor((p.z - bandwidth - grid.lo.z) / grid.cell)));
        const int ix1 = std::min(grid.nx - 1, static_cast<int>(std::floor((p.x + bandwidth - grid.lo.x) / grid.cell)));
        const int iy1 = std::min(grid.ny - 1, static_cast<int>(std::floor((p.y + bandwidth - grid.lo.y) / grid.cell)));
        const int iz1 = std::min(grid.nz - 1, static_cast<int>(std::floor((p.z + bandwidth - grid.lo.z) / grid.cell)));
        for (int iz = iz0; iz <= iz1; ++iz)
            for (int iy = iy0; iy <= iy1; ++iy)
                for (int ix = ix0; ix <= ix1; ++ix) {
                    const std::size_t c = static_cast<std::size_t>(ix) +
                                          static_cast<std::size_t>(grid.nx) *
                                              (static_cast<std::size_t>(iy) +
                                               static_cast<std::size_t>(grid.ny) *
                                                   static_cast<std::size_t>(iz));
                    const Vec3 cc = grid.center(c);
                    const double kv = kernel1d(cc.x - p.x) * kernel1d(cc.y - p.y) * kernel1d(cc.z - p.z);
                    if (kv > 0.0) {
                        df.rho[c] += ens.weight[i] * kv;
                        df.k[c] += ens.weight[i] * norm2(ens.vel[i]) * kv;
                    }
                }
    }
    return df;
}

// ---------------------------------------------------------------------------
// Interpolation inequality rho^(5/3) <= K k.

// Explicit constant from minimizing c a^3 + k / a^2 over a > 0 and raising to
// the power 5/3, with c = (4 pi / 3) f_inf.
inline double interpolation_constant(double f_inf) {
    if (!(f_inf > 0.0)) throw ConfigError("interpolation_constant: f_inf must be > 0");
    const double c = 4.0 * 3.14159265358979323846 / 3.0 * f_inf;
    return std::pow(5.0 / 3.0, 5.0 / 3.0) * std::pow(1.5, 2.0 / 3.0) * std::pow(c, 2.0 / 3.0);
}

struct InterpolationCell {
    std::size_t index = 0;
    Vec3 center;
    double rho = 0.0, k = 0.0;
    double margin = 0.0;  // K k - rho^(5/3); >= 0 means the inequality holds
    bool interior = false;
};

struct InterpolationReport {
    double constant = 0.0;
    std::vector<InterpolationCell> cells;
    double worst_margin = 0.0;
    double worst_interior_margin = 0.0;
    bool all_pass = true;
    bool interior_pass = true;
};

// Per-cell margins of the interpolation inequality.  A cell is "interior"
// when its cube lies inside the ball |x| <= interior_radius.
inline InterpolationReport interpolation_check(const DensityField& df, double f_inf,
                                               double interior_radius =
                                                   std::numeric_limits<double>::infinity()) {
    InterpolationReport rep;
    rep.constant = interpolation_constant(f_inf);
    rep.cells.reserve(df.rho.size());
    const double half_diag = 0.5 * df.grid.cell * std::sqrt(3.0);
    bool first = true, first_interior = true;
    for (std::size_t c = 0; c < df.rho.size(); ++c) {
        InterpolationCell cell;
        cell.index = c;
        cell.center = df.grid.center(c);
        cell.rho = df.rho[c];
        cell.k = df.k[c];
        cell.margin = rep.constant * cell.k - std::pow(cell.rho, 5.0 / 3.0);
        cell.interior = norm(cell.center) + half_diag <= interior_radius;
        if (first || cell.margin < rep.worst_margin) rep.worst_margin = cell.margin;
        first = false;
        if (cell.interior) {
            if (first_interior || cell.margin < rep.worst_interior_margin)
                rep.worst_interior_margin = cell.margin;
            first_interior = false;
            if (cell.margin < 0.0) rep.interior_pass = false;
        }
        if (cell.margin < 0.0) rep.all_pass = false;
        rep.cells.push_back(cell);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Near/far split of the potential integral at one point.

struct HolderSplit {
    double near_field = 0.0;   // A: contributions within radius R
    double far_field = 0.0;    // B: contributions beyond R
    double radius = 0.0;
    double mass = 0.0;
    double near_bound = 0.0;   // K^(3/5) (8 pi)^(2/5) R^(1/5) (2T)^(3/5)
    double far_bound = 0.0;    // mass / R
    bool near_within_bound = false;
    bool far_within_bound = false;
};

inline HolderSplit holder_split(const Ensemble& ens, const Vec3& x, double radius,
                                const SofteningParams& s) {
    if (!(radius > 0.0)) throw ConfigError("holder_split: radius must be > 0");
    s.validate();
    const double eps2 = s.eps * s.eps;
    Accumulator a, b;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const double d = norm(ens.pos[i] - x);
        const double soft = std::sqrt(d * d + eps2);
        if (d <= radius)
            a.add(ens.weight[i] / soft);
        else
            b.add(ens.weight[i] / soft);
    }
    HolderSplit out;
    out.near_field = a.value();
    out.far_field = b.value();
    out.radius = radius;
    out.mass = total_mass(ens);
    const double kinetic = kinetic_energy(ens);
    const double kconst = interpolation_constant(ens.fparams.c1);
    out.near_bound = std::pow(kconst, 0.6) *
                     std::pow(8.0 * 3.14159265358979323846, 0.4) * std::pow(radius, 0.2) *
                     std::pow(2.0 * kinetic, 0.6);
    out.far_bound = out.mass / radius;
    out.near_within_bound = out.near_field <= out.near_bound;
    out.far_within_bound = out.far_field <= out.far_bound;
    return out;
}

// ---------------------------------------------------------------------------
// Decay-envelope fits.

struct DecayFitOptions {
    std::size_t velocity_bins = 30;
    std::size_t min_bin_count = 50;
    double speed_quantile_lo = 0.02;
    double speed_quantile_hi = 0.98;
    double tail_lo_fraction = 0.35;  // spatial fit window as fractions of the
    double tail_hi_fraction = 0.90;  //   outermost particle radius
    double alpha_band = 0.30;        // fractional agreement required for a pass
};

struct DecayFit {
    double mu = 0.0;         // fitted velocity-decay rate
    double c2 = 0.0;         // fitted amplitude of the speed-marginal density
    double alpha_fit = 0.0;  // fitted spatial tail exponent
    double mu_residual_rms = 0.0;
    double alpha_residual_rms = 0.0;
    std::size_t velocity_bins_used = 0;
    std::size_t spatial_cells_used = 0;
    bool pass = false;
};

inline DecayFit decay_fit(const Ensemble& ens, const DensityField& df,
                          const DecayFitOptions& opt = {}) {
    if (ens.size() < opt.min_bin_count * 4)
        throw NumericalError("decay_fit: insufficient statistics");

    // Velocity part: equal-count speed bins; density per spherical shell of
    // velocity space decays like exp(-mu v^2).
    std::vector<std::size_t> order(ens.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return norm2(ens.vel[a]) < norm2(ens.vel[b]);
    });
    const std::size_t lo = static_cast<std::size_t>(opt.speed_quantile_lo *
                                                    static_cast<double>(ens.size()));
    const std::size_t hi = static_cast<std::size_t>(opt.speed_quantile_hi *
                                                    static_cast<double>(ens.size()));
    if (hi <= lo + opt.min_bin_count)
        throw NumericalError("decay_fit: insufficient statistics");
    const double v_lo = norm(ens.vel[order[lo]]);
    const double v_hi = norm(ens.vel[order[hi - 1]]);
    if (!(v_hi - v_lo > 1e-12 * std::max(1.0, v_hi)))
        throw NumericalError("decay_fit: insufficient dynamic range in speeds");

    std::size_t bins = std::min<std::size_t>(opt.velocity_bins, (hi - lo) / opt.min_bin_count);
    if (bins < 4) throw NumericalError("decay_fit: insufficient statistics");
    std::vector<double> xs, ys;
    const double four_pi_over_3 = 4.0 * 3.14159265358979323846 / 3.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t ib = lo + (hi - lo) * b / bins;
        const std::size_t ie = lo + (hi - lo) * (b + 1) / bins;
        const double r0 = b == 0 ? v_lo : norm(ens.vel[order[ib]]);
        const double r1 = b + 1 == bins ? v_hi : norm(ens.vel[order[ie]]);
        if (!(r1 > r0)) continue;
        Accumulator mass;
        for (std::size_t k = ib; k < ie; ++k) mass.add(ens.weight[order[k]]);
        const double shell = four_pi_over_3 * (r1 * r1 * r1 - r0 * r0 * r0);
        const double density = mass.value() / shell;
        if (density > 0.0) {
            const double mid = 0.5 * (r0 + r1);
            xs.push_back(mid * mid);
            ys.push_back(std::log(density));
        }
    }
    if (xs.size() < 4) throw NumericalError("decay_fit: insufficient statistics");
    const LinearFit vfit = fit_linear(xs, ys);

    DecayFit out;
    out.mu = -vfit.slope;
    out.c2 = std::exp(vfit.intercept);
    out.mu_residual_rms = vfit.residual_rms;
    out.velocity_bins_used = xs.size();

    // Spatial part: log rho vs log(1 + r) over a tail window of the grid.
    double r_data = 0.0;
    for (const auto& p : ens.pos) r_data = std::max(r_data, norm(p));
    const double r0 = opt.tail_lo_fraction * r_data;
    const double r1 = opt.tail_hi_fraction * r_data;
    std::vector<double> sx, sy;
    for (std::size_t c = 0; c < df.rho.size(); ++c) {
        if (df.rho[c] <= 0.0) continue;
        const double r = norm(df.grid.center(c));
        if (r < r0 || r > r1) continue;
        sx.push_back(std::log(1.0 + r));
        sy.push_back(std::log(df.rho[c]));
    }
    if (sx.size() < 5) throw NumericalError("decay_fit: insufficient spatial statistics");
    const LinearFit sfit = fit_linear(sx, sy);
    out.alpha_fit = -sfit.slope;
    out.alpha_residual_rms = sfit.residual_rms;
    out.spatial_cells_used = sx.size();

    const double alpha = ens.fparams.alpha;
    out.pass = out.mu > 0.0 &&
               std::abs(out.alpha_fit - alpha) <= opt.alpha_band * std::abs(alpha);
    return out;
}

// ---------------------------------------------------------------------------
// Maximal velocity and field time integral.

struct MaxVelocityTracker {
    double c3 = 1.0;
    std::vector<double> times;
    std::vector<double> series;  // nondecreasing, >= c3

    double final_value() const { return series.empty() ? c3 : series.back(); }
};

inline MaxVelocityTracker max_velocity(const TrajectoryRecord& traj, double c3) {
    if (traj.step_times.empty()) throw ConfigError("max_velocity: empty trajectory");
    MaxVelocityTracker out;
    out.c3 = c3;
    out.times = traj.step_times;
    out.series.reserve(traj.step_times.size());
    double running = c3;
    for (double v : traj.step_max_speed) {
        running = std::max(running, v);
        out.series.push_back(running);
    }
    return out;
}

struct FieldIntegralReport {
    std::vector<double> per_particle;  // integral of |G| along each trajectory
    double max_integral = 0.0;
    double t_end = 0.0;
};

// Trapezoidal time integral of |G| per particle, from the stored per-step
// samples when available, else from the running integral kept by integrate().
inline FieldIntegralReport field_time_integral(const TrajectoryRecord& traj) {
    FieldIntegralReport out;
    out.t_end = traj.step_times.empty() ? 0.0 : traj.step_times.back();
    if (!traj.accel_history.empty()) {
        const std::size_t n = traj.accel_history.front().size();
        out.per_particle.assign(n, 0.0);
        for (std::size_t s = 1; s < traj.accel_history.size(); ++s) {
            const double h = traj.step_times[s] - traj.step_times[s - 1];
            for (std::size_t i = 0; i < n; ++i)
                out.per_particle[i] +=
                    0.5 * h * (traj.accel_history[s - 1][i] + traj.accel_history[s][i]);
        }
    } else if (!traj.field_integral.empty()) {
        out.per_particle = traj.field_integral;
    } else {
        throw ConfigError("field_time_integral: no acceleration history recorded");
    }
    for (double v : out.per_particle) out.max_integral = std::max(out.max_integral, v);
    return out;
}

}  // namespace vpsim
