#pragma once

// Families of truncated-dynamics runs over increasing cutoff N, sharing one
// master sample (common random numbers with nested supports) so trajectories
// of consecutive cutoffs can be compared particle by particle.  Fits the
// kinetic-energy, initial-energy and maximal-velocity scaling exponents and
// the gap series that back the large-N limit.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vpsim/diagnostics.hpp"
#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/initial_data.hpp"
#include "vpsim/integrator.hpp"
#include "vpsim/numerics.hpp"
#include "vpsim/sampling.hpp"

namespace vpsim {

struct StudySpec {
    InitialDataParams params;
    double beta = 0.3;
    std::vector<double> n_list = {8, 16, 32, 64};  // strictly increasing cutoffs
    double horizon = 2.0;
    double dt = -1.0;            // <= 0: auto from the largest run's spacing
    double softening = -1.0;     // <= 0: auto; fixed across the family
    double record_interval = 0.2;
    std::size_t particle_cap = 100000;  // master sample size (= P at the largest N)
    std::uint64_t seed = 1;
    double theta = 0.4;
    std::size_t direct_limit = 4096;
    double c3 = 1.0;
    bool assert_bounds = true;   // enforce 1 < alpha < 3 and admissible beta
    bool free_streaming = false; // test hook: zero all weights (G == 0 exactly)
    int grid_cells = 12;
    DecayFitOptions decay;

    void validate() const {
        params.validate();
        if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
        if (n_list.size() < 3)
            throw ConfigError("study: need at least 3 cutoffs for an exponent fit");
        for (std::size_t i = 0; i + 1 < n_list.size(); ++i)
            if (!(n_list[i] < n_list[i + 1]))
                throw ConfigError("study: n_list must be strictly increasing");
        if (!(n_list.front() > 0.0)) throw ConfigError("study: cutoffs must be positive");
        if (!(horizon >= 0.0)) throw ConfigError("study: horizon must be >= 0");
        if (particle_cap == 0) throw ConfigError("study: particle cap must be >= 1");
        if (assert_bounds) {
            if (!(params.alpha > 1.0 && params.alpha < 3.0))
                throw ConfigError(
                    "bound-assertion studies require 1 < alpha < 3 (the infinite-mass "
                    "power-law regime)");
            if (!(beta < beta_admissible_limit(params.alpha)))
                throw ConfigError("bound-assertion studies require beta < 2/(5(3-alpha)) = " +
                                  std::to_string(beta_admissible_limit(params.alpha)));
        }
    }

    TruncationParams truncation(double n_cut) const { return {n_cut, beta}; }
    TruncationParams master_truncation() const { return truncation(n_list.back()); }

    double effective_softening() const {
        if (softening >= 0.0) return softening;
        return default_softening(master_truncation(), particle_cap).eps;
    }

    // Auto time step: a twentieth of the spacing-crossing time at the finest
    // sampling, snapped so it divides the recording interval.
    double effective_dt() const {
        double raw = dt;
        if (!(raw > 0.0))
            raw = 0.05 * mean_spacing(master_truncation(), particle_cap) * std::sqrt(params.lambda);
        const double interval = record_interval > 0.0 ? record_interval : horizon;
        if (!(interval > 0.0)) return raw;
        const double k = std::max(1.0, std::ceil(interval / raw));
        return interval / k;
    }

    FieldOptions field_options() const {
        FieldOptions f;
        f.softening = {effective_softening()};
        f.theta = theta;
        f.direct_limit = direct_limit;
        return f;
    }
};

struct RunSummary {
    double n_cut = 0.0;
    std::size_t particles = 0;
    double mass = 0.0;          // truncated mass from quadrature
    double mass_sampled = 0.0;  // compensated sum of the weights
    double kinetic0 = 0.0;
    double e0 = 0.0;
    double sup_kinetic = 0.0;   // sup over recorded times of T^N(t)
    double vmax_final = 0.0;    // maximal velocity at the horizon (floored at c3)
    double energy_drift = 0.0;  // max |E(t) - E(0)| / |E(0)|
    double field_integral_max = 0.0;
    DecayFit decay_initial, decay_final;
    bool has_decay_initial = false, has_decay_final = false;

    std::vector<double> times, kinetic, potential, total;  // recorded energy series
    std::vector<double> step_times, step_max_speed, step_max_field;
};

struct GapSeries {
    double n_lo = 0.0, n_hi = 0.0;
    std::size_t shared_particles = 0;
    std::vector<double> times;
    std::vector<double> position_gap;  // sup over shared particles of |dX|
    std::vector<double> velocity_gap;  // sup over shared particles of |dV|
    double sup_position_gap = 0.0;
    double sup_velocity_gap = 0.0;
};

struct StudyVerdicts {
    double kinetic_ceiling = 0.0;  // (7/3) beta (3 - alpha) + tolerance
    double e0_ceiling = 0.0;       // beta (3 - alpha) + tolerance
    double vmax_ceiling = 1.1;
    bool kinetic_ok = false;
    bool e0_ok = false;
    bool vmax_ok = false;
};

struct StudyResult {
    StudySpec spec;
    double dt_used = 0.0, eps_used = 0.0;
    std::vector<RunSummary> runs;
    std::vector<GapSeries> gaps;
    PowerLawFit kinetic_fit, e0_fit, vmax_fit;
    bool e0_fit_valid = false;
    double field_exponent = 0.0;  // slope of log max int|G| vs log V^N
    bool field_exponent_valid = false;
    StudyVerdicts verdicts;
};

namespace detail {

inline GapSeries gaps_between(const TrajectoryRecord& lo_run, const TrajectoryRecord& hi_run,
                              double n_lo, double n_hi, std::uint64_t master_count) {
    if (lo_run.snapshots.size() != hi_run.snapshots.size())
        throw ConfigError("convergence gaps: mismatched recording grids");
    GapSeries g;
    g.n_lo = n_lo;
    g.n_hi = n_hi;
    // Map master id -> index in the larger run (ids are master indices).
    std::vector<std::uint64_t> where(master_count, 0);
    const Ensemble& hi0 = hi_run.snapshots.front();
    for (std::size_t i = 0; i < hi0.size(); ++i) where[hi0.id[i]] = i + 1;
    const Ensemble& lo0 = lo_run.snapshots.front();
    g.shared_particles = lo0.size();
    for (std::size_t t = 0; t < lo_run.snapshots.size(); ++t) {
        const Ensemble& a = lo_run.snapshots[t];
        const Ensemble& b = hi_run.snapshots[t];
        double dx = 0.0, dv = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::uint64_t slot = where[a.id[i]];
            if (slot == 0)
                throw ConfigError("convergence gaps: seed/support mismatch (unshared particle)");
            const std::size_t j = static_cast<std::size_t>(slot - 1);
            dx = std::max(dx, norm(a.pos[i] - b.pos[j]));
            dv = std::max(dv, norm(a.vel[i] - b.vel[j]));
        }
        g.times.push_back(lo_run.times[t]);
        g.position_gap.push_back(dx);
        g.velocity_gap.push_back(dv);
        g.sup_position_gap = std::max(g.sup_position_gap, dx);
        g.sup_velocity_gap = std::max(g.sup_velocity_gap, dv);
    }
    return g;
}

inline RunSummary summarize_run(const StudySpec& spec, const Ensemble& initial,
                                const TrajectoryRecord& traj, double n_cut, double mass) {
    RunSummary r;
    r.n_cut = n_cut;
    r.particles = initial.size();
    r.mass = mass;
    r.mass_sampled = total_mass(initial);
    r.times = traj.times;
    r.kinetic = traj.kinetic;
    r.potential = traj.potential;
    r.total = traj.total;
    r.step_times = traj.step_times;
    r.step_max_speed = traj.step_max_speed;
    r.step_max_field = traj.step_max_field;
    r.kinetic0 = traj.kinetic.empty() ? kinetic_energy(initial) : traj.kinetic.front();
    r.e0 = traj.total.empty() ? 0.0 : traj.total.front();
    for (double k : traj.kinetic) r.sup_kinetic = std::max(r.sup_kinetic, k);
    r.vmax_final = max_velocity(traj, spec.c3).final_value();
    if (!traj.total.empty() && traj.total.front() != 0.0) {
        for (double e : traj.total)
            r.energy_drift = std::max(r.energy_drift,
                                      std::abs(e - traj.total.front()) / std::abs(traj.total.front()));
    }
    const FieldIntegralReport fir = field_time_integral(traj);
    r.field_integral_max = fir.max_integral;
    try {
        const DensityField df0 = density_estimate(initial, GridSpec::cover(initial, spec.grid_cells));
        r.decay_initial = decay_fit(initial, df0, spec.decay);
        r.has_decay_initial = true;
    } catch (const NumericalError&) {
    }
    try {
        const Ensemble& fin = traj.final_state;
        const DensityField dff = density_estimate(fin, GridSpec::cover(fin, spec.grid_cells));
        r.decay_final = decay_fit(fin, dff, spec.decay);
        r.has_decay_final = true;
    } catch (const NumericalError&) {
    }
    return r;
}

}  // namespace detail

// Per-run sink for snapshot/series output; invoked in cutoff order.
using StudyRunSink =
    std::function<void(std::size_t run_index, const Ensemble& initial, const TrajectoryRecord&)>;

inline StudyResult run_family(const StudySpec& spec, const StudyRunSink& sink = {}) {
    spec.validate();
    if (!(spec.horizon > 0.0)) throw ConfigError("run_family: horizon must be > 0");

    StudyResult res;
    res.spec = spec;
    res.dt_used = spec.effective_dt();
    res.eps_used = spec.effective_softening();

    FieldOptions fopts = spec.field_options();
    RecorderConfig rec;
    rec.record_interval = spec.record_interval > 0.0 ? spec.record_interval : spec.horizon;
    rec.store_snapshots = true;
    rec.energy_series = true;

    const TruncationParams master = spec.master_truncation();
    TrajectoryRecord prev_traj;
    double prev_n = 0.0;
    bool have_prev = false;

    for (std::size_t idx = 0; idx < spec.n_list.size(); ++idx) {
        const double n_cut = spec.n_list[idx];
        const TruncationParams trunc = spec.truncation(n_cut);
        Ensemble ens;
        try {
            ens = nested_sample(spec.params, trunc, master, spec.particle_cap, spec.seed);
        } catch (const std::exception& err) {
            throw NumericalError("run_family: cutoff " + std::to_string(n_cut) +
                                 " sampling failed: " + err.what());
        }
        if (spec.free_streaming)
            for (auto& w : ens.weight) w = 0.0;
        const double mass = spec.free_streaming ? 0.0 : truncated_mass(spec.params, trunc);

        TrajectoryRecord traj;
        try {
            traj = integrate(ens, spec.horizon, res.dt_used, fopts, rec);
        } catch (const std::exception& err) {
            throw NumericalError("run_family: cutoff " + std::to_string(n_cut) +
                                 " failed: " + err.what());
        }
        res.runs.push_back(detail::summarize_run(spec, ens, traj, n_cut, mass));
        if (sink) sink(idx, ens, traj);

        if (have_prev)
            res.gaps.push_back(
                detail::gaps_between(prev_traj, traj, prev_n, n_cut, spec.particle_cap));
        prev_traj = std::move(traj);
        prev_n = n_cut;
        have_prev = true;
    }

    // Scaling fits vs N.
    std::vector<double> ns, sup_t, e0s, vmaxs, fints;
    for (const auto& r : res.runs) {
        ns.push_back(r.n_cut);
        sup_t.push_back(r.sup_kinetic);
        e0s.push_back(r.e0);
        vmaxs.push_back(r.vmax_final);
        fints.push_back(r.field_integral_max);
    }
    const double alpha = spec.params.alpha;
    res.verdicts.kinetic_ceiling = 7.0 / 3.0 * spec.beta * (3.0 - alpha) + 0.15;
    res.verdicts.e0_ceiling = spec.beta * (3.0 - alpha) + 0.15;
    res.verdicts.vmax_ceiling = 1.1;
    try {
        res.kinetic_fit = fit_power_law(ns, sup_t);
        res.verdicts.kinetic_ok = res.kinetic_fit.slope <= res.verdicts.kinetic_ceiling;
    } catch (const NumericalError&) {
    }
    try {
        res.e0_fit = fit_power_law(ns, e0s);
        res.e0_fit_valid = res.e0_fit.points == res.runs.size();
        res.verdicts.e0_ok = res.e0_fit_valid && res.e0_fit.slope <= res.verdicts.e0_ceiling;
    } catch (const NumericalError&) {
    }
    try {
        res.vmax_fit = fit_power_law(ns, vmaxs);
        res.verdicts.vmax_ok = res.vmax_fit.slope <= res.verdicts.vmax_ceiling;
    } catch (const NumericalError&) {
    }
    try {
        const PowerLawFit f = fit_power_law(vmaxs, fints);
        res.field_exponent = f.slope;
        res.field_exponent_valid = true;
    } catch (const NumericalError&) {
    }
    return res;
}

// Trajectory gap series between two cutoffs of the same family, using the
// family's master sample (common random numbers).  horizon == 0 compares the
// initial data only.
inline GapSeries convergence_pair(const StudySpec& spec, double n_lo, double n_hi) {
    spec.validate();
    if (!(n_lo <= n_hi)) throw ConfigError("convergence_pair: cutoffs out of order");
    if (n_hi > spec.n_list.back())
        throw ConfigError("convergence_pair: cutoff exceeds the family master support");

    const TruncationParams master = spec.master_truncation();
    Ensemble lo = nested_sample(spec.params, spec.truncation(n_lo), master, spec.particle_cap,
                                spec.seed);
    Ensemble hi = nested_sample(spec.params, spec.truncation(n_hi), master, spec.particle_cap,
                                spec.seed);
    if (spec.free_streaming) {
        for (auto& w : lo.weight) w = 0.0;
        for (auto& w : hi.weight) w = 0.0;
    }

    if (spec.horizon == 0.0) {
        TrajectoryRecord a, b;
        a.snapshots = {lo};
        a.times = {0.0};
        b.snapshots = {hi};
        b.times = {0.0};
        return detail::gaps_between(a, b, n_lo, n_hi, spec.particle_cap);
    }

    FieldOptions fopts = spec.field_options();
    RecorderConfig rec;
    rec.record_interval = spec.record_interval > 0.0 ? spec.record_interval : spec.horizon;
    rec.store_snapshots = true;
    rec.energy_series = false;
    const double dt = spec.effective_dt();
    const TrajectoryRecord ta = integrate(lo, spec.horizon, dt, fopts, rec);
    const TrajectoryRecord tb = integrate(hi, spec.horizon, dt, fopts, rec);
    return detail::gaps_between(ta, tb, n_lo, n_hi, spec.particle_cap);
}

struct VelocityBoundVerdict {
    bool ok = false;
    double max_ratio = 0.0;   // max over N of V^N(T)/N
    double base_ratio = 0.0;  // value at the smallest N
    double slope = 0.0;       // fitted log V^N vs log N slope
    double margin = 1.0;
    double slope_ceiling = 1.1;
};

// Checks the linear-in-N control of the maximal velocity across the family.
inline VelocityBoundVerdict velocity_bound_check(const StudyResult& res, double margin = 1.0) {
    if (res.runs.size() < 3)
        throw ConfigError("velocity_bound_check: need at least 3 cutoffs");
    VelocityBoundVerdict v;
    v.margin = margin;
    v.base_ratio = res.runs.front().vmax_final / res.runs.front().n_cut;
    for (const auto& r : res.runs) v.max_ratio = std::max(v.max_ratio, r.vmax_final / r.n_cut);
    std::vector<double> ns, vm;
    for (const auto& r : res.runs) {
        ns.push_back(r.n_cut);
        vm.push_back(r.vmax_final);
    }
    v.slope = fit_power_law(ns, vm).slope;
    v.ok = v.max_ratio <= (1.0 + margin) * v.base_ratio && v.slope <= v.slope_ceiling;
    return v;
}

}  // namespace vpsim
