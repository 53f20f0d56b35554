#pragma once

// Characteristic flow of the truncated system: all particles advance together
// under the self-consistent field.  Kick-drift-kick leapfrog is symplectic and
// time reversible, and weights are never touched, so the empirical measure is
// transported exactly as the continuum equations transport the density.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/gravity.hpp"
#include "vpsim/parallel.hpp"

namespace vpsim {

// Field evaluator for the self-consistent dynamics.
struct SelfGravity {
    FieldOptions opts;
    std::vector<Vec3> operator()(const Ensemble& ens) const { return accelerations(ens, opts); }
};

namespace detail {

inline void check_state(const Ensemble& ens, const char* where) {
    for (std::size_t i = 0; i < ens.size(); ++i)
        if (!is_finite(ens.pos[i]) || !is_finite(ens.vel[i]))
            throw NumericalError(std::string(where) + ": non-finite state at particle " +
                                 std::to_string(i));
}

template <class Field>
void kdk_step_inplace(Ensemble& ens, double dt, const Field& field,
                      std::vector<Vec3>& accel_begin, std::vector<Vec3>& accel_end) {
    check_state(ens, "leapfrog_step");
    accel_begin = field(ens);
    const double half = 0.5 * dt;
    parallel_for_blocks(ens.size(), 16384, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            ens.vel[i] += half * accel_begin[i];
            ens.pos[i] += dt * ens.vel[i];
        }
    });
    accel_end = field(ens);
    parallel_for_blocks(ens.size(), 16384, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) ens.vel[i] += half * accel_end[i];
    });
    check_state(ens, "leapfrog_step");
}

}  // namespace detail

// One kick-drift-kick step; the field is recomputed for each kick.
template <class Field>
Ensemble leapfrog_step(const Ensemble& ens, double dt, const Field& field) {
    if (!(dt > 0.0)) throw ConfigError("leapfrog_step: dt must be > 0");
    Ensemble next = ens;
    std::vector<Vec3> a0, a1;
    detail::kdk_step_inplace(next, dt, field, a0, a1);
    return next;
}

inline Ensemble leapfrog_step(const Ensemble& ens, double dt, const FieldOptions& opts) {
    return leapfrog_step(ens, dt, SelfGravity{opts});
}

struct RecorderConfig {
    double record_interval = 0.2;   // snapshot/energy cadence; dt must divide it
    bool store_snapshots = true;
    bool store_accel_history = false; // per-step |G| per particle; O(P * steps) memory
    bool energy_series = true;
};

struct TrajectoryRecord {
    // Recording-time series.
    std::vector<double> times;
    std::vector<Ensemble> snapshots;
    std::vector<double> kinetic, potential, total;
    std::vector<std::size_t> record_step_index;  // step number of each recorded time

    // Per-step series sampled at step boundaries (t = 0, dt, 2dt, ...).
    std::vector<double> step_times;
    std::vector<double> step_max_speed;
    std::vector<double> step_max_field;

    // Optional per-boundary per-particle |G| samples.
    std::vector<std::vector<double>> accel_history;

    // Running trapezoidal integral of |G| along each trajectory, at t_end.
    std::vector<double> field_integral;

    Ensemble final_state;
    double softening_eps = 0.0;
};

namespace detail {

inline std::vector<double> field_magnitudes(const std::vector<Vec3>& g) {
    std::vector<double> m(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = norm(g[i]);
    return m;
}

inline double max_of(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m = std::max(m, x);
    return m;
}

}  // namespace detail

// Repeated leapfrog steps with diagnostics recording.  t_end and the
// recording interval must both be integer multiples of dt.
template <class Field>
TrajectoryRecord integrate(const Ensemble& ens0, double t_end, double dt, const Field& field,
                           const RecorderConfig& rec, const FieldOptions& energy_opts) {
    if (!(t_end > 0.0)) throw ConfigError("integrate: t_end must be > 0");
    if (!(dt > 0.0)) throw ConfigError("integrate: dt must be > 0");
    const auto near_multiple = [dt](double span, const char* what) {
        const double n = std::round(span / dt);
        if (n < 1.0 || std::abs(n * dt - span) > 1e-9 * std::max(1.0, std::abs(span)))
            throw ConfigError(std::string("integrate: dt must divide ") + what);
        return static_cast<std::size_t>(n);
    };
    const std::size_t steps_per_record = near_multiple(rec.record_interval, "the recording interval");
    const std::size_t total_steps = near_multiple(t_end, "t_end");

    Ensemble state = ens0;
    detail::check_state(state, "integrate: step 0");
    TrajectoryRecord out;
    out.softening_eps = energy_opts.softening.eps;

    const auto record = [&](double t, std::size_t step) {
        out.times.push_back(t);
        out.record_step_index.push_back(step);
        if (rec.energy_series) {
            const double k = kinetic_energy(state);
            const double u =
                energy_opts.use_tree(state.size())
                    ? potential_energy_tree(state, energy_opts.softening, energy_opts.theta)
                    : potential_energy(state, energy_opts.softening);
            out.kinetic.push_back(k);
            out.potential.push_back(u);
            out.total.push_back(k + u);
        }
        if (rec.store_snapshots) out.snapshots.push_back(state);
    };

    std::vector<Vec3> a_begin, a_end;
    std::vector<double> g_prev = detail::field_magnitudes(field(state));
    out.field_integral.assign(state.size(), 0.0);
    out.step_times.push_back(0.0);
    out.step_max_speed.push_back(max_speed(state));
    out.step_max_field.push_back(detail::max_of(g_prev));
    if (rec.store_accel_history) out.accel_history.push_back(g_prev);
    record(0.0, 0);

    for (std::size_t step = 0; step < total_steps; ++step) {
        try {
            detail::kdk_step_inplace(state, dt, field, a_begin, a_end);
        } catch (const NumericalError& err) {
            throw NumericalError("integrate: step " + std::to_string(step + 1) + ": " + err.what());
        }
        const double t = static_cast<double>(step + 1) * dt;
        const std::vector<double> g_now = detail::field_magnitudes(a_end);
        for (std::size_t i = 0; i < state.size(); ++i)
            out.field_integral[i] += 0.5 * dt * (g_prev[i] + g_now[i]);
        g_prev = g_now;
        out.step_times.push_back(t);
        out.step_max_speed.push_back(max_speed(state));
        out.step_max_field.push_back(detail::max_of(g_now));
        if (rec.store_accel_history) out.accel_history.push_back(g_now);
        if ((step + 1) % steps_per_record == 0) record(t, step + 1);
    }
    out.final_state = state;
    return out;
}

// Self-consistent variant: the same options drive kicks and energy records.
inline TrajectoryRecord integrate(const Ensemble& ens0, double t_end, double dt,
                                  const FieldOptions& opts, const RecorderConfig& rec) {
    return integrate(ens0, t_end, dt, SelfGravity{opts}, rec, opts);
}

}  // namespace vpsim
