// vpsim: sample, evolve and diagnose truncated self-gravitating ensembles.
//
// Exit codes: 0 ok, 1 verdict failure, 2 usage error, 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vpsim/config.hpp"
#include "vpsim/diagnostics.hpp"
#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/gravity.hpp"
#include "vpsim/integrator.hpp"
#include "vpsim/parallel.hpp"
#include "vpsim/rng.hpp"
#include "vpsim/sampling.hpp"
#include "vpsim/snapshot.hpp"
#include "vpsim/study.hpp"
#include "vpsim/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_override;
    std::int64_t seed_override = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
    auto* opt = cmd->add_option("--config", flags.config_path, "key = value config file");
    if (config_required) opt->required();
    cmd->add_option("--out", flags.out_override, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed_override, "master seed (overrides config)");
}

vpsim::RunConfig load_config(const CommonFlags& flags) {
    vpsim::RunConfig cfg =
        flags.config_path.empty() ? vpsim::RunConfig{} : vpsim::parse_config_file(flags.config_path);
    if (!flags.out_override.empty()) cfg.out = flags.out_override;
    if (flags.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed_override);
    if (!std::getenv("VPSIM_THREADS") && cfg.threads > 0)
        vpsim::set_thread_count(static_cast<int>(cfg.threads));
    return cfg;
}

void write_run_metadata(const std::string& dir, const vpsim::RunConfig& cfg) {
    fs::create_directories(dir);
    vpsim::write_file(dir + "/version.txt", std::string("vpsim ") + vpsim::kVersion + "\n");
    vpsim::write_file(dir + "/config_echo.txt", vpsim::config_echo(cfg));
}

double resolve_eps(const vpsim::RunConfig& cfg, const vpsim::Ensemble& ens) {
    if (cfg.eps >= 0.0) return cfg.eps;
    return vpsim::default_softening(ens.tparams, ens.size()).eps;
}

double resolve_dt(const vpsim::RunConfig& cfg, const vpsim::Ensemble& ens) {
    if (cfg.dt > 0.0) return cfg.dt;
    const double raw = 0.05 * vpsim::mean_spacing(ens.tparams, ens.size()) *
                       std::sqrt(ens.fparams.lambda);
    const double k = std::max(1.0, std::ceil(cfg.record_interval / raw));
    return cfg.record_interval / k;
}

json summary_common(const vpsim::RunConfig& cfg) {
    json j;
    j["version"] = vpsim::kVersion;
    j["seed"] = cfg.seed;
    return j;
}

int cmd_sample(const CommonFlags& flags) {
    const vpsim::RunConfig cfg = load_config(flags);
    const vpsim::Ensemble ens = vpsim::sample_ensemble(cfg.initial_params(), cfg.truncation_params(),
                                                       cfg.particles, cfg.seed);
    write_run_metadata(cfg.out, cfg);
    const double eps = resolve_eps(cfg, ens);
    vpsim::write_snapshot(cfg.out + "/ensemble.vpen", ens, eps);
    json j = summary_common(cfg);
    j["mass"] = vpsim::total_mass(ens);
    j["count"] = ens.size();
    j["eps"] = eps;
    vpsim::write_file(cfg.out + "/summary.json", j.dump(2) + "\n");
    std::cout << "sampled " << ens.size() << " particles, mass " << vpsim::total_mass(ens)
              << " -> " << cfg.out << "\n";
    return 0;
}

int cmd_run(const CommonFlags& flags, const std::string& snapshot_path) {
    const vpsim::RunConfig cfg = load_config(flags);
    vpsim::Ensemble ens;
    vpsim::SnapshotMeta meta;
    if (!snapshot_path.empty()) {
        ens = vpsim::read_snapshot(snapshot_path, &meta);
    } else {
        ens = vpsim::sample_ensemble(cfg.initial_params(), cfg.truncation_params(), cfg.particles,
                                     cfg.seed);
    }

    const double eps = cfg.eps >= 0.0 ? cfg.eps
                       : !snapshot_path.empty() ? meta.eps
                                                : resolve_eps(cfg, ens);
    const double dt = resolve_dt(cfg, ens);

    vpsim::FieldOptions fopts;
    fopts.softening = {eps};
    fopts.theta = cfg.theta;
    fopts.direct_limit = cfg.direct_limit;

    vpsim::RecorderConfig rec;
    rec.record_interval = cfg.energy_every_step ? dt : cfg.record_interval;
    rec.store_snapshots = false;
    rec.energy_series = true;

    const vpsim::TrajectoryRecord traj = vpsim::integrate(ens, cfg.horizon, dt, fopts, rec);

    write_run_metadata(cfg.out, cfg);
    vpsim::write_snapshot(cfg.out + "/snapshot_initial.vpen", ens, eps);
    vpsim::write_snapshot(cfg.out + "/snapshot_final.vpen", traj.final_state, eps);
    vpsim::write_energy_csv(cfg.out + "/energy.csv", traj);

    json j = summary_common(cfg);
    j["eps"] = eps;
    j["dt"] = dt;
    j["horizon"] = cfg.horizon;
    j["count"] = ens.size();
    j["mass"] = vpsim::total_mass(ens);
    j["e0"] = traj.total.empty() ? 0.0 : traj.total.front();
    double drift = 0.0;
    if (!traj.total.empty() && traj.total.front() != 0.0)
        for (double e : traj.total)
            drift = std::max(drift, std::abs(e - traj.total.front()) / std::abs(traj.total.front()));
    j["energy_drift"] = drift;
    const vpsim::MaxVelocityTracker tracker = vpsim::max_velocity(traj, cfg.c3);
    j["max_velocity"] = tracker.final_value();
    j["c3"] = cfg.c3;
    const vpsim::FieldIntegralReport fir = vpsim::field_time_integral(traj);
    j["field_integral_max"] = fir.max_integral;

    try {
        const vpsim::DensityField df = vpsim::density_estimate(
            traj.final_state, vpsim::GridSpec::cover(traj.final_state,
                                                     static_cast<int>(cfg.grid_cells)));
        vpsim::DecayFitOptions dopt;
        dopt.alpha_band = cfg.decay_band;
        j["decay_final"] = vpsim::decay_fit_json(vpsim::decay_fit(traj.final_state, df, dopt));
    } catch (const vpsim::NumericalError& e) {
        j["decay_final"] = json{{"skipped", e.what()}};
    }
    vpsim::write_file(cfg.out + "/summary.json", j.dump(2) + "\n");
    std::cout << "run finished: drift " << drift << ", outputs in " << cfg.out << "\n";
    return 0;
}

int cmd_study(const CommonFlags& flags) {
    const vpsim::RunConfig cfg = load_config(flags);
    vpsim::StudySpec spec = cfg.study_spec();
    write_run_metadata(cfg.out, cfg);

    const auto run_dir = [&](std::size_t idx) {
        return cfg.out + "/N_" + vpsim::format_double(spec.n_list[idx]);
    };
    const auto sink = [&](std::size_t idx, const vpsim::Ensemble& initial,
                          const vpsim::TrajectoryRecord& traj) {
        const std::string dir = run_dir(idx);
        fs::create_directories(dir);
        vpsim::write_snapshot(dir + "/snapshot_initial.vpen", initial, spec.effective_softening());
        vpsim::write_snapshot(dir + "/snapshot_final.vpen", traj.final_state,
                              spec.effective_softening());
        vpsim::write_energy_csv(dir + "/energy.csv", traj);
    };

    const vpsim::StudyResult res = vpsim::run_family(spec, sink);
    const vpsim::VelocityBoundVerdict vbc = vpsim::velocity_bound_check(res, cfg.velocity_margin);

    json j = summary_common(cfg);
    j["dt"] = res.dt_used;
    j["eps"] = res.eps_used;
    json runs = json::array();
    for (const auto& r : res.runs) {
        json rj;
        rj["n"] = r.n_cut;
        rj["particles"] = r.particles;
        rj["mass"] = r.mass;
        rj["mass_sampled"] = r.mass_sampled;
        rj["e0"] = r.e0;
        rj["kinetic0"] = r.kinetic0;
        rj["sup_kinetic"] = r.sup_kinetic;
        rj["vmax"] = r.vmax_final;
        rj["energy_drift"] = r.energy_drift;
        rj["field_integral_max"] = r.field_integral_max;
        if (r.has_decay_initial) rj["decay_initial"] = vpsim::decay_fit_json(r.decay_initial);
        if (r.has_decay_final) rj["decay_final"] = vpsim::decay_fit_json(r.decay_final);
        runs.push_back(rj);
    }
    j["runs"] = runs;
    json gaps = json::array();
    for (const auto& g : res.gaps) {
        json gj;
        gj["n_lo"] = g.n_lo;
        gj["n_hi"] = g.n_hi;
        gj["shared_particles"] = g.shared_particles;
        gj["sup_position_gap"] = g.sup_position_gap;
        gj["sup_velocity_gap"] = g.sup_velocity_gap;
        gj["times"] = g.times;
        gj["position_gap"] = g.position_gap;
        gj["velocity_gap"] = g.velocity_gap;
        gaps.push_back(gj);
    }
    j["gaps"] = gaps;
    j["fits"] = {
        {"sup_kinetic_slope", res.kinetic_fit.slope},
        {"sup_kinetic_ceiling", res.verdicts.kinetic_ceiling},
        {"e0_slope", res.e0_fit_valid ? res.e0_fit.slope : 0.0},
        {"e0_fit_valid", res.e0_fit_valid},
        {"e0_ceiling", res.verdicts.e0_ceiling},
        {"vmax_slope", res.vmax_fit.slope},
        {"vmax_ceiling", res.verdicts.vmax_ceiling},
        {"field_integral_exponent", res.field_exponent},
        {"field_integral_exponent_valid", res.field_exponent_valid},
    };
    j["verdicts"] = {
        {"kinetic_scaling", res.verdicts.kinetic_ok ? "pass" : "fail"},
        {"e0_scaling", res.verdicts.e0_ok ? "pass" : "fail"},
        {"vmax_scaling", res.verdicts.vmax_ok ? "pass" : "fail"},
        {"velocity_bound", vbc.ok ? "pass" : "fail"},
    };
    j["velocity_bound"] = {
        {"max_ratio", vbc.max_ratio},
        {"base_ratio", vbc.base_ratio},
        {"slope", vbc.slope},
        {"margin", vbc.margin},
    };
    vpsim::write_file(cfg.out + "/summary.json", j.dump(2) + "\n");

    const bool all_ok = res.verdicts.kinetic_ok && res.verdicts.e0_ok && res.verdicts.vmax_ok &&
                        vbc.ok;
    std::cout << "study: sup T slope " << res.kinetic_fit.slope << " (<= "
              << res.verdicts.kinetic_ceiling << "), E0 slope "
              << (res.e0_fit_valid ? res.e0_fit.slope : std::nan("")) << " (<= "
              << res.verdicts.e0_ceiling << "), V slope " << res.vmax_fit.slope
              << " (<= " << res.verdicts.vmax_ceiling << ")\n";
    if (cfg.assert_bounds && !all_ok) {
        std::cerr << "study: scaling verdict failure (see " << cfg.out << "/summary.json)\n";
        return 1;
    }
    return 0;
}

int cmd_check(const CommonFlags& flags, const std::string& snapshot_path) {
    const vpsim::RunConfig cfg = load_config(flags);
    vpsim::SnapshotMeta meta;
    const vpsim::Ensemble ens = vpsim::read_snapshot(snapshot_path, &meta);
    const double eps = cfg.eps >= 0.0 ? cfg.eps : meta.eps;

    write_run_metadata(cfg.out, cfg);
    const vpsim::EnergyReport er = vpsim::energy_report(ens, {eps});

    double r_data = 0.0;
    for (const auto& p : ens.pos) r_data = std::max(r_data, vpsim::norm(p));
    const vpsim::DensityField df = vpsim::density_estimate(
        ens, vpsim::GridSpec::cover(ens, static_cast<int>(cfg.grid_cells)));
    const vpsim::InterpolationReport interp =
        vpsim::interpolation_check(df, ens.fparams.c1, r_data);
    vpsim::write_interpolation_csv(cfg.out + "/interpolation.csv", interp);

    json j = summary_common(cfg);
    j["count"] = ens.size();
    j["mass"] = vpsim::total_mass(ens);
    j["energy"] = {{"kinetic", er.kinetic}, {"potential", er.potential}, {"total", er.total},
                   {"eps", er.eps}};
    j["interpolation"] = {{"constant", interp.constant},
                          {"worst_interior_margin", interp.worst_interior_margin},
                          {"interior_pass", interp.interior_pass}};
    bool decay_ok = true;
    try {
        vpsim::DecayFitOptions dopt;
        dopt.alpha_band = cfg.decay_band;
        const vpsim::DecayFit fit = vpsim::decay_fit(ens, df, dopt);
        j["decay"] = vpsim::decay_fit_json(fit);
        decay_ok = fit.mu > 0.0;
    } catch (const vpsim::NumericalError& e) {
        j["decay"] = json{{"skipped", e.what()}};
    }
    vpsim::write_file(cfg.out + "/summary.json", j.dump(2) + "\n");

    if (!interp.interior_pass || !decay_ok) {
        std::cerr << "check: verdict failure (see " << cfg.out << "/summary.json)\n";
        return 1;
    }
    std::cout << "check ok: " << ens.size() << " particles, outputs in " << cfg.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Built-in brute-force oracles (independent reimplementations on purpose).

struct OracleOutcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

OracleOutcome oracle_direct_sum(std::uint64_t seed) {
    vpsim::RngStream rng(seed, vpsim::RngPurpose::scratch, 1);
    vpsim::Ensemble ens;
    for (std::size_t i = 0; i < 128; ++i) {
        const vpsim::Vec3 x{2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                            2.0 * rng.next_double() - 1.0};
        const vpsim::Vec3 v{0, 0, 0};
        ens.push_back(x, v, 0.5 + rng.next_double(), i);
    }
    std::vector<vpsim::Vec3> queries;
    for (std::size_t q = 0; q < 8; ++q)
        queries.push_back({2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0,
                           2.0 * rng.next_double() - 1.0});
    const double eps = 0.01, eps2 = eps * eps;

    const auto fields = vpsim::field_direct(ens, queries, {eps});
    double worst = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        vpsim::Vec3 ref{0, 0, 0};
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const vpsim::Vec3 d = queries[q] - ens.pos[i];
            const double r2 = vpsim::norm2(d) + eps2;
            ref -= ens.weight[i] / (r2 * std::sqrt(r2)) * d;
        }
        worst = std::max(worst, vpsim::norm(fields[q] - ref) / std::max(1e-300, vpsim::norm(ref)));
    }

    double u_ref = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i)
        for (std::size_t jj = i + 1; jj < ens.size(); ++jj)
            u_ref -= ens.weight[i] * ens.weight[jj] /
                     std::sqrt(vpsim::norm2(ens.pos[i] - ens.pos[jj]) + eps2);
    const double u = vpsim::potential_energy(ens, {eps});
    const double u_err = std::abs(u - u_ref) / std::abs(u_ref);

    OracleOutcome out;
    out.name = "direct-sum field + potential vs naive double loop";
    out.pass = worst < 1e-12 && u_err < 1e-12;
    out.detail = "field rel err " + vpsim::format_double(worst) + ", potential rel err " +
                 vpsim::format_double(u_err);
    return out;
}

OracleOutcome oracle_mass_mc(std::uint64_t seed, std::size_t samples) {
    const vpsim::InitialDataParams p{1.0, 1.0, 2.0};
    const vpsim::TruncationParams t{5.0, 0.4};
    const double quad = vpsim::truncated_mass(p, t);

    const double R = t.spatial_radius();
    const double sigma = std::sqrt(0.5 / p.lambda);
    const std::size_t block = 1 << 16;
    const std::size_t nblocks = (samples + block - 1) / block;
    std::vector<double> sums(nblocks, 0.0), sums2(nblocks, 0.0);
    vpsim::parallel_for_blocks(samples, block, [&](std::size_t b, std::size_t begin,
                                                   std::size_t end) {
        vpsim::Accumulator acc, acc2;
        for (std::size_t i = begin; i < end; ++i) {
            vpsim::RngStream rng(seed, vpsim::RngPurpose::oracle_mc, i);
            const vpsim::Vec3 v{sigma * rng.next_gaussian(), sigma * rng.next_gaussian(),
                                sigma * rng.next_gaussian()};
            const double r = R * std::cbrt(rng.next_double());
            const double z = 1.0 - 2.0 * rng.next_double();
            const double phi = 6.283185307179586 * rng.next_double();
            const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            const vpsim::Vec3 x{r * s * std::cos(phi), r * s * std::sin(phi), r * z};
            const double h =
                vpsim::norm(v) <= t.n_cut ? std::pow(1.0 + vpsim::norm(x), -p.alpha) : 0.0;
            acc.add(h);
            acc2.add(h * h);
        }
        sums[b] = acc.value();
        sums2[b] = acc2.value();
    });
    vpsim::Accumulator total, total2;
    for (double s : sums) total.add(s);
    for (double s : sums2) total2.add(s);
    const double mean = total.value() / static_cast<double>(samples);
    const double var =
        std::max(0.0, total2.value() / static_cast<double>(samples) - mean * mean);
    const double volume = 4.0 / 3.0 * 3.14159265358979323846 * R * R * R;
    const double gauss = std::pow(3.14159265358979323846 / p.lambda, 1.5);
    const double mc = p.c1 * gauss * volume * mean;
    const double mc_sigma =
        p.c1 * gauss * volume * std::sqrt(var / static_cast<double>(samples));
    const double rel = std::abs(mc - quad) / quad;

    OracleOutcome out;
    out.name = "truncated mass quadrature vs 6-dim Monte Carlo";
    out.pass = rel < 5e-4;
    out.detail = "quad " + vpsim::format_double(quad) + ", mc " + vpsim::format_double(mc) +
                 " (sigma " + vpsim::format_double(mc_sigma) + "), rel " +
                 vpsim::format_double(rel);
    return out;
}

OracleOutcome oracle_two_body() {
    // Circular two-body orbit: unit masses, unit separation, G = 1.
    const double d = 1.0;
    const double vc = std::sqrt(0.5 / d);
    const double period = 2.0 * 3.14159265358979323846 * std::sqrt(d * d * d / 2.0);
    const auto make = [&] {
        vpsim::Ensemble ens;
        ens.push_back({-0.5 * d, 0, 0}, {0, -vc, 0}, 1.0, 0);
        ens.push_back({0.5 * d, 0, 0}, {0, vc, 0}, 1.0, 1);
        return ens;
    };
    vpsim::FieldOptions fopts;
    fopts.softening = {0.0};
    vpsim::RecorderConfig rec;
    rec.record_interval = period;
    rec.store_snapshots = false;
    rec.energy_series = false;

    std::vector<double> dts, errs;
    for (int k = 7; k <= 10; ++k) {
        const double dt = period / std::pow(2.0, k);
        const auto traj = vpsim::integrate(make(), period, dt, fopts, rec);
        const vpsim::Ensemble& f = traj.final_state;
        const vpsim::Ensemble ref = make();
        double err = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            err += vpsim::norm(f.pos[i] - ref.pos[i]) + vpsim::norm(f.vel[i] - ref.vel[i]);
        dts.push_back(dt);
        errs.push_back(err);
    }
    const vpsim::PowerLawFit fit = vpsim::fit_power_law(dts, errs);
    OracleOutcome out;
    out.name = "two-body orbit dt-halving convergence";
    out.pass = fit.slope > 1.8 && fit.slope < 2.2;
    out.detail = "global error slope " + vpsim::format_double(fit.slope);
    return out;
}

int cmd_oracle(const CommonFlags& flags, std::size_t mc_samples) {
    std::vector<OracleOutcome> outcomes;
    outcomes.push_back(oracle_direct_sum(20177));
    outcomes.push_back(oracle_mass_mc(20177, mc_samples));
    outcomes.push_back(oracle_two_body());

    bool all = true;
    json j;
    j["version"] = vpsim::kVersion;
    json checks = json::array();
    for (const auto& o : outcomes) {
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << o.name << ": " << o.detail << "\n";
        checks.push_back({{"name", o.name}, {"pass", o.pass}, {"detail", o.detail}});
        all = all && o.pass;
    }
    j["checks"] = checks;
    if (!flags.out_override.empty()) {
        fs::create_directories(flags.out_override);
        vpsim::write_file(flags.out_override + "/oracle.json", j.dump(2) + "\n");
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"truncated Vlasov-Poisson particle simulator and verification harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("vpsim ") + vpsim::kVersion);

    CommonFlags sample_flags, run_flags, study_flags, check_flags, oracle_flags;
    std::string run_snapshot, check_snapshot;
    std::size_t mc_samples = 20000000;

    CLI::App* sample_cmd = app.add_subcommand("sample", "draw an ensemble and write a snapshot");
    add_common(sample_cmd, sample_flags, true);

    CLI::App* run_cmd = app.add_subcommand("run", "integrate one truncated dynamics + diagnostics");
    add_common(run_cmd, run_flags, true);
    run_cmd->add_option("--snapshot", run_snapshot, "input snapshot instead of sampling");

    CLI::App* study_cmd = app.add_subcommand("study", "run a cutoff family and fit exponents");
    add_common(study_cmd, study_flags, true);

    CLI::App* check_cmd = app.add_subcommand("check", "re-run diagnostics on a snapshot");
    add_common(check_cmd, check_flags, false);
    check_cmd->add_option("--snapshot", check_snapshot, "snapshot to diagnose")->required();

    CLI::App* oracle_cmd = app.add_subcommand("oracle", "run the brute-force oracle suite");
    oracle_cmd->add_option("--out", oracle_flags.out_override, "optional report directory");
    oracle_cmd->add_option("--mc-samples", mc_samples, "Monte Carlo sample count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sample_cmd) return cmd_sample(sample_flags);
        if (*run_cmd) return cmd_run(run_flags, run_snapshot);
        if (*study_cmd) return cmd_study(study_flags);
        if (*check_cmd) return cmd_check(check_flags, check_snapshot);
        if (*oracle_cmd) return cmd_oracle(oracle_flags, mc_samples);
    } catch (const vpsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vpsim::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
