#pragma once

// Binary ensemble snapshots and plain-text diagnostics outputs.
//
// Snapshot layout (little-endian):
//   magic "VPEN" | version u32 | particle count u64
//   params: 8 x f64 = { c1, lambda, alpha, n, beta, eps, total mass, reserved }
//   records: count x 7 f64 = { x1 x2 x3 v1 v2 v3 w }
// A JSON sidecar <path>.json carries params, seed and mass for humans and for
// metadata (the seed has no slot in the fixed binary header).

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vpsim/diagnostics.hpp"
#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/integrator.hpp"

namespace vpsim {

// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw ConfigError("snapshot: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace detail

struct SnapshotMeta {
    double eps = 0.0;
    double mass = 0.0;
    std::uint64_t seed = 0;
};

inline std::string encode_snapshot(const Ensemble& ens, double eps) {
    std::string out;
    out.reserve(4 + 4 + 8 + 8 * 8 + ens.size() * 7 * 8);
    out += "VPEN";
    detail::put_u32(out, 1u);
    detail::put_u64(out, ens.size());
    detail::put_f64(out, ens.fparams.c1);
    detail::put_f64(out, ens.fparams.lambda);
    detail::put_f64(out, ens.fparams.alpha);
    detail::put_f64(out, ens.tparams.n_cut);
    detail::put_f64(out, ens.tparams.beta);
    detail::put_f64(out, eps);
    detail::put_f64(out, total_mass(ens));
    detail::put_f64(out, 0.0);
    for (std::size_t i = 0; i < ens.size(); ++i) {
        detail::put_f64(out, ens.pos[i].x);
        detail::put_f64(out, ens.pos[i].y);
        detail::put_f64(out, ens.pos[i].z);
        detail::put_f64(out, ens.vel[i].x);
        detail::put_f64(out, ens.vel[i].y);
        detail::put_f64(out, ens.vel[i].z);
        detail::put_f64(out, ens.weight[i]);
    }
    return out;
}

inline Ensemble decode_snapshot(const std::string& data, SnapshotMeta* meta = nullptr) {
    if (data.size() < 8 || data.compare(0, 4, "VPEN") != 0)
        throw ConfigError("snapshot: bad magic (not a VPEN file)");
    detail::Reader rd{data, 4};
    const std::uint32_t version = rd.u32();
    if (version != 1) throw ConfigError("snapshot: unsupported version " + std::to_string(version));
    const std::uint64_t count = rd.u64();
    Ensemble ens;
    ens.fparams.c1 = rd.f64();
    ens.fparams.lambda = rd.f64();
    ens.fparams.alpha = rd.f64();
    ens.tparams.n_cut = rd.f64();
    ens.tparams.beta = rd.f64();
    const double eps = rd.f64();
    const double mass = rd.f64();
    rd.f64();  // reserved
    ens.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Vec3 x{rd.f64(), rd.f64(), rd.f64()};
        Vec3 v{rd.f64(), rd.f64(), rd.f64()};
        const double w = rd.f64();
        ens.push_back(x, v, w, i);
    }
    if (meta) {
        meta->eps = eps;
        meta->mass = mass;
    }
    return ens;
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) throw ConfigError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open: " + path);
    std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return data;
}

inline void write_snapshot(const std::string& path, const Ensemble& ens, double eps) {
    write_file(path, encode_snapshot(ens, eps));
    nlohmann::json j;
    j["c1"] = ens.fparams.c1;
    j["lambda"] = ens.fparams.lambda;
    j["alpha"] = ens.fparams.alpha;
    j["n"] = ens.tparams.n_cut;
    j["beta"] = ens.tparams.beta;
    j["eps"] = eps;
    j["seed"] = ens.seed;
    j["mass"] = total_mass(ens);
    j["count"] = ens.size();
    write_file(path + ".json", j.dump(2) + "\n");
}

inline Ensemble read_snapshot(const std::string& path, SnapshotMeta* meta = nullptr) {
    SnapshotMeta local;
    Ensemble ens = decode_snapshot(read_file(path), &local);
    std::ifstream sidecar(path + ".json");
    if (sidecar) {
        try {
            nlohmann::json j;
            sidecar >> j;
            if (j.contains("seed")) ens.seed = j["seed"].get<std::uint64_t>();
        } catch (...) {
            // sidecar is advisory; a malformed one never blocks a load
        }
    }
    local.mass = total_mass(ens);
    if (meta) *meta = local;
    return ens;
}

// Energy/diagnostics series CSV: one row per recorded time.
inline void write_energy_csv(const std::string& path, const TrajectoryRecord& traj) {
    std::string out = "t,kinetic,potential,total,max_speed,max_field\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const std::size_t s = i < traj.record_step_index.size() ? traj.record_step_index[i] : 0;
        out += format_double(traj.times[i]);
        out += ',';
        out += format_double(traj.kinetic[i]);
        out += ',';
        out += format_double(traj.potential[i]);
        out += ',';
        out += format_double(traj.total[i]);
        out += ',';
        out += format_double(s < traj.step_max_speed.size() ? traj.step_max_speed[s] : 0.0);
        out += ',';
        out += format_double(s < traj.step_max_field.size() ? traj.step_max_field[s] : 0.0);
        out += '\n';
    }
    write_file(path, out);
}

inline void write_interpolation_csv(const std::string& path, const InterpolationReport& rep) {
    std::string out = "cx,cy,cz,rho,k,margin,interior\n";
    for (const auto& c : rep.cells) {
        out += format_double(c.center.x);
        out += ',';
        out += format_double(c.center.y);
        out += ',';
        out += format_double(c.center.z);
        out += ',';
        out += format_double(c.rho);
        out += ',';
        out += format_double(c.k);
        out += ',';
        out += format_double(c.margin);
        out += ',';
        out += c.interior ? '1' : '0';
        out += '\n';
    }
    write_file(path, out);
}

inline nlohmann::json decay_fit_json(const DecayFit& fit) {
    nlohmann::json j;
    j["mu"] = fit.mu;
    j["c2"] = fit.c2;
    j["alpha_fit"] = fit.alpha_fit;
    j["mu_residual_rms"] = fit.mu_residual_rms;
    j["alpha_residual_rms"] = fit.alpha_residual_rms;
    j["velocity_bins"] = fit.velocity_bins_used;
    j["spatial_cells"] = fit.spatial_cells_used;
    j["verdict"] = fit.pass ? "pass" : "fail";
    return j;
}

}  // namespace vpsim
