#pragma once

// Line-oriented "key = value" run configuration with # comments.  Unknown
// keys are rejected; every physical invariant of the wrapped parameter types
// is re-checked at load; the echo emitted into output directories reparses to
// the identical effective configuration.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vpsim/errors.hpp"
#include "vpsim/initial_data.hpp"
#include "vpsim/snapshot.hpp"
#include "vpsim/study.hpp"

namespace vpsim {

struct RunConfig {
    // initial datum
    double c1 = 0.02;
    double lambda = 1.0;
    double alpha = 2.0;
    // truncation
    double n = 16.0;
    double beta = 0.3;
    // numerics
    std::uint64_t particles = 4096;
    std::uint64_t seed = 20177;
    double eps = -1.0;  // < 0 encodes "auto"
    double dt = -1.0;   // < 0 encodes "auto"
    double horizon = 2.0;
    double record_interval = 0.2;
    double theta = 0.4;
    std::uint64_t direct_limit = 4096;
    bool energy_every_step = true;
    // diagnostics
    double c3 = 1.0;
    std::uint64_t grid_cells = 12;
    double decay_band = 0.3;
    // study
    std::vector<double> n_list = {8, 16, 32, 64};
    std::uint64_t particle_cap = 100000;
    bool assert_bounds = true;
    double velocity_margin = 1.0;
    // run control
    std::string out = "vpsim_out";
    std::uint64_t threads = 0;

    InitialDataParams initial_params() const { return {c1, lambda, alpha}; }
    TruncationParams truncation_params() const { return {n, beta}; }

    double resolved_eps(std::size_t p) const {
        return eps >= 0.0 ? eps : default_softening(truncation_params(), p).eps;
    }
    double resolved_dt(std::size_t p) const {
        if (dt > 0.0) return dt;
        const double raw = 0.05 * mean_spacing(truncation_params(), p) * std::sqrt(lambda);
        const double k = std::max(1.0, std::ceil(record_interval / raw));
        return record_interval / k;
    }

    StudySpec study_spec() const {
        StudySpec s;
        s.params = initial_params();
        s.beta = beta;
        s.n_list = n_list;
        s.horizon = horizon;
        s.dt = dt;
        s.softening = eps;
        s.record_interval = record_interval;
        s.particle_cap = particle_cap;
        s.seed = seed;
        s.theta = theta;
        s.direct_limit = direct_limit;
        s.c3 = c3;
        s.assert_bounds = assert_bounds;
        s.grid_cells = static_cast<int>(grid_cells);
        s.decay.alpha_band = decay_band;
        return s;
    }

    void validate() const {
        initial_params().validate();
        truncation_params().validate();
        if (particles == 0) throw ConfigError("particles must be >= 1");
        if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
        if (!(record_interval > 0.0)) throw ConfigError("record_interval must be > 0");
        if (!(theta >= 0.0)) throw ConfigError("theta must be >= 0");
        if (!(c3 > 0.0)) throw ConfigError("c3 must be > 0");
        if (grid_cells < 2) throw ConfigError("grid_cells must be >= 2");
        if (!(decay_band > 0.0)) throw ConfigError("decay_band must be > 0");
        if (!(velocity_margin >= 0.0)) throw ConfigError("velocity_margin must be >= 0");
        if (n_list.size() < 3) throw ConfigError("n_list needs at least 3 cutoffs");
        for (std::size_t i = 0; i + 1 < n_list.size(); ++i)
            if (!(n_list[i] < n_list[i + 1]))
                throw ConfigError("n_list must be strictly increasing");
        if (!(n_list.front() > 0.0)) throw ConfigError("n_list entries must be positive");
        if (particle_cap == 0) throw ConfigError("particle_cap must be >= 1");
        // Admissibility gate for exponent-bound studies: the truncation
        // exponent must leave room under the kinetic-energy growth ceiling.
        if (assert_bounds && alpha < 3.0 && !(beta < beta_admissible_limit(alpha)))
            throw ConfigError(
                "bound-assertion mode requires beta < 2/(5(3-alpha)) = " +
                std::to_string(beta_admissible_limit(alpha)) +
                " (kinetic-energy cutoff growth must stay below the admissible ceiling); got "
                "beta = " +
                std::to_string(beta));
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: bad numeric value for '" + key + "': " + v);
    return d;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("config: bad integer value for '" + key + "': " + v);
    return static_cast<std::uint64_t>(u);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean value for '" + key + "': " + v);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");

        if (key == "c1") cfg.c1 = detail::parse_double(key, value);
        else if (key == "lambda") cfg.lambda = detail::parse_double(key, value);
        else if (key == "alpha") cfg.alpha = detail::parse_double(key, value);
        else if (key == "n") cfg.n = detail::parse_double(key, value);
        else if (key == "beta") cfg.beta = detail::parse_double(key, value);
        else if (key == "particles") cfg.particles = detail::parse_u64(key, value);
        else if (key == "seed") cfg.seed = detail::parse_u64(key, value);
        else if (key == "eps") {
            cfg.eps = value == "auto" ? -1.0 : detail::parse_double(key, value);
            if (value != "auto" && !(cfg.eps >= 0.0))
                throw ConfigError("eps must be >= 0 or auto");
        } else if (key == "dt") {
            cfg.dt = value == "auto" ? -1.0 : detail::parse_double(key, value);
            if (value != "auto" && !(cfg.dt > 0.0))
                throw ConfigError("dt must be > 0 or auto");
        }
        else if (key == "horizon") cfg.horizon = detail::parse_double(key, value);
        else if (key == "record_interval") cfg.record_interval = detail::parse_double(key, value);
        else if (key == "theta") cfg.theta = detail::parse_double(key, value);
        else if (key == "direct_limit") cfg.direct_limit = detail::parse_u64(key, value);
        else if (key == "energy_every_step") cfg.energy_every_step = detail::parse_bool(key, value);
        else if (key == "c3") cfg.c3 = detail::parse_double(key, value);
        else if (key == "grid_cells") cfg.grid_cells = detail::parse_u64(key, value);
        else if (key == "decay_band") cfg.decay_band = detail::parse_double(key, value);
        else if (key == "n_list") cfg.n_list = detail::parse_list(key, value);
        else if (key == "particle_cap") cfg.particle_cap = detail::parse_u64(key, value);
        else if (key == "assert_bounds") cfg.assert_bounds = detail::parse_bool(key, value);
        else if (key == "velocity_margin") cfg.velocity_margin = detail::parse_double(key, value);
        else if (key == "out") cfg.out = value;
        else if (key == "threads") cfg.threads = detail::parse_u64(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    if (const char* env_out = std::getenv("VPSIM_OUT"); env_out && *env_out) cfg.out = env_out;
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

// Canonical echo of the effective (post-default) configuration; reparses to
// the identical RunConfig.
inline std::string config_echo(const RunConfig& cfg) {
    std::string out;
    const auto kv = [&out](const std::string& k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    const auto num = [&kv](const std::string& k, double v) { kv(k, format_double(v)); };
    const auto u64 = [&kv](const std::string& k, std::uint64_t v) { kv(k, std::to_string(v)); };
    const auto boolean = [&kv](const std::string& k, bool v) { kv(k, v ? "true" : "false"); };

    num("c1", cfg.c1);
    num("lambda", cfg.lambda);
    num("alpha", cfg.alpha);
    num("n", cfg.n);
    num("beta", cfg.beta);
    u64("particles", cfg.particles);
    u64("seed", cfg.seed);
    kv("eps", cfg.eps >= 0.0 ? format_double(cfg.eps) : "auto");
    kv("dt", cfg.dt > 0.0 ? format_double(cfg.dt) : "auto");
    num("horizon", cfg.horizon);
    num("record_interval", cfg.record_interval);
    num("theta", cfg.theta);
    u64("direct_limit", cfg.direct_limit);
    boolean("energy_every_step", cfg.energy_every_step);
    num("c3", cfg.c3);
    u64("grid_cells", cfg.grid_cells);
    num("decay_band", cfg.decay_band);
    std::string list;
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
        if (i) list += ",";
        list += format_double(cfg.n_list[i]);
    }
    kv("n_list", list);
    u64("particle_cap", cfg.particle_cap);
    boolean("assert_bounds", cfg.assert_bounds);
    num("velocity_margin", cfg.velocity_margin);
    kv("out", cfg.out);
    u64("threads", cfg.threads);
    return out;
}

}  // namespace vpsim
