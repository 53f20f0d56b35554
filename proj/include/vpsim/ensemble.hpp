#pragma once

#include <cstdint>
#include <vector>

#include "vpsim/initial_data.hpp"
#include "vpsim/numerics.hpp"
#include "vpsim/vec3.hpp"

namespace vpsim {

// Weighted particle set representing the truncated datum as an empirical
// measure.  Weights are carried unchanged by the flow; `id` keeps the master
// sample index so nested-cutoff runs can be compared particle by particle.
struct Ensemble {
    std::vector<Vec3> pos;
    std::vector<Vec3> vel;
    std::vector<double> weight;
    std::vector<std::uint64_t> id;

    InitialDataParams fparams;
    TruncationParams tparams;
    std::uint64_t seed = 0;

    std::size_t size() const { return pos.size(); }
    bool empty() const { return pos.empty(); }

    void reserve(std::size_t n) {
        pos.reserve(n);
        vel.reserve(n);
        weight.reserve(n);
        id.reserve(n);
    }

    void push_back(const Vec3& x, const Vec3& v, double w, std::uint64_t pid) {
        pos.push_back(x);
        vel.push_back(v);
        weight.push_back(w);
        id.push_back(pid);
    }
};

// Compensated sum of the weights (total mass of the empirical measure).
inline double total_mass(const Ensemble& ens) {
    Accumulator acc;
    for (double w : ens.weight) acc.add(w);
    return acc.value();
}

inline double max_weight(const Ensemble& ens) {
    double m = 0.0;
    for (double w : ens.weight) m = std::max(m, w);
    return m;
}

inline double max_speed(const Ensemble& ens) {
    double m = 0.0;
    for (const auto& v : ens.vel) m = std::max(m, norm(v));
    return m;
}

// Kinetic energy (1/2) sum w_i |v_i|^2 in fixed particle order.
inline double kinetic_energy(const Ensemble& ens) {
    Accumulator acc;
    for (std::size_t i = 0; i < ens.size(); ++i) acc.add(0.5 * ens.weight[i] * norm2(ens.vel[i]));
    return acc.value();
}

// Total momentum, compensated per component in particle order.
inline Vec3 total_momentum(const Ensemble& ens) {
    Accumulator ax, ay, az;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        ax.add(ens.weight[i] * ens.vel[i].x);
        ay.add(ens.weight[i] * ens.vel[i].y);
        az.add(ens.weight[i] * ens.vel[i].z);
    }
    return {ax.value(), ay.value(), az.value()};
}

}  // namespace vpsim
