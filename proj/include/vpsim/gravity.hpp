#pragma once

// Self-consistent gravitational field of a weighted ensemble: attractive
// kernel -(x-y)/|x-y|^3 with Plummer softening.  Direct sums run in fixed
// particle order with compensated accumulation, so results are bit-identical
// for any worker count; the octree path is a monopole Barnes-Hut
// acceleration of the same kernel.

#include <cstddef>
#include <string>
#include <vector>

#include "vpsim/ensemble.hpp"
#include "vpsim/errors.hpp"
#include "vpsim/numerics.hpp"
#include "vpsim/parallel.hpp"
#include "vpsim/vec3.hpp"

namespace vpsim {

struct SofteningParams {
    double eps = 0.0; // Plummer length; 0 only for analytic-oracle configurations

    void validate() const {
        if (!(eps >= 0.0)) throw ConfigError("softening eps must be >= 0");
    }
};

// Default softening: a small fraction of the mean interparticle spacing.
inline SofteningParams default_softening(const TruncationParams& t, std::size_t particles) {
    return {0.02 * mean_spacing(t, particles)};
}

inline std::vector<Vec3> field_direct(const Ensemble& ens, const std::vector<Vec3>& queries,
                                      const SofteningParams& s) {
    s.validate();
    const double eps2 = s.eps * s.eps;
    std::vector<Vec3> out(queries.size());
    parallel_for_blocks(queries.size(), 64, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            Accumulator gx, gy, gz;
            for (std::size_t i = 0; i < ens.size(); ++i) {
                const Vec3 d = queries[q] - ens.pos[i];
                const double r2 = norm2(d) + eps2;
                const double f = -ens.weight[i] / (r2 * std::sqrt(r2));
                gx.add(f * d.x);
                gy.add(f * d.y);
                gz.add(f * d.z);
            }
            out[q] = {gx.value(), gy.value(), gz.value()};
            if (!is_finite(out[q]))
                throw NumericalError("field_direct: non-finite field at query " +
                                     std::to_string(q) + " (source collision at eps = 0?)");
        }
    });
    return out;
}

// Monopole octree over the ensemble positions.  Children are filled in a
// fixed octant order and leaves keep ascending particle indices, so a
// traversal is deterministic regardless of thread count.  A cell is accepted
// as a monopole when the query is farther than side/theta plus the offset of
// the center of mass from the cell center.
class Octree {
  public:
    explicit Octree(const Ensemble& ens, std::size_t leaf_size = 8) : ens_(ens) {
        if (ens.empty()) throw ConfigError("Octree: empty ensemble");
        Vec3 lo = ens.pos[0], hi = ens.pos[0];
        for (const auto& p : ens.pos) {
            lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
        }
        const Vec3 c = 0.5 * (lo + hi);
        double half = 0.5 * std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
        half = half > 0.0 ? half * (1.0 + 1e-12) : 1.0;
        perm_.resize(ens.size());
        scratch_.resize(ens.size());
        for (std::size_t i = 0; i < ens.size(); ++i) perm_[i] = i;
        build(0, ens.size(), c, half, leaf_size, 0);
    }

    // Field at one query point with opening angle theta.  skip_index excludes
    // one source (the query particle in self-consistent evaluations, where the
    // term is exactly zero for eps > 0 and 0/0 at eps = 0).
    Vec3 field_at(const Vec3& q, double eps2, double theta,
                  std::size_t skip_index = static_cast<std::size_t>(-1)) const {
        Accumulator gx, gy, gz;
        int stack[kMaxStack];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const int ni = stack[--top];
            const Node& n = nodes_[ni];
            const Vec3 d = q - n.com;
            const double dist2 = norm2(d);
            const double open = 2.0 * n.half / theta + n.com_offset;
            if (n.leaf || open * open < dist2) {
                if (n.leaf) {
                    for (std::size_t k = n.begin; k < n.end; ++k) {
                        const std::size_t i = perm_[k];
                        if (i == skip_index) continue;
                        const Vec3 dp = q - ens_.pos[i];
                        const double r2 = norm2(dp) + eps2;
                        const double f = -ens_.weight[i] / (r2 * std::sqrt(r2));
                        gx.add(f * dp.x);
                        gy.add(f * dp.y);
                        gz.add(f * dp.z);
                    }
                } else {
                    const double r2 = dist2 + eps2;
                    const double f = -n.mass / (r2 * std::sqrt(r2));
                    gx.add(f * d.x);
                    gy.add(f * d.y);
                    gz.add(f * d.z);
                }
            } else {
                for (int c = 7; c >= 0; --c)
                    if (n.child[c] >= 0) stack[top++] = n.child[c];
            }
        }
        return {gx.value(), gy.value(), gz.value()};
    }

    // Softened potential at a source position, excluding particle skip_index.
    double potential_at(const Vec3& q, double eps2, double theta, std::size_t skip_index) const {
        Accumulator acc;
        int stack[kMaxStack];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const int ni = stack[--top];
            const Node& n = nodes_[ni];
            const Vec3 d = q - n.com;
            const double dist2 = norm2(d);
            const double open = 2.0 * n.half / theta + n.com_offset;
            if (n.leaf || open * open < dist2) {
                if (n.leaf) {
                    for (std::size_t k = n.begin; k < n.end; ++k) {
                        const std::size_t i = perm_[k];
                        if (i == skip_index) continue;
                        const Vec3 dp = q - ens_.pos[i];
                        acc.add(-ens_.weight[i] / std::sqrt(norm2(dp) + eps2));
                    }
                } else {
                    acc.add(-n.mass / std::sqrt(dist2 + eps2));
                }
            } else {
                for (int c = 7; c >= 0; --c)
                    if (n.child[c] >= 0) stack[top++] = n.child[c];
            }
        }
        return acc.value();
    }

  private:
    static constexpr int kMaxDepth = 48;
    static constexpr int kMaxStack = 8 * kMaxDepth + 8;

    struct Node {
        Vec3 center;
        double half = 0.0;
        Vec3 com;
        double com_offset = 0.0;  // |com - cell center|
        double mass = 0.0;
        int child[8] = {-1, -1, -1, -1, -1, -1, -1, -1};
        std::size_t begin = 0, end = 0;
        bool leaf = true;
    };

    int build(std::size_t begin, std::size_t end, const Vec3& center, double half,
              std::size_t leaf_size, int depth) {
        const int ni = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        Node n;
        n.center = center;
        n.half = half;
        n.begin = begin;
        n.end = end;

        // The depth cap turns clusters of (near-)coincident points into leaves.
        if (end - begin <= leaf_size || depth >= kMaxDepth) {
            n.leaf = true;
            Accumulator mx, my, mz, m;
            for (std::size_t k = begin; k < end; ++k) {
                const std::size_t i = perm_[k];
                m.add(ens_.weight[i]);
                mx.add(ens_.weight[i] * ens_.pos[i].x);
                my.add(ens_.weight[i] * ens_.pos[i].y);
                mz.add(ens_.weight[i] * ens_.pos[i].z);
            }
            n.mass = m.value();
            n.com = n.mass > 0.0 ? Vec3{mx.value() / n.mass, my.value() / n.mass, mz.value() / n.mass}
                                 : center;
            n.com_offset = norm(n.com - center);
            nodes_[ni] = n;
            return ni;
        }

        n.leaf = false;
        // Stable counting split into octants: ascending order survives.
        const auto octant_of = [&](std::size_t i) {
            return (ens_.pos[i].x >= center.x ? 1 : 0) | (ens_.pos[i].y >= center.y ? 2 : 0) |
                   (ens_.pos[i].z >= center.z ? 4 : 0);
        };
        std::size_t counts[8] = {};
        for (std::size_t k = begin; k < end; ++k) ++counts[octant_of(perm_[k])];
        std::size_t offsets[8];
        std::size_t cursor = begin;
        for (int oct = 0; oct < 8; ++oct) {
            offsets[oct] = cursor;
            cursor += counts[oct];
        }
        std::size_t fill[8];
        for (int oct = 0; oct < 8; ++oct) fill[oct] = offsets[oct];
        for (std::size_t k = begin; k < end; ++k) scratch_[fill[octant_of(perm_[k])]++] = perm_[k];
        for (std::size_t k = begin; k < end; ++k) perm_[k] = scratch_[k];

        const double h = 0.5 * half;
        double mass = 0.0;
        Vec3 weighted{0, 0, 0};
        for (int oct = 0; oct < 8; ++oct) {
            if (counts[oct] == 0) continue;
            const Vec3 cc{center.x + (oct & 1 ? h : -h), center.y + (oct & 2 ? h : -h),
                          center.z + (oct & 4 ? h : -h)};
            const int ci =
                build(offsets[oct], offsets[oct] + counts[oct], cc, h, leaf_size, depth + 1);
            n.child[oct] = ci;
            mass += nodes_[ci].mass;
            weighted += nodes_[ci].mass * nodes_[ci].com;
        }
        n.mass = mass;
        n.com = mass > 0.0 ? (1.0 / mass) * weighted : center;
        n.com_offset = norm(n.com - center);
        nodes_[ni] = n;
        return ni;
    }

    const Ensemble& ens_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> scratch_;
};

// Barnes-Hut field evaluation; theta <= 0 degenerates to the exact direct sum.
inline std::vector<Vec3> field_tree(const Ensemble& ens, const std::vector<Vec3>& queries,
                                    const SofteningParams& s, double theta) {
    s.validate();
    if (theta < 0.0) throw ConfigError("field_tree: theta must be >= 0");
    if (theta == 0.0) return field_direct(ens, queries, s);
    const Octree tree(ens);
    const double eps2 = s.eps * s.eps;
    std::vector<Vec3> out(queries.size());
    parallel_for_blocks(queries.size(), 64, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            out[q] = tree.field_at(queries[q], eps2, theta);
            if (!is_finite(out[q]))
                throw NumericalError("field_tree: non-finite field at query " +
                                     std::to_string(q) + " (source collision at eps = 0?)");
        }
    });
    return out;
}

// Pairwise softened potential energy, self-interaction excluded.  Fixed
// triangular row blocks with per-block compensated partials reduced in block
// order keep the result identical for any worker count.
inline double potential_energy(const Ensemble& ens, const SofteningParams& s) {
    s.validate();
    if (ens.empty()) throw ConfigError("potential_energy: empty ensemble");
    const double eps2 = s.eps * s.eps;
    const std::size_t n = ens.size();
    constexpr std::size_t kRowBlock = 128;
    const std::size_t nblocks = (n + kRowBlock - 1) / kRowBlock;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for_blocks(n, kRowBlock, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Accumulator acc;
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const Vec3 d = ens.pos[i] - ens.pos[j];
                acc.add(-ens.weight[i] * ens.weight[j] / std::sqrt(norm2(d) + eps2));
            }
        }
        partial[b] = acc.value();
    });
    Accumulator total;
    for (double p : partial) total.add(p);
    const double u = total.value();
    if (!std::isfinite(u))
        throw NumericalError("potential_energy: non-finite (coincident pair at eps = 0?)");
    return u;
}

// Tree-accelerated potential energy for large ensembles (diagnostic use).
inline double potential_energy_tree(const Ensemble& ens, const SofteningParams& s, double theta) {
    s.validate();
    if (ens.empty()) throw ConfigError("potential_energy: empty ensemble");
    if (theta <= 0.0) return potential_energy(ens, s);
    const Octree tree(ens);
    const double eps2 = s.eps * s.eps;
    const std::size_t n = ens.size();
    constexpr std::size_t kBlock = 256;
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for_blocks(n, kBlock, [&](std::size_t b, std::size_t begin, std::size_t end) {
        Accumulator acc;
        for (std::size_t i = begin; i < end; ++i)
            acc.add(0.5 * ens.weight[i] * tree.potential_at(ens.pos[i], eps2, theta, i));
        partial[b] = acc.value();
    });
    Accumulator total;
    for (double p : partial) total.add(p);
    return total.value();
}

struct FieldOptions {
    SofteningParams softening;
    double theta = 0.4;               // opening angle for the tree path
    std::size_t direct_limit = 4096;  // direct sum at or below this size

    bool use_tree(std::size_t particles) const { return particles > direct_limit && theta > 0.0; }
};

// Self-consistent accelerations at the particle positions.  Each particle's
// own term is excluded: it is exactly zero for eps > 0 (so this matches
// field_direct on the same points bit for bit) and undefined at eps = 0.
inline std::vector<Vec3> accelerations(const Ensemble& ens, const FieldOptions& opts) {
    const SofteningParams& s = opts.softening;
    s.validate();
    const double eps2 = s.eps * s.eps;
    std::vector<Vec3> out(ens.size());
    if (opts.use_tree(ens.size())) {
        const Octree tree(ens);
        parallel_for_blocks(ens.size(), 64, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t q = begin; q < end; ++q) {
                out[q] = tree.field_at(ens.pos[q], eps2, opts.theta, q);
                if (!is_finite(out[q]))
                    throw NumericalError("accelerations: non-finite field at particle " +
                                         std::to_string(q));
            }
        });
        return out;
    }
    parallel_for_blocks(ens.size(), 64, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            Accumulator gx, gy, gz;
            for (std::size_t i = 0; i < ens.size(); ++i) {
                if (i == q) continue;
                const Vec3 d = ens.pos[q] - ens.pos[i];
                const double r2 = norm2(d) + eps2;
                const double f = -ens.weight[i] / (r2 * std::sqrt(r2));
                gx.add(f * d.x);
                gy.add(f * d.y);
                gz.add(f * d.z);
            }
            out[q] = {gx.value(), gy.value(), gz.value()};
            if (!is_finite(out[q]))
                throw NumericalError("accelerations: non-finite field at particle " +
                                     std::to_string(q) + " (collision at eps = 0?)");
        }
    });
    return out;
}

}  // namespace vpsim
