// SPDX-License-Identifier: Apache-2.0
//
// qdchan: quasi-deterministic mmWave channel generator
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef QDCHAN_QD_CORE_HPP
#define QDCHAN_QD_CORE_HPP

#include "qdchan/distributions.hpp"
#include "qdchan/error.hpp"
#include "qdchan/geometry.hpp"
#include "qdchan/materials.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qdchan {

enum class MpcKind { direct, cursor, pre, post };
enum class ModelVariant { drays_only, reduced, complete };
enum class PruneReference { realized, deterministic };

inline const char *to_string(MpcKind k)
{
    switch (k) {
    case MpcKind::direct: return "direct";
    case MpcKind::cursor: return "cursor";
    case MpcKind::pre: return "pre";
    case MpcKind::post: return "post";
    }
    return "?";
}

inline const char *to_string(ModelVariant v)
{
    switch (v) {
    case ModelVariant::drays_only: return "drays_only";
    case ModelVariant::reduced: return "reduced";
    case ModelVariant::complete: return "complete";
    }
    return "?";
}

inline const char *to_string(PruneReference p) { return p == PruneReference::realized ? "realized" : "deterministic"; }

/// One multipath component. tau in ns relative to the direct-ray arrival.
struct Mpc {
    MpcKind kind = MpcKind::cursor;
    double tau_ns = 0.0;
    double pg_db = 0.0;
    double aod_az = 0.0, aod_el = 0.0, aoa_az = 0.0, aoa_el = 0.0;
    double phase_rad = 0.0;

    friend bool operator==(const Mpc &, const Mpc &) = default;
};

struct Cluster {
    DRay dray;
    Mpc cursor;
    std::vector<Mpc> pre;  // tau strictly decreasing from the cursor
    std::vector<Mpc> post; // tau strictly increasing from the cursor
    double realized_pg0_db = 0.0;
    double comparison_db = 0.0; // every diffuse MPC lies strictly below this

    std::size_t size() const noexcept { return 1 + pre.size() + post.size(); }
};

struct QdConfig {
    int n_pre = 3;
    int n_post = 16;
    double carrier_hz = default_carrier_hz;
    ModelVariant variant = ModelVariant::reduced;
    int max_order = 2;
    PruneReference prune_reference = PruneReference::realized;
    std::size_t max_complete_mpcs = 10000; // per cluster
    bool drop_direct = false;              // emulate a blocked line of sight
};

struct ChannelInstance {
    std::optional<Point3> tx, rx; // unset for ingested D-rays
    double t_dir_ns = 0.0;
    std::optional<Mpc> direct;
    std::vector<Cluster> clusters;
    std::uint64_t seed = 0;
    QdConfig config;

    // The complete-model recursion rule is a heuristic extension
    bool heuristic() const noexcept { return config.variant == ModelVariant::complete; }

    std::size_t mpc_count() const noexcept
    {
        std::size_t n = direct ? 1 : 0;
        for (const auto &c : clusters)
            n += c.size();
        return n;
    }
};

struct CursorGain {
    double pg0_db = 0.0;
    std::vector<double> rl_residuals_db; // RL_i - mu_RL,i, one per bounce
};

/// PG_0 = PG_0,D - sum_i (RL_i - mu_RL,i), RL_i ~ Rician(s_RL,i, sigma_RL,i).
template <UnitSource G>
CursorGain realize_cursor_gain(double pg_det_db, std::span<const MaterialParams> materials, G &rng)
{
    CursorGain out;
    out.pg0_db = pg_det_db;
    for (const auto &m : materials) {
        const double residual = sample_rician(rng, m.rl.s, m.rl.sigma) - m.mu_rl_db;
        out.rl_residuals_db.push_back(residual);
        out.pg0_db -= residual;
    }
    return out;
}

/// Poisson arrivals around tau0: post add, pre subtract cumulative Exp(lambda)
/// gaps; negative pre-cursor delays are dropped.
template <UnitSource G>
std::vector<double> generate_arrivals(double tau0, const MaterialParams &material, CursorSide side, int count, G &rng)
{
    if (!(tau0 >= 0.0))
        throw ParameterError("generate_arrivals: tau0 must be >= 0");
    std::vector<double> taus;
    if (count <= 0 || !material.side_enabled(side))
        return taus;
    const RicianPair lp = material.side(side).lambda;
    const double lambda = sample_rician(rng, lp.s, lp.sigma);
    if (!(lambda > 0.0))
        return taus;

    taus.reserve(static_cast<std::size_t>(count));
    double cum = 0.0;
    double last = tau0;
    for (int i = 0; i < count; ++i) {
        cum += sample_exponential(rng, lambda);
        if (side == CursorSide::post) {
            const double t = tau0 + cum;
            if (t > last)
                taus.push_back(last = t);
        } else {
            const double t = tau0 - cum;
            if (t < 0.0)
                break;
            if (t < last)
                taus.push_back(last = t);
        }
    }
    return taus;
}

/// Diffuse path gain: PG_0 - K - 10 log10(e) |tau - tau0| / gamma + 10 log10(e) S.
inline double diffuse_gain_db(double pg0_db, double k_db, double gamma_ns, double tau_ns, double tau0_ns, double s)
{
    constexpr double ten_log10_e = 10.0 * std::numbers::log10e;
    return pg0_db - k_db - ten_log10_e * std::abs(tau_ns - tau0_ns) / gamma_ns + ten_log10_e * s;
}

struct DiffuseTap {
    double tau_ns = 0.0;
    double pg_db = 0.0;
};

/// Draws K, gamma, sigma_s once for the family and S_i per MPC; taps at or
/// above `comparison_db` are removed. gamma == 0 disables the family.
template <UnitSource G>
std::vector<DiffuseTap> generate_cursor_powers(double pg0_db, double tau0, std::span<const double> taus,
                                               const MaterialParams &material, CursorSide side, double comparison_db,
                                               G &rng)
{
    std::vector<DiffuseTap> out;
    if (taus.empty())
        return out;
    const auto p = material.side(side);
    const double k_db = sample_rician(rng, p.k.s, p.k.sigma);
    const double gamma = sample_rician(rng, p.gamma.s, p.gamma.sigma);
    const double sigma_s = sample_rician(rng, p.sigma_s.s, p.sigma_s.sigma);
    if (!(gamma > 0.0))
        return out;
    out.reserve(taus.size());
    for (double tau : taus) {
        const double s = sample_normal(rng, 0.0, sigma_s);
        const double pg = diffuse_gain_db(pg0_db, k_db, gamma, tau, tau0, s);
        if (pg < comparison_db)
            out.push_back({tau, pg});
    }
    return out;
}

struct AngleSet {
    double aod_az = 0.0, aod_el = 0.0, aoa_az = 0.0, aoa_el = 0.0;
};

/// Laplacian offsets around the base directions; sigma_alpha is drawn once
/// per axis (az, el) and shared by departure and arrival.
template <UnitSource G>
std::vector<AngleSet> generate_cursor_angles(AngleSet base, const MaterialParams &material, std::size_t count, G &rng)
{
    const double spread_az = sample_rician(rng, material.sigma_alpha_az.s, material.sigma_alpha_az.sigma);
    const double spread_el = sample_rician(rng, material.sigma_alpha_el.s, material.sigma_alpha_el.sigma);
    const double var_az = spread_az * spread_az;
    const double var_el = spread_el * spread_el;
    std::vector<AngleSet> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        AngleSet a;
        a.aod_az = wrap_azimuth(base.aod_az + sample_laplacian(rng, 0.0, var_az));
        a.aod_el = fold_elevation(base.aod_el + sample_laplacian(rng, 0.0, var_el));
        a.aoa_az = wrap_azimuth(base.aoa_az + sample_laplacian(rng, 0.0, var_az));
        a.aoa_el = fold_elevation(base.aoa_el + sample_laplacian(rng, 0.0, var_el));
        out.push_back(a);
    }
    return out;
}

template <UnitSource G>
double sample_phase(G &rng)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double phi = sample_uniform(rng, 0.0, two_pi);
    return phi >= two_pi ? 0.0 : phi;
}

namespace detail {

inline AngleSet angles_of(const Mpc &m) { return {m.aod_az, m.aod_el, m.aoa_az, m.aoa_el}; }

// Sub-stream layout under one family stream
enum FamilyStream : std::uint64_t { arrivals = 0, powers = 1, angles = 2, phases = 3, other_rl = 4 };

/// One pre- or post-cursor family around `anchor` (tau and angles), base gain `pg0_db`.
inline std::vector<Mpc> generate_family(const Mpc &anchor, double pg0_db, double comparison_db,
                                        const MaterialParams &material, CursorSide side, int count,
                                        const RngStream &stream)
{
    auto s_arr = stream.child(arrivals);
    auto s_pow = stream.child(powers);
    auto s_ang = stream.child(angles);
    auto s_ph = stream.child(phases);

    const auto taus = generate_arrivals(anchor.tau_ns, material, side, count, s_arr);
    const auto taps = generate_cursor_powers(pg0_db, anchor.tau_ns, taus, material, side, comparison_db, s_pow);
    std::vector<Mpc> out;
    if (taps.empty())
        return out;
    const auto dirs = generate_cursor_angles(angles_of(anchor), material, taps.size(), s_ang);
    out.reserve(taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) {
        Mpc m;
        m.kind = side == CursorSide::pre ? MpcKind::pre : MpcKind::post;
        m.tau_ns = taps[i].tau_ns;
        m.pg_db = taps[i].pg_db;
        m.aod_az = dirs[i].aod_az;
        m.aod_el = dirs[i].aod_el;
        m.aoa_az = dirs[i].aoa_az;
        m.aoa_el = dirs[i].aoa_el;
        m.phase_rad = sample_phase(s_ph);
        out.push_back(m);
    }
    return out;
}

inline std::vector<MaterialParams> resolve_all(const DRay &dray, const MaterialLibrary &library)
{
    std::vector<MaterialParams> out;
    out.reserve(dray.materials.size());
    for (const auto &name : dray.materials)
        out.push_back(resolve(library, name));
    return out;
}

inline Mpc cursor_of(const DRay &dray, double pg_db)
{
    Mpc c;
    c.kind = MpcKind::cursor;
    c.tau_ns = dray.tau_ns;
    c.pg_db = pg_db;
    c.aod_az = dray.aod_az;
    c.aod_el = dray.aod_el;
    c.aoa_az = dray.aoa_az;
    c.aoa_el = dray.aoa_el;
    return c;
}

// Drop diffuse MPCs at/above the cluster comparison gain, reclassify by delay and sort.
inline void finalize_cluster(Cluster &c, std::vector<Mpc> diffuse)
{
    const double tau0 = c.cursor.tau_ns;
    c.pre.clear();
    c.post.clear();
    for (auto &m : diffuse) {
        if (!(m.pg_db < c.comparison_db) || m.tau_ns < 0.0)
            continue;
        if (m.tau_ns < tau0) {
            m.kind = MpcKind::pre;
            c.pre.push_back(m);
        } else if (m.tau_ns > tau0) {
            m.kind = MpcKind::post;
            c.post.push_back(m);
        }
    }
    std::stable_sort(c.pre.begin(), c.pre.end(), [](const Mpc &a, const Mpc &b) { return a.tau_ns > b.tau_ns; });
    std::stable_sort(c.post.begin(), c.post.end(), [](const Mpc &a, const Mpc &b) { return a.tau_ns < b.tau_ns; });
}

inline void require_order(const DRay &dray, bool ok, const char *what)
{
    if (!ok)
        throw ParameterError(what);
    if (dray.materials.size() != static_cast<std::size_t>(dray.order))
        throw ParameterError("D-ray material list length does not match its order");
}

inline RngStream family_stream(const RngStream &cluster, std::size_t bounce, std::size_t component, CursorSide side)
{
    return cluster.child(1 + bounce).child(component).child(side == CursorSide::pre ? 0 : 1);
}

} // namespace detail

// Stream layout per cluster: child(0) cursor RL draws; child(1 + bounce).child(component).child(side) families.

/// Reduced multi-reflection generator: one diffuse family pair per bounce material,
/// each diffuse MPC further attenuated by random residual losses of the other
/// bounce materials. For a single bounce it is the first-order generator.
inline Cluster generate_cluster_reduced(const DRay &dray, const MaterialLibrary &library, const QdConfig &config,
                                        const RngStream &rng)
{
    detail::require_order(dray, dray.order >= 1, "generate_cluster_reduced: order must be >= 1");
    const auto mats = detail::resolve_all(dray, library);
    auto s_rl = rng.child(0);
    const CursorGain cg = realize_cursor_gain(dray.pg_det_db, std::span<const MaterialParams>(mats), s_rl);
    const bool realized = config.prune_reference == PruneReference::realized;

    Cluster c;
    c.dray = dray;
    c.realized_pg0_db = cg.pg0_db;
    c.comparison_db = realized ? cg.pg0_db : dray.pg_det_db;
    c.cursor = detail::cursor_of(dray, cg.pg0_db);

    std::vector<Mpc> diffuse;
    for (std::size_t m = 0; m < mats.size(); ++m) {
        const double base = dray.pg_det_db - cg.rl_residuals_db[m];
        const double family_cmp = realized ? base : dray.pg_det_db;
        for (CursorSide side : {CursorSide::pre, CursorSide::post}) {
            const auto stream = detail::family_stream(rng, m, 0, side);
            const int count = side == CursorSide::pre ? config.n_pre : config.n_post;
            auto fam = detail::generate_family(c.cursor, base, family_cmp, mats[m], side, count, stream);
            auto s_other = stream.child(detail::other_rl);
            for (auto &mpc : fam) {
                for (std::size_t j = 0; j < mats.size(); ++j) {
                    if (j == m)
                        continue;
                    mpc.pg_db -= sample_rician(s_other, mats[j].rl.s, mats[j].rl.sigma) - mats[j].mu_rl_db;
                }
            }
            diffuse.insert(diffuse.end(), fam.begin(), fam.end());
        }
    }
    detail::finalize_cluster(c, std::move(diffuse));
    return c;
}

/// Single-reflection generator.
inline Cluster generate_cluster_first_order(const DRay &dray, const MaterialLibrary &library, const QdConfig &config,
                                            const RngStream &rng)
{
    detail::require_order(dray, dray.order == 1, "generate_cluster_first_order: order must be 1");
    return generate_cluster_reduced(dray, library, config, rng);
}

/// Upper bound (N_pre + 1 + N_post)^n on the complete-model cluster size, saturating.
inline std::size_t complete_model_bound(int n_pre, int n_post, int order)
{
    const std::size_t per = static_cast<std::size_t>(n_pre) + 1 + static_cast<std::size_t>(n_post);
    std::size_t total = 1;
    for (int i = 0; i < order; ++i) {
        if (total > static_cast<std::size_t>(-1) / per)
            return static_cast<std::size_t>(-1);
        total *= per;
    }
    return total;
}

/// Complete multi-reflection generator. At bounce k every component (specular
/// or diffuse) continues specularly with the cursor's bounce-k loss residual and
/// spawns its own pre/post family from material k, anchored at its own delay,
/// gain and angles. Diffuse children are pruned against their parent's gain.
inline Cluster generate_cluster_complete(const DRay &dray, const MaterialLibrary &library, const QdConfig &config,
                                         const RngStream &rng)
{
    detail::require_order(dray, dray.order >= 1, "generate_cluster_complete: order must be >= 1");
    const std::size_t bound = complete_model_bound(config.n_pre, config.n_post, dray.order);
    if (bound > config.max_complete_mpcs)
        throw ResourceError("complete model: up to " + std::to_string(bound) + " MPCs for order " +
                            std::to_string(dray.order) + " exceeds cap " + std::to_string(config.max_complete_mpcs));

    const auto mats = detail::resolve_all(dray, library);
    auto s_rl = rng.child(0);
    const CursorGain cg = realize_cursor_gain(dray.pg_det_db, std::span<const MaterialParams>(mats), s_rl);
    const bool realized = config.prune_reference == PruneReference::realized;

    // components[0] is always the all-specular chain
    std::vector<Mpc> components{detail::cursor_of(dray, dray.pg_det_db)};
    for (std::size_t k = 0; k < mats.size(); ++k) {
        std::vector<Mpc> next;
        next.reserve(components.size() * (1 + config.n_pre + config.n_post));
        for (std::size_t idx = 0; idx < components.size(); ++idx) {
            const Mpc &parent = components[idx];
            Mpc spec = parent;
            spec.pg_db -= cg.rl_residuals_db[k];
            next.push_back(spec);
            const double cmp = realized ? spec.pg_db : parent.pg_db;
            for (CursorSide side : {CursorSide::pre, CursorSide::post}) {
                const int count = side == CursorSide::pre ? config.n_pre : config.n_post;
                auto fam = detail::generate_family(spec, spec.pg_db, cmp, mats[k], side, count,
                                                   detail::family_stream(rng, k, idx, side));
                next.insert(next.end(), fam.begin(), fam.end());
            }
        }
        components = std::move(next);
    }

    Cluster c;
    c.dray = dray;
    c.realized_pg0_db = cg.pg0_db;
    c.comparison_db = realized ? cg.pg0_db : dray.pg_det_db;
    c.cursor = components.front();
    c.cursor.kind = MpcKind::cursor;
    c.cursor.phase_rad = 0.0;
    components.erase(components.begin());
    detail::finalize_cluster(c, std::move(components));
    return c;
}

/// Cursor only, deterministic gain, no diffuse components.
inline Cluster generate_cluster_drays_only(const DRay &dray)
{
    Cluster c;
    c.dray = dray;
    c.realized_pg0_db = dray.pg_det_db;
    c.comparison_db = dray.pg_det_db;
    c.cursor = detail::cursor_of(dray, dray.pg_det_db);
    return c;
}

inline void validate_config(const QdConfig &config)
{
    if (config.n_pre < 0 || config.n_post < 0)
        throw ParameterError("n_pre and n_post must be >= 0");
    if (!(config.carrier_hz > 0.0))
        throw ParameterError("carrier frequency must be > 0");
    if (config.max_order < 0 || config.max_order > max_trace_order)
        throw ParameterError("max_order out of range");
}

/// Build a channel from a set of D-rays (traced or ingested). The order-0 ray,
/// if present, becomes the direct MPC with phase 0 and no diffuse children;
/// reflected ray i (in input order) uses sub-stream rng.child(i).
inline ChannelInstance generate_channel(std::span<const DRay> drays, const MaterialLibrary &library,
                                        const QdConfig &config, const RngStream &rng)
{
    validate_config(config);
    ChannelInstance ch;
    ch.seed = rng.seed();
    ch.config = config;
    bool have_tdir = false;
    std::uint64_t cluster_index = 0;
    for (const auto &r : drays) {
        if (!have_tdir) {
            ch.t_dir_ns = r.delay_abs_ns - r.tau_ns;
            have_tdir = true;
        }
        if (r.order == 0) {
            ch.t_dir_ns = r.delay_abs_ns;
            if (!config.drop_direct) {
                Mpc d = detail::cursor_of(r, r.pg_det_db);
                d.kind = MpcKind::direct;
                d.tau_ns = 0.0;
                ch.direct = d;
            }
            continue;
        }
        const RngStream stream = rng.child(cluster_index++);
        switch (config.variant) {
        case ModelVariant::drays_only: ch.clusters.push_back(generate_cluster_drays_only(r)); break;
        case ModelVariant::reduced: ch.clusters.push_back(generate_cluster_reduced(r, library, config, stream)); break;
        case ModelVariant::complete: ch.clusters.push_back(generate_cluster_complete(r, library, config, stream)); break;
        }
    }
    return ch;
}

/// Trace the box room, attach deterministic gains and generate the channel.
inline ChannelInstance generate_channel(const Room &room, Point3 tx, Point3 rx, const MaterialLibrary &library,
                                        const QdConfig &config, const RngStream &rng)
{
    validate_config(config);
    auto rays = trace(room, tx, rx, config.max_order, config.carrier_hz);
    assign_deterministic_gains(rays, library, wavelength(config.carrier_hz));
    auto ch = generate_channel(std::span<const DRay>(rays), library, config, rng);
    ch.tx = tx;
    ch.rx = rx;
    return ch;
}

} // namespace qdchan

#endif // QDCHAN_QD_CORE_HPP
