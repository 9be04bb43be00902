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

#ifndef QDCHAN_METRICS_HPP
#define QDCHAN_METRICS_HPP

#include "qdchan/error.hpp"
#include "qdchan/qd_core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qdchan {

/// Right-continuous step CDF F(x) = #{samples <= x} / N over a sorted sample.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty())
            throw ParameterError("empirical CDF needs at least one sample");
        for (double v : values_)
            if (std::isnan(v))
                throw ParameterError("empirical CDF: NaN sample");
        std::sort(values_.begin(), values_.end());
    }

    double operator()(double x) const
    {
        const auto it = std::upper_bound(values_.begin(), values_.end(), x);
        return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
    }

    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double> &values() const noexcept { return values_; }

    /// Distinct sample values with F evaluated at each.
    std::vector<std::pair<double, double>> breakpoints() const
    {
        std::vector<std::pair<double, double>> out;
        const double n = static_cast<double>(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (i + 1 == values_.size() || values_[i + 1] != values_[i])
                out.emplace_back(values_[i], static_cast<double>(i + 1) / n);
        return out;
    }

    friend bool operator==(const EmpiricalCdf &, const EmpiricalCdf &) = default;

private:
    std::vector<double> values_;
};

inline EmpiricalCdf empirical_cdf(std::vector<double> values) { return EmpiricalCdf(std::move(values)); }

/// sup_x |F_a(x) - F_b(x)|, evaluated exactly at the merged breakpoints.
inline double ks_statistic(const EmpiricalCdf &a, const EmpiricalCdf &b)
{
    const auto &va = a.values();
    const auto &vb = b.values();
    const double na = static_cast<double>(va.size());
    const double nb = static_cast<double>(vb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < va.size() || j < vb.size()) {
        double x;
        if (i == va.size())
            x = vb[j];
        else if (j == vb.size())
            x = va[i];
        else
            x = std::min(va[i], vb[j]);
        while (i < va.size() && va[i] <= x)
            ++i;
        while (j < vb.size() && vb[j] <= x)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// One MPC of a channel trace, absolute delay.
struct MpcSample {
    double delay_ns = 0.0;
    double pg_db = 0.0;
};

using ChannelSamples = std::vector<MpcSample>;

namespace detail {

// Power-weighted standard deviation of delays; weights normalised to the strongest tap.
template <class Range, class DelayOf, class GainOf>
double weighted_delay_spread(const Range &items, DelayOf delay_of, GainOf gain_of)
{
    if (std::begin(items) == std::end(items))
        throw ParameterError("rms_delay_spread: empty MPC list");
    double pg_max = -std::numeric_limits<double>::infinity();
    for (const auto &m : items)
        pg_max = std::max(pg_max, gain_of(m));
    const double origin = delay_of(*std::begin(items));
    double sw = 0.0, st = 0.0;
    for (const auto &m : items) {
        const double w = std::pow(10.0, (gain_of(m) - pg_max) / 10.0);
        sw += w;
        st += w * (delay_of(m) - origin);
    }
    const double mean = st / sw;
    double sv = 0.0;
    for (const auto &m : items) {
        const double w = std::pow(10.0, (gain_of(m) - pg_max) / 10.0);
        const double dt = delay_of(m) - origin - mean;
        sv += w * dt * dt;
    }
    return std::sqrt(sv / sw);
}

} // namespace detail

inline double rms_delay_spread(std::span<const Mpc> mpcs)
{
    return detail::weighted_delay_spread(
        mpcs, [](const Mpc &m) { return m.tau_ns; }, [](const Mpc &m) { return m.pg_db; });
}

inline double rms_delay_spread(std::span<const MpcSample> samples)
{
    return detail::weighted_delay_spread(
        samples, [](const MpcSample &m) { return m.delay_ns; }, [](const MpcSample &m) { return m.pg_db; });
}

/// Every MPC of the channel (direct, cursors, diffuse) with absolute delays.
inline ChannelSamples to_samples(const ChannelInstance &ch)
{
    ChannelSamples out;
    auto add = [&](const Mpc &m) { out.push_back({ch.t_dir_ns + m.tau_ns, m.pg_db}); };
    if (ch.direct)
        add(*ch.direct);
    for (const auto &c : ch.clusters) {
        add(c.cursor);
        for (const auto &m : c.pre)
            add(m);
        for (const auto &m : c.post)
            add(m);
    }
    return out;
}

struct CompareOptions {
    double floor_db = -120.0; // MPCs below are discarded; -inf disables
};

/// Pooled per-MPC gains/delays and one RMS delay spread per non-empty channel.
struct EnsembleStats {
    std::vector<double> pg_db;
    std::vector<double> delay_ns;
    std::vector<double> rmsds_ns;
};

inline EnsembleStats ensemble_stats(std::span<const ChannelSamples> ensemble, double floor_db, const std::string &side)
{
    EnsembleStats st;
    ChannelSamples kept;
    for (const auto &ch : ensemble) {
        kept.clear();
        for (const auto &m : ch)
            if (m.pg_db >= floor_db)
                kept.push_back(m);
        if (kept.empty())
            continue;
        for (const auto &m : kept) {
            st.pg_db.push_back(m.pg_db);
            st.delay_ns.push_back(m.delay_ns);
        }
        st.rmsds_ns.push_back(rms_delay_spread(std::span<const MpcSample>(kept)));
    }
    if (st.pg_db.empty())
        throw ParameterError(side + " ensemble is empty after applying the " + std::to_string(floor_db) +
                             " dB floor");
    return st;
}

struct ComparisonReport {
    double ks_pg = 0.0;
    double ks_delay = 0.0;
    double ks_rmsds = 0.0;
    std::size_t sim_mpcs = 0, ref_mpcs = 0;
    std::size_t sim_channels = 0, ref_channels = 0;
    double floor_db = -120.0;
};

inline ComparisonReport compare_stats(const EnsembleStats &sim, const EnsembleStats &ref, double floor_db)
{
    ComparisonReport r;
    r.ks_pg = ks_statistic(EmpiricalCdf(sim.pg_db), EmpiricalCdf(ref.pg_db));
    r.ks_delay = ks_statistic(EmpiricalCdf(sim.delay_ns), EmpiricalCdf(ref.delay_ns));
    r.ks_rmsds = ks_statistic(EmpiricalCdf(sim.rmsds_ns), EmpiricalCdf(ref.rmsds_ns));
    r.sim_mpcs = sim.pg_db.size();
    r.ref_mpcs = ref.pg_db.size();
    r.sim_channels = sim.rmsds_ns.size();
    r.ref_channels = ref.rmsds_ns.size();
    r.floor_db = floor_db;
    return r;
}

inline ComparisonReport compare_ensembles(std::span<const ChannelSamples> sim, std::span<const ChannelSamples> ref,
                                          const CompareOptions &opt = {})
{
    if (sim.empty())
        throw ParameterError("simulated ensemble is empty");
    if (ref.empty())
        throw ParameterError("reference ensemble is empty");
    return compare_stats(ensemble_stats(sim, opt.floor_db, "simulated"),
                         ensemble_stats(ref, opt.floor_db, "reference"), opt.floor_db);
}

inline ComparisonReport compare_ensembles(std::span<const ChannelInstance> sim, std::span<const ChannelInstance> ref,
                                          const CompareOptions &opt = {})
{
    std::vector<ChannelSamples> a, b;
    for (const auto &c : sim)
        a.push_back(to_samples(c));
    for (const auto &c : ref)
        b.push_back(to_samples(c));
    return compare_ensembles(std::span<const ChannelSamples>(a), std::span<const ChannelSamples>(b), opt);
}

inline std::string to_text(const ComparisonReport &r)
{
    std::ostringstream os;
    os.precision(6);
    os << "KS distance (simulated vs reference)\n"
       << "  path gain          " << r.ks_pg << "\n"
       << "  absolute delay     " << r.ks_delay << "\n"
       << "  RMS delay spread   " << r.ks_rmsds << "\n"
       << "MPCs      sim=" << r.sim_mpcs << " ref=" << r.ref_mpcs << "\n"
       << "channels  sim=" << r.sim_channels << " ref=" << r.ref_channels << "\n"
       << "floor     " << r.floor_db << " dB\n";
    return os.str();
}

inline std::string to_json(const ComparisonReport &r)
{
    nlohmann::ordered_json j;
    j["ks_pg"] = r.ks_pg;
    j["ks_delay"] = r.ks_delay;
    j["ks_rmsds"] = r.ks_rmsds;
    j["sim_mpcs"] = r.sim_mpcs;
    j["ref_mpcs"] = r.ref_mpcs;
    j["sim_channels"] = r.sim_channels;
    j["ref_channels"] = r.ref_channels;
    if (std::isfinite(r.floor_db))
        j["floor_db"] = r.floor_db;
    else
        j["floor_db"] = nullptr;
    return j.dump(2) + "\n";
}

} // namespace qdchan

#endif // QDCHAN_METRICS_HPP
