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

#ifndef QDCHAN_MATERIALS_HPP
#define QDCHAN_MATERIALS_HPP

#include "qdchan/error.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

namespace qdchan {

/// (s, sigma) parameters of a Rician law. (0, 0) marks an uncharacterised family.
struct RicianPair {
    double s = 0.0;
    double sigma = 0.0;

    constexpr bool is_zero() const noexcept { return s == 0.0 && sigma == 0.0; }
    friend constexpr bool operator==(const RicianPair &, const RicianPair &) = default;
};

enum class CursorSide { pre, post };

inline const char *to_string(CursorSide side) { return side == CursorSide::pre ? "pre" : "post"; }

/// QD parameter set of one surface material.
/// Units: k in dB, gamma in ns, sigma_s in nepers, lambda in 1/ns, sigma_alpha in degrees, rl in dB.
struct MaterialParams {
    std::string name;
    RicianPair k_pre, k_post;
    RicianPair gamma_pre, gamma_post;
    RicianPair sigma_s_pre, sigma_s_post;
    RicianPair lambda_pre, lambda_post;
    RicianPair sigma_alpha_az, sigma_alpha_el;
    RicianPair rl;
    double mu_rl_db = 0.0;

    struct Side {
        RicianPair k, gamma, sigma_s, lambda;
    };

    Side side(CursorSide s) const
    {
        if (s == CursorSide::pre)
            return {k_pre, gamma_pre, sigma_s_pre, lambda_pre};
        return {k_post, gamma_post, sigma_s_post, lambda_post};
    }

    // All four cursor-family pairs zero => that side generates no cursors
    bool side_enabled(CursorSide s) const
    {
        const auto p = side(s);
        return !(p.k.is_zero() && p.gamma.is_zero() && p.sigma_s.is_zero() && p.lambda.is_zero());
    }

    void disable_cursors()
    {
        k_pre = k_post = gamma_pre = gamma_post = {};
        sigma_s_pre = sigma_s_post = lambda_pre = lambda_post = {};
    }

    friend bool operator==(const MaterialParams &, const MaterialParams &) = default;
};

namespace detail {

struct PairField {
    const char *key;
    RicianPair MaterialParams::*member;
};

inline constexpr std::array<PairField, 11> material_pair_fields{{
    {"k_pre", &MaterialParams::k_pre},
    {"k_post", &MaterialParams::k_post},
    {"gamma_pre", &MaterialParams::gamma_pre},
    {"gamma_post", &MaterialParams::gamma_post},
    {"sigma_s_pre", &MaterialParams::sigma_s_pre},
    {"sigma_s_post", &MaterialParams::sigma_s_post},
    {"lambda_pre", &MaterialParams::lambda_pre},
    {"lambda_post", &MaterialParams::lambda_post},
    {"sigma_alpha_az", &MaterialParams::sigma_alpha_az},
    {"sigma_alpha_el", &MaterialParams::sigma_alpha_el},
    {"rl", &MaterialParams::rl},
}};

} // namespace detail

/// Throws ValidationError naming the first offending field.
inline void validate(const MaterialParams &m, const std::string &where = "")
{
    const std::string prefix = where.empty() ? m.name : where;
    if (m.name.empty())
        throw ValidationError(prefix + ".name", "material name must not be empty");
    for (const auto &f : detail::material_pair_fields) {
        const RicianPair &p = m.*(f.member);
        if (!std::isfinite(p.s) || !std::isfinite(p.sigma) || p.s < 0.0 || p.sigma < 0.0)
            throw ValidationError(prefix + "." + f.key, "s and sigma must be finite and >= 0");
    }
    if (!std::isfinite(m.mu_rl_db) || m.mu_rl_db < 0.0)
        throw ValidationError(prefix + ".mu_rl_db", "must be finite and >= 0");
}

/// Immutable-after-setup set of named materials plus an optional fallback map
/// for surfaces whose cursor families were never characterised.
class MaterialLibrary {
public:
    using map_type = std::map<std::string, MaterialParams>;

    void insert(MaterialParams m)
    {
        validate(m);
        const auto name = m.name;
        if (!materials_.emplace(name, std::move(m)).second)
            throw ValidationError(name + ".name", "duplicate material name");
    }

    /// `name` borrows RL statistics from `source`; cursor generation is disabled.
    void set_fallback(std::string name, std::string source) { fallback_[std::move(name)] = std::move(source); }

    const MaterialParams *find(const std::string &name) const
    {
        auto it = materials_.find(name);
        return it == materials_.end() ? nullptr : &it->second;
    }

    bool contains(const std::string &name) const { return materials_.count(name) != 0; }
    std::size_t size() const noexcept { return materials_.size(); }
    bool empty() const noexcept { return materials_.empty(); }
    const map_type &materials() const noexcept { return materials_; }
    const std::map<std::string, std::string> &fallbacks() const noexcept { return fallback_; }
    map_type::const_iterator begin() const { return materials_.begin(); }
    map_type::const_iterator end() const { return materials_.end(); }

    friend bool operator==(const MaterialLibrary &, const MaterialLibrary &) = default;

private:
    map_type materials_;
    std::map<std::string, std::string> fallback_;
};

/// Look up a material, applying the fallback rule for uncharacterised surfaces.
inline MaterialParams resolve(const MaterialLibrary &library, const std::string &name)
{
    if (const auto *m = library.find(name))
        return *m;
    const auto fb = library.fallbacks().find(name);
    if (fb != library.fallbacks().end()) {
        const auto *src = library.find(fb->second);
        if (!src)
            throw LookupError("material '" + name + "' falls back to unknown material '" + fb->second + "'");
        MaterialParams m = *src;
        m.name = name;
        m.disable_cursors();
        return m;
    }
    throw LookupError("unknown material '" + name + "'");
}

/// Parse a material library document: a JSON array of materials, each with
/// `name`, `mu_rl_db` and the eleven (s, sigma) pairs as two-element arrays.
/// An empty (or whitespace-only) document yields an empty library.
inline MaterialLibrary load_library(std::string_view source)
{
    using nlohmann::json;
    MaterialLibrary lib;
    if (source.find_first_not_of(" \t\r\n") == std::string_view::npos)
        return lib;

    json doc;
    try {
        doc = json::parse(source.begin(), source.end(), nullptr, true, true);
    } catch (const json::parse_error &e) {
        throw ValidationError("", std::string("malformed material library: ") + e.what());
    }
    if (!doc.is_array())
        throw ValidationError("", "material library must be a top-level list of materials");

    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json &entry = doc[i];
        const std::string where = "materials[" + std::to_string(i) + "]";
        if (!entry.is_object())
            throw ValidationError(where, "material entry must be an object");

        for (auto it = entry.begin(); it != entry.end(); ++it) {
            const auto &key = it.key();
            bool known = key == "name" || key == "mu_rl_db";
            for (const auto &f : detail::material_pair_fields)
                known = known || key == f.key;
            if (!known)
                throw ValidationError(where + "." + key, "unknown field");
        }

        MaterialParams m;
        if (!entry.contains("name") || !entry["name"].is_string())
            throw ValidationError(where + ".name", "missing or not a string");
        m.name = entry["name"].get<std::string>();
        if (!entry.contains("mu_rl_db") || !entry["mu_rl_db"].is_number())
            throw ValidationError(where + ".mu_rl_db", "missing or not a number");
        m.mu_rl_db = entry["mu_rl_db"].get<double>();

        for (const auto &f : detail::material_pair_fields) {
            const std::string field = where + "." + f.key;
            if (!entry.contains(f.key))
                throw ValidationError(field, "missing field");
            const json &v = entry[f.key];
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                throw ValidationError(field, "expected [s, sigma]");
            m.*(f.member) = RicianPair{v[0].get<double>(), v[1].get<double>()};
        }
        validate(m, where);
        if (lib.contains(m.name))
            throw ValidationError(where + ".name", "duplicate material name '" + m.name + "'");
        lib.insert(std::move(m));
    }
    return lib;
}

inline MaterialLibrary load_library_file(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("", "cannot open material library '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_library(ss.str());
}

/// Serialise to the document format read by load_library (fallbacks are not part of it).
inline std::string dump_library(const MaterialLibrary &library)
{
    using nlohmann::ordered_json;
    ordered_json doc = ordered_json::array();
    for (const auto &[name, m] : library) {
        ordered_json e;
        e["name"] = name;
        e["mu_rl_db"] = m.mu_rl_db;
        for (const auto &f : detail::material_pair_fields) {
            const RicianPair &p = m.*(f.member);
            e[f.key] = {p.s, p.sigma};
        }
        doc.push_back(std::move(e));
    }
    return doc.dump(2) + "\n";
}

/// Lecture-room material library measured at 60 GHz (one column per surface).
inline MaterialLibrary lecture_room_library()
{
    auto make = [](std::string name, RicianPair k_pre, RicianPair k_post, RicianPair g_pre, RicianPair g_post,
                   RicianPair ss_pre, RicianPair ss_post, RicianPair l_pre, RicianPair l_post, RicianPair sa_az,
                   RicianPair sa_el, RicianPair rl, double mu_rl) {
        MaterialParams m;
        m.name = std::move(name);
        m.k_pre = k_pre;
        m.k_post = k_post;
        m.gamma_pre = g_pre;
        m.gamma_post = g_post;
        m.sigma_s_pre = ss_pre;
        m.sigma_s_post = ss_post;
        m.lambda_pre = l_pre;
        m.lambda_post = l_post;
        m.sigma_alpha_az = sa_az;
        m.sigma_alpha_el = sa_el;
        m.rl = rl;
        m.mu_rl_db = mu_rl;
        return m;
    };

    MaterialLibrary lib;
    // clang-format off
    lib.insert(make("Left Wall (TX2)",
        {5.1196, 1.7485}, {6.2208, 3.5421}, {0.6742, 0.9992}, {0.0658, 1.2034},
        {0.0119, 0.3087}, {0.4144, 0.1507}, {0.9775, 0.3449}, {0.8153, 0.6948},
        {0.1016, 2.2504}, {2.9947, 1.6613}, {9.8412, 3.4424}, 10.7));
    lib.insert(make("Bottom Wall (TX3)",
        {1.4809, 2.1325}, {7.1809, 2.5325}, {0.9006, 0.2325}, {0.6881, 0.3566},
        {0.5553, 0.129}, {0.26, 0.1003}, {0.9172, 0.2241}, {1.4106, 0.5832},
        {1.9426, 1.5726}, {2.6946, 1.3948}, {8.5025, 4.2343}, 9.84));
    lib.insert(make("Right Wall (TX1)",
        {0, 0}, {0.2641, 3.1699}, {0, 0}, {0.0412, 0.8648},
        {0, 0}, {0.6367, 0.3209}, {0, 0}, {0.9879, 0.4235},
        {3.2889, 1.3202}, {3.2812, 1.8865}, {10.1562, 3.5164}, 10.8));
    lib.insert(make("Top Wall (TX1)",
        {0.5913, 4.5206}, {0.33, 3.7213}, {0.0094, 0.2285}, {0.0792, 1.1572},
        {0.243, 0.273}, {0.201, 0.1901}, {0.619, 1.1299}, {0.8655, 0.3762},
        {2.117, 2.1206}, {2.741, 1.7964}, {6.7238, 5.9352}, 9.27));
    lib.insert(make("Tables (TX1)",
        {0, 0}, {3.7738, 1.8748}, {0, 0}, {0.53, 0.4837},
        {0, 0}, {0.3309, 0.4614}, {0, 0}, {0.8099, 0.076},
        {1.6594, 3.1974}, {4.0345, 2.6859}, {5.2106, 3.4013}, 6.58));
    lib.insert(make("Ceiling (TX1)",
        {3.6167, 7.2715}, {7.1103, 2.2712}, {0.9595, 0.901}, {0.0717, 1.2794},
        {0.2122, 0.0935}, {0.7679, 0.2484}, {0.8119, 0.2421}, {0.7785, 0.1426},
        {1.9829, 0.9094}, {2.696, 1.1135}, {6.5833, 2.1943}, 6.9));
    // clang-format on
    return lib;
}

} // namespace qdchan

#endif // QDCHAN_MATERIALS_HPP
