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

#ifndef QDCHAN_IO_HPP
#define QDCHAN_IO_HPP

#include "qdchan/error.hpp"
#include "qdchan/geometry.hpp"
#include "qdchan/materials.hpp"
#include "qdchan/metrics.hpp"
#include "qdchan/qd_core.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace qdchan {

inline constexpr const char *matlib_env_var = "QDCHAN_MATLIB_PATH";
inline constexpr const char *builtin_lecture_room = "builtin:lecture_room";

/// Everything needed to run one batch: geometry, positions, model settings.
struct ScenarioConfig {
    Room room;
    Point3 tx;
    std::vector<Point3> rx;
    QdConfig qd;
    std::uint64_t seed = 0;
    double floor_db = -120.0;
    std::map<std::string, std::string> fallback;
    std::string material_library = builtin_lecture_room;
    std::filesystem::path drays_file; // when set, replaces the box-room tracer
    std::filesystem::path base_dir;   // relative paths resolve against this
    unsigned threads = 1;
};

// ------------------------------------------------------------------------
// Number formatting

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_hex64(std::uint64_t v)
{
    char buf[17];
    const auto res = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ------------------------------------------------------------------------
// Scenario configuration

inline ModelVariant parse_model_variant(const std::string &s)
{
    if (s == "drays_only")
        return ModelVariant::drays_only;
    if (s == "reduced")
        return ModelVariant::reduced;
    if (s == "complete")
        return ModelVariant::complete;
    throw ConfigError("model", "expected drays_only, reduced or complete, got '" + s + "'");
}

namespace detail {

inline PruneReference parse_prune_reference(const std::string &s)
{
    if (s == "realized")
        return PruneReference::realized;
    if (s == "deterministic")
        return PruneReference::deterministic;
    throw ConfigError("prune_reference", "expected realized or deterministic, got '" + s + "'");
}

inline Point3 parse_point(const nlohmann::json &j, const std::string &field)
{
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(field, "expected [x, y, z]");
    Point3 p;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number())
            throw ConfigError(field, "coordinates must be numbers");
        p[i] = j[i].get<double>();
        if (!std::isfinite(p[i]))
            throw ConfigError(field, "coordinates must be finite");
    }
    return p;
}

template <class T>
T get_or(const nlohmann::json &j, const char *key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError(key, "wrong type");
    }
}

// Evenly spaced points along the perimeter of an axis-aligned rectangle at height z.
inline std::vector<Point3> rectangle_loop(double x0, double x1, double y0, double y1, double z, std::size_t count)
{
    std::vector<Point3> out;
    const double w = x1 - x0, h = y1 - y0;
    const double perimeter = 2.0 * (w + h);
    for (std::size_t i = 0; i < count; ++i) {
        double s = perimeter * static_cast<double>(i) / static_cast<double>(count);
        Point3 p{x0, y0, z};
        if (s < w) {
            p.x = x0 + s;
        } else if ((s -= w) < h) {
            p.x = x1;
            p.y = y0 + s;
        } else if ((s -= h) < w) {
            p.x = x1 - s;
            p.y = y1;
        } else {
            s -= w;
            p.y = y1 - s;
        }
        out.push_back(p);
    }
    return out;
}

} // namespace detail

/// Parse a scenario document (JSON). Relative paths resolve against base_dir.
inline ScenarioConfig parse_config(std::string_view doc, const std::filesystem::path &base_dir = {})
{
    using nlohmann::json;
    json j;
    try {
        j = json::parse(doc.begin(), doc.end(), nullptr, true, true);
    } catch (const json::parse_error &e) {
        throw ConfigError("", std::string("malformed config: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("", "config must be an object");

    static const char *known[] = {"room", "tx", "rx", "rx_loop", "carrier_frequency_hz", "max_order", "model",
                                  "n_pre", "n_post", "seed", "prune_reference", "floor_db", "fallback",
                                  "material_library", "drays_file", "drop_direct", "max_complete_mpcs", "threads"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find_if(std::begin(known), std::end(known), [&](const char *k) { return it.key() == k; }) ==
            std::end(known))
            throw ConfigError(it.key(), "unknown key");

    ScenarioConfig c;
    c.base_dir = base_dir;

    if (j.contains("drays_file"))
        c.drays_file = detail::get_or<std::string>(j, "drays_file", "");

    if (j.contains("room")) {
        const json &room = j["room"];
        if (!room.contains("dimensions") || !room["dimensions"].is_array() || room["dimensions"].size() != 3)
            throw ConfigError("room.dimensions", "expected [Lx, Ly, Lz]");
        for (int i = 0; i < 3; ++i) {
            const auto &d = room["dimensions"][i];
            if (!d.is_number() || !(d.get<double>() > 0.0))
                throw ConfigError("room.dimensions", "dimensions must be numbers > 0");
            c.room.dimensions[i] = d.get<double>();
        }
        if (!room.contains("materials") || !room["materials"].is_object())
            throw ConfigError("room.materials", "expected an object mapping faces to material names");
        for (Face f : all_faces) {
            const std::string field = std::string("room.materials.") + face_key(f);
            if (!room["materials"].contains(face_key(f)) || !room["materials"][face_key(f)].is_string())
                throw ConfigError(field, "missing material name");
            c.room.face_materials[static_cast<int>(f)] = room["materials"][face_key(f)].get<std::string>();
        }
    } else if (c.drays_file.empty()) {
        throw ConfigError("room", "missing (required unless drays_file is given)");
    }

    if (j.contains("tx"))
        c.tx = detail::parse_point(j["tx"], "tx");
    else if (c.drays_file.empty())
        throw ConfigError("tx", "missing");

    if (j.contains("rx")) {
        if (!j["rx"].is_array())
            throw ConfigError("rx", "expected a list of [x, y, z]");
        for (std::size_t i = 0; i < j["rx"].size(); ++i)
            c.rx.push_back(detail::parse_point(j["rx"][i], "rx[" + std::to_string(i) + "]"));
    }
    if (j.contains("rx_loop")) {
        const json &l = j["rx_loop"];
        try {
            const auto x = l.at("x").get<std::vector<double>>();
            const auto y = l.at("y").get<std::vector<double>>();
            const double z = l.at("z").get<double>();
            const auto count = l.at("count").get<std::size_t>();
            if (x.size() != 2 || y.size() != 2 || !(x[0] < x[1]) || !(y[0] < y[1]) || count == 0)
                throw ConfigError("rx_loop", "expected x: [x0, x1], y: [y0, y1] increasing and count > 0");
            auto pts = detail::rectangle_loop(x[0], x[1], y[0], y[1], z, count);
            c.rx.insert(c.rx.end(), pts.begin(), pts.end());
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("rx_loop", std::string("expected {x, y, z, count}: ") + e.what());
        }
    }
    if (c.rx.empty() && c.drays_file.empty())
        throw ConfigError("rx", "receiver list must not be empty");

    c.qd.carrier_hz = detail::get_or<double>(j, "carrier_frequency_hz", default_carrier_hz);
    if (!(c.qd.carrier_hz > 0.0) || !std::isfinite(c.qd.carrier_hz))
        throw ConfigError("carrier_frequency_hz", "must be > 0");
    c.qd.max_order = detail::get_or<int>(j, "max_order", 2);
    if (c.qd.max_order < 0 || c.qd.max_order > max_trace_order)
        throw ConfigError("max_order", "must be in [0, " + std::to_string(max_trace_order) + "]");
    c.qd.variant = parse_model_variant(detail::get_or<std::string>(j, "model", "reduced"));
    c.qd.n_pre = detail::get_or<int>(j, "n_pre", 3);
    if (c.qd.n_pre < 0)
        throw ConfigError("n_pre", "must be >= 0");
    c.qd.n_post = detail::get_or<int>(j, "n_post", 16);
    if (c.qd.n_post < 0)
        throw ConfigError("n_post", "must be >= 0");
    c.qd.prune_reference =
        detail::parse_prune_reference(detail::get_or<std::string>(j, "prune_reference", "realized"));
    c.qd.drop_direct = detail::get_or<bool>(j, "drop_direct", false);
    c.qd.max_complete_mpcs = detail::get_or<std::size_t>(j, "max_complete_mpcs", 10000);
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    c.threads = detail::get_or<unsigned>(j, "threads", 1);

    if (j.contains("floor_db")) {
        if (j["floor_db"].is_null())
            c.floor_db = -std::numeric_limits<double>::infinity();
        else if (j["floor_db"].is_number())
            c.floor_db = j["floor_db"].get<double>();
        else
            throw ConfigError("floor_db", "expected a number or null (disabled)");
    }
    if (j.contains("fallback")) {
        if (!j["fallback"].is_object())
            throw ConfigError("fallback", "expected an object mapping material to source material");
        for (auto it = j["fallback"].begin(); it != j["fallback"].end(); ++it) {
            if (!it.value().is_string())
                throw ConfigError("fallback." + it.key(), "expected a material name");
            c.fallback[it.key()] = it.value().get<std::string>();
        }
    }
    c.material_library = detail::get_or<std::string>(j, "material_library", builtin_lecture_room);
    return c;
}

inline ScenarioConfig load_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

/// Canonical JSON of the effective configuration (sorted keys), hashed into table headers.
inline std::string canonical_config(const ScenarioConfig &c)
{
    nlohmann::json j;
    j["room"]["dimensions"] = c.room.dimensions;
    for (Face f : all_faces)
        j["room"]["materials"][face_key(f)] = c.room.material(f);
    j["tx"] = {c.tx.x, c.tx.y, c.tx.z};
    j["rx"] = nlohmann::json::array();
    for (const auto &p : c.rx)
        j["rx"].push_back({p.x, p.y, p.z});
    j["carrier_frequency_hz"] = c.qd.carrier_hz;
    j["max_order"] = c.qd.max_order;
    j["model"] = to_string(c.qd.variant);
    j["n_pre"] = c.qd.n_pre;
    j["n_post"] = c.qd.n_post;
    j["prune_reference"] = to_string(c.qd.prune_reference);
    j["drop_direct"] = c.qd.drop_direct;
    j["max_complete_mpcs"] = c.qd.max_complete_mpcs;
    j["seed"] = c.seed;
    j["floor_db"] = std::isfinite(c.floor_db) ? nlohmann::json(c.floor_db) : nlohmann::json(nullptr);
    j["fallback"] = c.fallback;
    j["material_library"] = c.material_library;
    j["drays_file"] = c.drays_file.generic_string();
    return j.dump();
}

inline std::uint64_t config_hash(const ScenarioConfig &c) { return fnv1a64(canonical_config(c)); }

/// Locate a library file: absolute, relative to the config, then each
/// directory listed in QDCHAN_MATLIB_PATH (colon separated).
inline std::filesystem::path find_library_file(const std::string &name, const std::filesystem::path &base_dir)
{
    namespace fs = std::filesystem;
    const fs::path p(name);
    if (p.is_absolute())
        return p;
    if (fs::exists(base_dir / p))
        return base_dir / p;
    if (const char *env = std::getenv(matlib_env_var)) {
        std::string_view dirs(env);
        while (!dirs.empty()) {
            const auto colon = dirs.find(':');
            const fs::path dir(std::string(dirs.substr(0, colon)));
            if (!dir.empty() && fs::exists(dir / p))
                return dir / p;
            if (colon == std::string_view::npos)
                break;
            dirs.remove_prefix(colon + 1);
        }
    }
    if (fs::exists(p))
        return p;
    throw ConfigError("material_library", "cannot find '" + name + "' (searched config directory and $" +
                                              matlib_env_var + ")");
}

/// Load the scenario's library, apply the fallback map, and check every room face resolves.
inline MaterialLibrary load_scenario_library(const ScenarioConfig &c)
{
    MaterialLibrary lib;
    try {
        if (c.material_library == builtin_lecture_room)
            lib = lecture_room_library();
        else
            lib = load_library_file(find_library_file(c.material_library, c.base_dir));
    } catch (const ValidationError &e) {
        throw ConfigError("material_library", e.what());
    }
    for (const auto &[name, source] : c.fallback) {
        if (!lib.contains(source))
            throw ConfigError("fallback." + name, "unknown source material '" + source + "'");
        lib.set_fallback(name, source);
    }
    if (c.drays_file.empty()) {
        for (Face f : all_faces) {
            try {
                (void)resolve(lib, c.room.material(f));
            } catch (const LookupError &e) {
                throw ConfigError(std::string("room.materials.") + face_key(f), e.what());
            }
        }
    }
    return lib;
}

// ------------------------------------------------------------------------
// CSV helpers

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line, const std::string &column)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(line, "column '" + column + "': invalid number '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s, std::size_t line, const std::string &column)
{
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError(line, "column '" + column + "': invalid integer '" + std::string(s) + "'");
    return v;
}

/// Generic reader: `# key: value` header lines, then a column-name line, then rows.
struct CsvTable {
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows; // (line number, fields)

    std::optional<std::size_t> column(const std::string &name) const
    {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - columns.begin());
    }

    std::size_t require(const std::string &name) const
    {
        if (auto c = column(name))
            return *c;
        throw ParseError(0, "missing required column '" + name + "'");
    }
};

inline CsvTable read_csv(std::istream &in)
{
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_columns = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line.front() == '#') {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                const auto key = trim(std::string_view(line).substr(1, colon - 1));
                const auto value = trim(std::string_view(line).substr(colon + 1));
                t.meta.emplace(std::string(key), std::string(value));
            }
            continue;
        }
        auto fields = split(line, ',');
        if (!have_columns) {
            for (auto f : fields)
                t.columns.emplace_back(f);
            have_columns = true;
            continue;
        }
        if (fields.size() != t.columns.size())
            throw ParseError(lineno, "expected " + std::to_string(t.columns.size()) + " fields, got " +
                                         std::to_string(fields.size()));
        std::vector<std::string> row;
        row.reserve(fields.size());
        for (auto f : fields)
            row.emplace_back(f);
        t.rows.emplace_back(lineno, std::move(row));
    }
    if (!have_columns)
        throw ParseError(0, "no column header line found");
    return t;
}

inline void check_table_name(const std::string &name, const char *what)
{
    if (name.find_first_of(",;\n\r") != std::string::npos)
        throw ParameterError(std::string(what) + " '" + name + "' contains a reserved character (, ; or newline)");
}

} // namespace detail

/// Header metadata written at the top of every table.
struct TableHeader {
    std::string kind; // "dray-table", "mpc-table", ...
    std::vector<std::pair<std::string, std::string>> entries;
};

inline TableHeader make_header(std::string kind, const ScenarioConfig &c)
{
    TableHeader h{std::move(kind), {}};
    h.entries.emplace_back("seed", std::to_string(c.seed));
    h.entries.emplace_back("config_hash", format_hex64(config_hash(c)));
    h.entries.emplace_back("model", to_string(c.qd.variant));
    h.entries.emplace_back("n_pre", std::to_string(c.qd.n_pre));
    h.entries.emplace_back("n_post", std::to_string(c.qd.n_post));
    h.entries.emplace_back("max_order", std::to_string(c.qd.max_order));
    h.entries.emplace_back("prune_reference", to_string(c.qd.prune_reference));
    h.entries.emplace_back("carrier_frequency_hz", format_double(c.qd.carrier_hz));
    return h;
}

inline void write_header(std::ostream &os, const TableHeader &h, std::string_view units)
{
    os << "# qdchan " << h.kind << " v1\n";
    for (const auto &[k, v] : h.entries)
        os << "# " << k << ": " << v << "\n";
    os << "# units: " << units << "\n";
}

// ------------------------------------------------------------------------
// D-ray tables

/// Rays keyed by receiver index.
using DRaySet = std::map<std::size_t, std::vector<DRay>>;

inline constexpr const char *dray_columns =
    "rx_index,order,delay_ns,tau_ns,pg_det_db,aod_az,aod_el,aoa_az,aoa_el,materials";

inline void write_dray_table(std::ostream &os, const DRaySet &rays, const TableHeader &header)
{
    write_header(os, header,
                 "delay_ns and tau_ns in ns; pg_det_db in dB; angles in degrees (el = polar angle from +z); "
                 "materials semicolon-joined");
    os << dray_columns << "\n";
    for (const auto &[rx, list] : rays) {
        for (const auto &r : list) {
            os << rx << ',' << r.order << ',' << format_double(r.delay_abs_ns) << ',' << format_double(r.tau_ns)
               << ',' << format_double(r.pg_det_db) << ',' << format_double(r.aod_az) << ','
               << format_double(r.aod_el) << ',' << format_double(r.aoa_az) << ',' << format_double(r.aoa_el)
               << ',';
            for (std::size_t i = 0; i < r.materials.size(); ++i) {
                detail::check_table_name(r.materials[i], "material name");
                os << (i ? ";" : "") << r.materials[i];
            }
            os << "\n";
        }
    }
}

/// Parse and validate a D-ray table. Material names are not resolved here.
inline DRaySet read_dray_table(std::istream &in)
{
    const auto t = detail::read_csv(in);
    const auto c_rx = t.require("rx_index"), c_order = t.require("order"), c_delay = t.require("delay_ns"),
               c_tau = t.require("tau_ns"), c_pg = t.require("pg_det_db"), c_daz = t.require("aod_az"),
               c_del = t.require("aod_el"), c_aaz = t.require("aoa_az"), c_ael = t.require("aoa_el"),
               c_mat = t.require("materials");
    DRaySet out;
    for (const auto &[line, f] : t.rows) {
        const long long rx = detail::parse_int(f[c_rx], line, "rx_index");
        if (rx < 0)
            throw ParseError(line, "rx_index must be >= 0");
        DRay r;
        const long long order = detail::parse_int(f[c_order], line, "order");
        if (order < 0)
            throw ParseError(line, "order must be >= 0");
        r.order = static_cast<int>(order);
        r.delay_abs_ns = detail::parse_double(f[c_delay], line, "delay_ns");
        r.tau_ns = detail::parse_double(f[c_tau], line, "tau_ns");
        r.pg_det_db = detail::parse_double(f[c_pg], line, "pg_det_db");
        r.aod_az = detail::parse_double(f[c_daz], line, "aod_az");
        r.aod_el = detail::parse_double(f[c_del], line, "aod_el");
        r.aoa_az = detail::parse_double(f[c_aaz], line, "aoa_az");
        r.aoa_el = detail::parse_double(f[c_ael], line, "aoa_el");
        if (!f[c_mat].empty())
            for (auto m : detail::split(f[c_mat], ';'))
                r.materials.emplace_back(m);

        if (!(r.delay_abs_ns > 0.0))
            throw ParseError(line, "delay_ns must be > 0");
        if (r.order == 0 && r.tau_ns != 0.0)
            throw ParseError(line, "direct ray must have tau_ns = 0");
        if (r.order >= 1 && !(r.tau_ns > 0.0))
            throw ParseError(line, "reflected ray must have tau_ns > 0");
        if (r.tau_ns > r.delay_abs_ns)
            throw ParseError(line, "tau_ns exceeds delay_ns");
        if (r.materials.size() != static_cast<std::size_t>(r.order))
            throw ParseError(line, "materials list length must equal order");
        for (double az : {r.aod_az, r.aoa_az})
            if (az < 0.0 || az >= 360.0)
                throw ParseError(line, "azimuth outside [0, 360)");
        for (double el : {r.aod_el, r.aoa_el})
            if (el < 0.0 || el > 180.0)
                throw ParseError(line, "elevation outside [0, 180]");
        r.path_length_m = r.delay_abs_ns * 1e-9 * speed_of_light;
        out[static_cast<std::size_t>(rx)].push_back(std::move(r));
    }
    return out;
}

// ------------------------------------------------------------------------
// MPC tables

/// One row of an MPC table; reference traces may omit the optional columns.
struct MpcRow {
    std::size_t rx_index = 0;
    std::optional<long long> cluster_id;
    std::optional<MpcKind> kind;
    std::optional<double> tau_ns;
    double delay_abs_ns = 0.0;
    double pg_db = 0.0;
    std::optional<double> aod_az, aod_el, aoa_az, aoa_el;
    std::optional<double> phase_rad;
};

struct MpcTable {
    std::map<std::string, std::string> meta;
    std::vector<MpcRow> rows;
    std::vector<std::size_t> lines; // source line of each row
};

inline constexpr const char *mpc_columns =
    "rx_index,cluster_id,kind,tau_ns,delay_abs_ns,pg_db,aod_az,aod_el,aoa_az,aoa_el,phase_rad";

namespace detail {

inline void write_mpc_row(std::ostream &os, std::size_t rx, std::size_t cluster, const Mpc &m, double t_dir_ns)
{
    os << rx << ',' << cluster << ',' << to_string(m.kind) << ',' << format_double(m.tau_ns) << ','
       << format_double(t_dir_ns + m.tau_ns) << ',' << format_double(m.pg_db) << ',' << format_double(m.aod_az)
       << ',' << format_double(m.aod_el) << ',' << format_double(m.aoa_az) << ',' << format_double(m.aoa_el) << ','
       << format_double(m.phase_rad) << "\n";
}

inline MpcKind parse_kind(std::string_view s, std::size_t line)
{
    if (s == "direct")
        return MpcKind::direct;
    if (s == "cursor")
        return MpcKind::cursor;
    if (s == "pre")
        return MpcKind::pre;
    if (s == "post")
        return MpcKind::post;
    throw ParseError(line, "unknown kind '" + std::string(s) + "'");
}

} // namespace detail

/// Rows ordered by rx_index, then cluster_id (0 = direct ray), then pre (descending tau), cursor, post.
inline void write_mpc_table(std::ostream &os, const std::map<std::size_t, ChannelInstance> &channels,
                            const TableHeader &header)
{
    TableHeader h = header;
    bool heuristic = false;
    for (const auto &[rx, ch] : channels)
        heuristic = heuristic || ch.heuristic();
    if (heuristic)
        h.entries.emplace_back("note", "complete-model recursion is a heuristic extension");
    write_header(os, h,
                 "tau_ns relative to direct-ray arrival, delay_abs_ns absolute, both ns; pg_db in dB; angles in "
                 "degrees (el = polar angle from +z); phase_rad in radians");
    os << mpc_columns << "\n";
    for (const auto &[rx, ch] : channels) {
        if (ch.direct)
            detail::write_mpc_row(os, rx, 0, *ch.direct, ch.t_dir_ns);
        for (std::size_t i = 0; i < ch.clusters.size(); ++i) {
            const auto &c = ch.clusters[i];
            for (const auto &m : c.pre)
                detail::write_mpc_row(os, rx, i + 1, m, ch.t_dir_ns);
            detail::write_mpc_row(os, rx, i + 1, c.cursor, ch.t_dir_ns);
            for (const auto &m : c.post)
                detail::write_mpc_row(os, rx, i + 1, m, ch.t_dir_ns);
        }
    }
}

/// Required columns: rx_index, delay_abs_ns, pg_db. Everything else is optional.
inline MpcTable read_mpc_table(std::istream &in)
{
    const auto t = detail::read_csv(in);
    const auto c_rx = t.require("rx_index"), c_delay = t.require("delay_abs_ns"), c_pg = t.require("pg_db");
    const auto c_cl = t.column("cluster_id"), c_kind = t.column("kind"), c_tau = t.column("tau_ns"),
               c_daz = t.column("aod_az"), c_del = t.column("aod_el"), c_aaz = t.column("aoa_az"),
               c_ael = t.column("aoa_el"), c_ph = t.column("phase_rad");
    MpcTable out;
    out.meta = t.meta;
    auto opt_double = [](const std::optional<std::size_t> &col, const std::vector<std::string> &f, std::size_t line,
                         const char *name) -> std::optional<double> {
        if (!col || f[*col].empty())
            return std::nullopt;
        return detail::parse_double(f[*col], line, name);
    };
    for (const auto &[line, f] : t.rows) {
        MpcRow r;
        const long long rx = detail::parse_int(f[c_rx], line, "rx_index");
        if (rx < 0)
            throw ParseError(line, "rx_index must be >= 0");
        r.rx_index = static_cast<std::size_t>(rx);
        r.delay_abs_ns = detail::parse_double(f[c_delay], line, "delay_abs_ns");
        r.pg_db = detail::parse_double(f[c_pg], line, "pg_db");
        if (c_cl && !f[*c_cl].empty())
            r.cluster_id = detail::parse_int(f[*c_cl], line, "cluster_id");
        if (c_kind && !f[*c_kind].empty())
            r.kind = detail::parse_kind(f[*c_kind], line);
        r.tau_ns = opt_double(c_tau, f, line, "tau_ns");
        r.aod_az = opt_double(c_daz, f, line, "aod_az");
        r.aod_el = opt_double(c_del, f, line, "aod_el");
        r.aoa_az = opt_double(c_aaz, f, line, "aoa_az");
        r.aoa_el = opt_double(c_ael, f, line, "aoa_el");
        r.phase_rad = opt_double(c_ph, f, line, "phase_rad");
        out.rows.push_back(r);
        out.lines.push_back(line);
    }
    return out;
}

/// Group rows into one sample list per receiver, ordered by rx_index.
inline std::vector<ChannelSamples> to_ensemble(const MpcTable &table)
{
    std::map<std::size_t, ChannelSamples> by_rx;
    for (const auto &r : table.rows)
        by_rx[r.rx_index].push_back({r.delay_abs_ns, r.pg_db});
    std::vector<ChannelSamples> out;
    out.reserve(by_rx.size());
    for (auto &[rx, s] : by_rx)
        out.push_back(std::move(s));
    return out;
}

/// Check emitted rows against the generator invariants. Returns one message per violation.
inline std::vector<std::string> validate_mpc_table(const MpcTable &table)
{
    std::vector<std::string> problems;
    auto report = [&](std::size_t i, const std::string &msg) {
        problems.push_back("line " + std::to_string(table.lines[i]) + ": " + msg);
    };
    constexpr double two_pi = 2.0 * std::numbers::pi;

    auto meta_int = [&](const char *key) -> std::optional<long long> {
        const auto it = table.meta.find(key);
        if (it == table.meta.end())
            return std::nullopt;
        long long v = 0;
        const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
        if (res.ec != std::errc())
            return std::nullopt;
        return v;
    };
    const auto model_it = table.meta.find("model");
    const std::string model = model_it == table.meta.end() ? "" : model_it->second;
    const auto prune_it = table.meta.find("prune_reference");
    const bool realized = prune_it == table.meta.end() || prune_it->second == "realized";
    const auto n_pre = meta_int("n_pre"), n_post = meta_int("n_post"), max_order = meta_int("max_order");

    std::optional<std::size_t> bound;
    if (n_pre && n_post && max_order) {
        const auto per = static_cast<std::size_t>(*n_pre + *n_post);
        const auto n = static_cast<std::size_t>(std::max<long long>(*max_order, 1));
        if (model == "drays_only")
            bound = 1;
        else if (model == "reduced")
            bound = n * per + 1;
        else if (model == "complete")
            bound = complete_model_bound(static_cast<int>(*n_pre), static_cast<int>(*n_post), static_cast<int>(n));
    }

    struct ClusterInfo {
        std::optional<std::size_t> cursor_row;
        std::vector<std::size_t> rows;
    };
    std::map<std::pair<std::size_t, long long>, ClusterInfo> clusters;

    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto &r = table.rows[i];
        if (r.tau_ns && *r.tau_ns < 0.0)
            report(i, "negative tau_ns");
        for (auto az : {r.aod_az, r.aoa_az})
            if (az && (*az < 0.0 || *az >= 360.0))
                report(i, "azimuth outside [0, 360)");
        for (auto el : {r.aod_el, r.aoa_el})
            if (el && (*el < 0.0 || *el > 180.0))
                report(i, "elevation outside [0, 180]");
        if (r.phase_rad && (*r.phase_rad < 0.0 || *r.phase_rad >= two_pi))
            report(i, "phase outside [0, 2pi)");
        if (r.kind == MpcKind::direct && r.tau_ns && *r.tau_ns != 0.0)
            report(i, "direct ray with nonzero tau");
        if (r.cluster_id && r.kind && *r.kind != MpcKind::direct) {
            auto &ci = clusters[{r.rx_index, *r.cluster_id}];
            if (*r.kind == MpcKind::cursor) {
                if (ci.cursor_row)
                    report(i, "cluster has more than one cursor");
                ci.cursor_row = i;
            }
            ci.rows.push_back(i);
        }
    }

    for (const auto &[key, ci] : clusters) {
        const std::string where =
            "rx " + std::to_string(key.first) + " cluster " + std::to_string(key.second) + ": ";
        if (!ci.cursor_row) {
            problems.push_back(where + "no cursor row");
            continue;
        }
        const auto &cur = table.rows[*ci.cursor_row];
        if (bound && ci.rows.size() > *bound)
            problems.push_back(where + std::to_string(ci.rows.size()) + " MPCs exceed bound " +
                               std::to_string(*bound));
        for (auto i : ci.rows) {
            const auto &r = table.rows[i];
            if (r.kind == MpcKind::cursor)
                continue;
            if (realized && !(r.pg_db < cur.pg_db))
                report(i, "diffuse MPC not below its cursor gain");
            if (r.tau_ns && cur.tau_ns) {
                if (r.kind == MpcKind::pre && !(*r.tau_ns < *cur.tau_ns))
                    report(i, "pre-cursor not before its cursor");
                if (r.kind == MpcKind::post && !(*r.tau_ns > *cur.tau_ns))
                    report(i, "post-cursor not after its cursor");
            }
        }
    }
    return problems;
}

// ------------------------------------------------------------------------
// CDF breakpoint files

inline void write_cdf(std::ostream &os, const EmpiricalCdf &cdf, std::string_view quantity)
{
    os << "# qdchan cdf v1\n# quantity: " << quantity << "\n# samples: " << cdf.size() << "\nvalue,cdf\n";
    for (const auto &[x, f] : cdf.breakpoints())
        os << format_double(x) << ',' << format_double(f) << "\n";
}

/// Rebuild the sample multiset from breakpoints and the recorded sample count.
inline EmpiricalCdf read_cdf(std::istream &in)
{
    const auto t = detail::read_csv(in);
    const auto it = t.meta.find("samples");
    if (it == t.meta.end())
        throw ParseError(0, "CDF file lacks '# samples:' header");
    const long long n = detail::parse_int(it->second, 0, "samples");
    if (n <= 0)
        throw ParseError(0, "CDF sample count must be > 0");
    const auto c_v = t.require("value"), c_f = t.require("cdf");
    std::vector<double> values;
    long long seen = 0;
    for (const auto &[line, f] : t.rows) {
        const double x = detail::parse_double(f[c_v], line, "value");
        const double F = detail::parse_double(f[c_f], line, "cdf");
        const long long upto = std::llround(F * static_cast<double>(n));
        if (upto <= seen || upto > n)
            throw ParseError(line, "CDF values must increase within (0, 1]");
        values.insert(values.end(), static_cast<std::size_t>(upto - seen), x);
        seen = upto;
    }
    if (seen != n)
        throw ParseError(0, "CDF does not reach 1");
    return EmpiricalCdf(std::move(values));
}

// ------------------------------------------------------------------------
// Batch runs

namespace detail {

/// Run fn(i) for i in [0, n) on up to `threads` workers; results land by index.
/// The first failing index (lowest) is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn)
{
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads ? threads : 1, n));
    std::vector<std::exception_ptr> errors(n);
    auto body = [&](std::size_t w) {
        for (std::size_t i = w; i < n; i += workers) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(body, w);
        for (auto &t : pool)
            t.join();
    }
    for (const auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

inline DRaySet load_drays_file(const ScenarioConfig &c)
{
    const auto path = c.drays_file.is_absolute() ? c.drays_file : c.base_dir / c.drays_file;
    std::ifstream in(path);
    if (!in)
        throw ConfigError("drays_file", "cannot open '" + path.string() + "'");
    return read_dray_table(in);
}

} // namespace detail

/// Trace every receiver position (or read the configured D-ray file) and attach deterministic gains.
inline DRaySet trace_all(const ScenarioConfig &c, const MaterialLibrary &library)
{
    if (!c.drays_file.empty())
        return detail::load_drays_file(c);
    const double lambda = wavelength(c.qd.carrier_hz);
    std::vector<std::vector<DRay>> per_rx(c.rx.size());
    detail::parallel_for(c.rx.size(), c.threads, [&](std::size_t i) {
        try {
            per_rx[i] = trace(c.room, c.tx, c.rx[i], c.qd.max_order, c.qd.carrier_hz);
        } catch (const GeometryError &e) {
            throw ConfigError("rx[" + std::to_string(i) + "]", e.what());
        }
        assign_deterministic_gains(per_rx[i], library, lambda);
    });
    DRaySet out;
    for (std::size_t i = 0; i < per_rx.size(); ++i)
        out[i] = std::move(per_rx[i]);
    return out;
}

/// One channel per receiver; receiver i draws from RngStream(seed, {i}).
inline std::map<std::size_t, ChannelInstance> generate_all(const ScenarioConfig &c, const MaterialLibrary &library,
                                                           const DRaySet &rays)
{
    std::vector<std::size_t> keys;
    for (const auto &[rx, list] : rays)
        keys.push_back(rx);
    std::vector<ChannelInstance> out(keys.size());
    detail::parallel_for(keys.size(), c.threads, [&](std::size_t i) {
        const auto &list = rays.at(keys[i]);
        out[i] = generate_channel(std::span<const DRay>(list), library, c.qd, RngStream(c.seed, {keys[i]}));
        if (c.drays_file.empty()) {
            out[i].tx = c.tx;
            out[i].rx = c.rx[keys[i]];
        }
    });
    std::map<std::size_t, ChannelInstance> result;
    for (std::size_t i = 0; i < keys.size(); ++i)
        result.emplace(keys[i], std::move(out[i]));
    return result;
}

inline void run_trace(const ScenarioConfig &c, std::ostream &out)
{
    const auto library = load_scenario_library(c);
    write_dray_table(out, trace_all(c, library), make_header("dray-table", c));
}

inline void run_generate(const ScenarioConfig &c, std::ostream &out)
{
    const auto library = load_scenario_library(c);
    const auto rays = trace_all(c, library);
    write_mpc_table(out, generate_all(c, library, rays), make_header("mpc-table", c));
}

/// Compare two MPC tables; writes cdf_{pg,delay,rmsds}_{sim,ref}.csv, report.txt
/// and report.json into out_dir (created if needed).
inline ComparisonReport run_compare(std::istream &sim_in, std::istream &ref_in, const CompareOptions &opt,
                                    const std::filesystem::path &out_dir)
{
    const auto sim = to_ensemble(read_mpc_table(sim_in));
    const auto ref = to_ensemble(read_mpc_table(ref_in));
    if (sim.empty())
        throw ParameterError("simulated table has no rows");
    if (ref.empty())
        throw ParameterError("reference table has no rows");
    const auto s = ensemble_stats(sim, opt.floor_db, "simulated");
    const auto r = ensemble_stats(ref, opt.floor_db, "reference");
    const auto report = compare_stats(s, r, opt.floor_db);

    std::filesystem::create_directories(out_dir);
    auto emit = [&](const std::string &name, const std::vector<double> &v, const char *quantity) {
        std::ofstream os(out_dir / name);
        write_cdf(os, EmpiricalCdf(v), quantity);
    };
    emit("cdf_pg_sim.csv", s.pg_db, "pg_db");
    emit("cdf_delay_sim.csv", s.delay_ns, "delay_abs_ns");
    emit("cdf_rmsds_sim.csv", s.rmsds_ns, "rms_delay_spread_ns");
    emit("cdf_pg_ref.csv", r.pg_db, "pg_db");
    emit("cdf_delay_ref.csv", r.delay_ns, "delay_abs_ns");
    emit("cdf_rmsds_ref.csv", r.rmsds_ns, "rms_delay_spread_ns");
    std::ofstream(out_dir / "report.txt") << to_text(report);
    std::ofstream(out_dir / "report.json") << to_json(report);
    return report;
}

} // namespace qdchan

#endif // QDCHAN_IO_HPP
