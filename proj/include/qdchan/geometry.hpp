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

#ifndef QDCHAN_GEOMETRY_HPP
#define QDCHAN_GEOMETRY_HPP

#include "qdchan/error.hpp"
#include "qdchan/materials.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qdchan {

inline constexpr double speed_of_light = 299792458.0; // m/s
inline constexpr double default_carrier_hz = 60.0e9;
inline constexpr int max_trace_order = 3;

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double &operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    friend Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Point3 operator*(double s, Point3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Point3 &, const Point3 &) = default;
};

inline double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Point3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Point3 a, Point3 b) { return norm(b - a); }

/// Six faces of an axis-aligned box; floor is z = 0, ceiling z = Lz.
enum class Face { x_min = 0, x_max, y_min, y_max, floor, ceiling };

inline constexpr std::array<Face, 6> all_faces{Face::x_min, Face::x_max, Face::y_min,
                                               Face::y_max, Face::floor, Face::ceiling};

inline const char *face_key(Face f)
{
    static constexpr const char *keys[] = {"x_min", "x_max", "y_min", "y_max", "floor", "ceiling"};
    return keys[static_cast<int>(f)];
}

inline int face_axis(Face f) { return static_cast<int>(f) / 2; }
inline bool face_is_max(Face f) { return static_cast<int>(f) % 2 == 1; }

/// Empty axis-aligned box room with origin at one corner.
struct Room {
    std::array<double, 3> dimensions{}; // Lx, Ly, Lz in metres
    std::array<std::string, 6> face_materials{};

    double plane(Face f) const { return face_is_max(f) ? dimensions[face_axis(f)] : 0.0; }
    const std::string &material(Face f) const { return face_materials[static_cast<int>(f)]; }

    void validate() const
    {
        for (int i = 0; i < 3; ++i)
            if (!(dimensions[i] > 0.0) || !std::isfinite(dimensions[i]))
                throw GeometryError("room dimensions must be finite and > 0");
        for (auto f : all_faces)
            if (material(f).empty())
                throw GeometryError(std::string("room face '") + face_key(f) + "' has no material");
    }

    bool strictly_contains(Point3 p) const
    {
        for (int i = 0; i < 3; ++i)
            if (!(p[i] > 0.0 && p[i] < dimensions[i]))
                return false;
        return true;
    }
};

/// Deterministic (specular) ray. Delays in ns, angles in degrees, gain in dB.
struct DRay {
    int order = 0;
    double delay_abs_ns = 0.0;
    double tau_ns = 0.0;
    double path_length_m = 0.0;
    double pg_det_db = 0.0;
    double aod_az = 0.0, aod_el = 0.0, aoa_az = 0.0, aoa_el = 0.0;
    std::vector<std::string> materials;
    std::vector<Point3> bounce_points; // empty for ingested rays
    std::vector<Face> faces;           // empty for ingested rays
};

inline double wavelength(double carrier_hz)
{
    if (!(carrier_hz > 0.0))
        throw ParameterError("carrier frequency must be > 0");
    return speed_of_light / carrier_hz;
}

inline double wrap_azimuth(double deg)
{
    double a = std::fmod(deg, 360.0);
    if (a < 0.0)
        a += 360.0;
    return a >= 360.0 ? 0.0 : a;
}

// Mirror at the poles: 182 -> 178, -3 -> 3
inline double fold_elevation(double deg)
{
    double a = std::fmod(deg, 360.0);
    if (a < 0.0)
        a += 360.0;
    if (a > 180.0)
        a = 360.0 - a;
    return a;
}

struct Angles {
    double az = 0.0; // [0, 360)
    double el = 0.0; // polar angle from +z, [0, 180]
};

/// Direction from a towards b. At the poles azimuth is 0.
inline Angles compute_angles(Point3 a, Point3 b)
{
    const Point3 d = b - a;
    const double r = norm(d);
    if (!(r > 0.0))
        throw GeometryError("compute_angles: coincident points");
    constexpr double rad2deg = 180.0 / std::numbers::pi;
    Angles out;
    out.az = (d.x == 0.0 && d.y == 0.0) ? 0.0 : wrap_azimuth(std::atan2(d.y, d.x) * rad2deg);
    out.el = std::acos(std::clamp(d.z / r, -1.0, 1.0)) * rad2deg;
    return out;
}

/// Friis free-space path gain 20 log10(lambda / (4 pi l)).
inline double free_space_gain_db(double path_length_m, double lambda_m)
{
    if (!(path_length_m > 0.0) || !(lambda_m > 0.0))
        throw ParameterError("free_space_gain_db: path length and wavelength must be > 0");
    return 20.0 * std::log10(lambda_m / (4.0 * std::numbers::pi * path_length_m));
}

/// Free-space gain minus the mean reflection loss of every bounce material.
inline double deterministic_gain_db(const DRay &ray, const MaterialLibrary &library, double lambda_m)
{
    double g = free_space_gain_db(ray.path_length_m, lambda_m);
    for (const auto &name : ray.materials)
        g -= resolve(library, name).mu_rl_db;
    return g;
}

inline void assign_deterministic_gains(std::span<DRay> rays, const MaterialLibrary &library, double lambda_m)
{
    for (auto &r : rays)
        r.pg_det_db = deterministic_gain_db(r, library, lambda_m);
}

inline Point3 mirror(const Room &room, Point3 p, Face f)
{
    const int ax = face_axis(f);
    p[ax] = 2.0 * room.plane(f) - p[ax];
    return p;
}

namespace detail {

// Unfold rx -> images back onto the faces; false if any bounce misses its face.
inline bool backtrack_bounces(const Room &room, std::span<const Face> faces, std::span<const Point3> images,
                              Point3 rx, std::vector<Point3> &bounces)
{
    constexpr double tol = 1e-9;
    const std::size_t n = faces.size();
    bounces.assign(n, Point3{});
    Point3 target = rx;
    for (std::size_t k = n; k-- > 0;) {
        const Face f = faces[k];
        const int ax = face_axis(f);
        const Point3 img = images[k + 1];
        const double denom = img[ax] - target[ax];
        if (denom == 0.0)
            return false;
        const double t = (room.plane(f) - target[ax]) / denom;
        if (!(t > tol && t < 1.0 - tol))
            return false;
        Point3 p = target + t * (img - target);
        for (int i = 0; i < 3; ++i) {
            if (i == ax)
                continue;
            const double L = room.dimensions[i];
            if (p[i] < -tol * L || p[i] > L * (1.0 + tol))
                return false;
            p[i] = std::clamp(p[i], 0.0, L);
        }
        p[ax] = room.plane(f);
        bounces[k] = p;
        target = p;
    }
    return true;
}

inline void trace_recursive(const Room &room, Point3 tx, Point3 rx, double t_dir_ns, double lambda_m, int max_order,
                            std::vector<Face> &faces, std::vector<Point3> &images, std::vector<DRay> &out)
{
    if (static_cast<int>(faces.size()) == max_order)
        return;
    for (Face f : all_faces) {
        if (!faces.empty() && faces.back() == f)
            continue;
        faces.push_back(f);
        images.push_back(mirror(room, images.back(), f));

        std::vector<Point3> bounces;
        if (backtrack_bounces(room, faces, images, rx, bounces)) {
            DRay r;
            r.order = static_cast<int>(faces.size());
            r.path_length_m = distance(images.back(), rx);
            r.delay_abs_ns = r.path_length_m / speed_of_light * 1e9;
            r.tau_ns = r.delay_abs_ns - t_dir_ns;
            r.pg_det_db = free_space_gain_db(r.path_length_m, lambda_m);
            const Angles dep = compute_angles(tx, bounces.front());
            const Angles arr = compute_angles(rx, bounces.back());
            r.aod_az = dep.az;
            r.aod_el = dep.el;
            r.aoa_az = arr.az;
            r.aoa_el = arr.el;
            r.faces = faces;
            r.bounce_points = std::move(bounces);
            for (Face bf : faces)
                r.materials.push_back(room.material(bf));
            out.push_back(std::move(r));
        }
        trace_recursive(room, tx, rx, t_dir_ns, lambda_m, max_order, faces, images, out);

        faces.pop_back();
        images.pop_back();
    }
}

} // namespace detail

/// Method-of-images tracer. Returns the direct ray first, then every valid
/// specular path up to `max_order` bounces, grouped by order (within an order,
/// face sequences in lexicographic enum order; no face repeated on consecutive bounces).
/// pg_det_db holds the free-space term only; see assign_deterministic_gains.
/// AoA is the direction from rx back towards the last bounce (or tx).
inline std::vector<DRay> trace(const Room &room, Point3 tx, Point3 rx, int max_order,
                               double carrier_hz = default_carrier_hz)
{
    room.validate();
    if (max_order < 0 || max_order > max_trace_order)
        throw GeometryError("trace: max_order must be in [0, " + std::to_string(max_trace_order) + "]");
    if (!room.strictly_contains(tx))
        throw GeometryError("trace: tx is not strictly inside the room");
    if (!room.strictly_contains(rx))
        throw GeometryError("trace: rx is not strictly inside the room");
    if (tx == rx)
        throw GeometryError("trace: tx and rx coincide");

    const double lambda_m = wavelength(carrier_hz);
    std::vector<DRay> out;

    DRay direct;
    direct.path_length_m = distance(tx, rx);
    direct.delay_abs_ns = direct.path_length_m / speed_of_light * 1e9;
    direct.tau_ns = 0.0;
    direct.pg_det_db = free_space_gain_db(direct.path_length_m, lambda_m);
    const Angles dep = compute_angles(tx, rx);
    const Angles arr = compute_angles(rx, tx);
    direct.aod_az = dep.az;
    direct.aod_el = dep.el;
    direct.aoa_az = arr.az;
    direct.aoa_el = arr.el;
    const double t_dir_ns = direct.delay_abs_ns;
    out.push_back(std::move(direct));

    std::vector<Face> faces;
    std::vector<Point3> images{tx};
    detail::trace_recursive(room, tx, rx, t_dir_ns, lambda_m, max_order, faces, images, out);
    std::stable_sort(out.begin(), out.end(), [](const DRay &a, const DRay &b) { return a.order < b.order; });
    return out;
}

} // namespace qdchan

#endif // QDCHAN_GEOMETRY_HPP
