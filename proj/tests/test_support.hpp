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

// Test-only oracles shared by the unit and acceptance suites. Nothing here
// calls into the code paths it is used to check.

#ifndef QDCHAN_TEST_SUPPORT_HPP
#define QDCHAN_TEST_SUPPORT_HPP

#include "qdchan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace qdchan::test {

struct Moments {
    double mean = 0.0;
    double variance = 0.0; // population (1/n)
    double m4 = 0.0;       // fourth central moment
    std::size_t n = 0;

    double se_mean() const { return std::sqrt(variance / static_cast<double>(n)); }
    double se_variance() const { return std::sqrt(std::max(m4 - variance * variance, 0.0) / static_cast<double>(n)); }
};

inline Moments moments(const std::vector<double> &x)
{
    Moments m;
    m.n = x.size();
    for (double v : x)
        m.mean += v;
    m.mean /= static_cast<double>(m.n);
    for (double v : x) {
        const double d = v - m.mean;
        m.variance += d * d;
        m.m4 += d * d * d * d;
    }
    m.variance /= static_cast<double>(m.n);
    m.m4 /= static_cast<double>(m.n);
    return m;
}

/// Closed-form Rician mean: sigma sqrt(pi/2) L_{1/2}(-s^2 / 2 sigma^2).
inline double rician_mean(double s, double sigma)
{
    const double x = -s * s / (2.0 * sigma * sigma);
    const double laguerre =
        std::exp(x / 2.0) * ((1.0 - x) * std::cyl_bessel_i(0.0, -x / 2.0) - x * std::cyl_bessel_i(1.0, -x / 2.0));
    return sigma * std::sqrt(std::numbers::pi / 2.0) * laguerre;
}

inline double rician_variance(double s, double sigma)
{
    const double mu = rician_mean(s, sigma);
    return 2.0 * sigma * sigma + s * s - mu * mu;
}

/// One-sample Kolmogorov distance of x against a continuous CDF.
template <class Cdf>
double ks_one_sample(std::vector<double> x, Cdf cdf)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    return d;
}

/// Two-sample KS by brute force over a uniform grid of points+1 values spanning both samples.
inline double ks_grid(const std::vector<double> &a, const std::vector<double> &b, std::size_t points)
{
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double lo = std::min(sa.front(), sb.front());
    const double hi = std::max(sa.back(), sb.back());
    auto Fs = [](const std::vector<double> &v, double x) {
        return static_cast<double>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) /
               static_cast<double>(v.size());
    };
    double d = 0.0;
    for (std::size_t i = 0; i <= points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points);
        d = std::max(d, std::abs(Fs(sa, x) - Fs(sb, x)));
    }
    return d;
}

/// Straight-line Friis gain 20 log10(c / (f 4 pi d)).
inline double friis_db(double distance_m, double carrier_hz)
{
    const double lambda = 299792458.0 / carrier_hz;
    return 10.0 * std::log10(std::pow(lambda / (4.0 * std::numbers::pi * distance_m), 2.0));
}

inline Room box(double lx, double ly, double lz)
{
    Room r;
    r.dimensions = {lx, ly, lz};
    r.face_materials = {"Left Wall (TX2)", "Right Wall (TX1)", "Bottom Wall (TX3)",
                        "Top Wall (TX1)",  "Floor",            "Ceiling (TX1)"};
    return r;
}

inline Point3 unit_normal(Face f)
{
    Point3 n;
    n[face_axis(f)] = 1.0;
    return n;
}

inline Point3 normalized(Point3 p) { return (1.0 / norm(p)) * p; }

// Minimise |tx - p| + |p - rx| over the face rectangle by successive grid refinement.
// The window shrinks 4x per level and keeps +-12 cells, wide enough for the
// elongated valleys of grazing paths.
inline double grid_min_path(const Room &room, Face f, Point3 tx, Point3 rx)
{
    const int ax = face_axis(f);
    const int u = (ax + 1) % 3, v = (ax + 2) % 3;
    double lo_u = 0.0, hi_u = room.dimensions[u], lo_v = 0.0, hi_v = room.dimensions[v];
    double best = 1e300, bu = 0.0, bv = 0.0;
    constexpr int steps = 100;
    for (int level = 0; level < 32; ++level) {
        for (int i = 0; i <= steps; ++i) {
            for (int j = 0; j <= steps; ++j) {
                Point3 p;
                p[ax] = room.plane(f);
                p[u] = lo_u + (hi_u - lo_u) * i / steps;
                p[v] = lo_v + (hi_v - lo_v) * j / steps;
                const double d = distance(tx, p) + distance(p, rx);
                if (d < best) {
                    best = d;
                    bu = p[u];
                    bv = p[v];
                }
            }
        }
        const double wu = (hi_u - lo_u) / 8.0, wv = (hi_v - lo_v) / 8.0;
        lo_u = std::max(0.0, bu - wu);
        hi_u = std::min(room.dimensions[u], bu + wu);
        lo_v = std::max(0.0, bv - wv);
        hi_v = std::min(room.dimensions[v], bv + wv);
    }
    return best;
}

} // namespace qdchan::test

#endif // QDCHAN_TEST_SUPPORT_HPP
