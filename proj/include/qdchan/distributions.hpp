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

#ifndef QDCHAN_DISTRIBUTIONS_HPP
#define QDCHAN_DISTRIBUTIONS_HPP

#include "qdchan/error.hpp"

#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace qdchan {

namespace detail {

// SplitMix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

} // namespace detail

/// Counter-based random stream addressed by a seed and a derivation path.
///
/// The output sequence is a pure function of (seed, path): the path is hashed
/// into a pair of keys and the n-th draw is a keyed mix of n. Child streams
/// extend the path, so the draws consumed by one child never shift another.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::vector<std::uint64_t> path = {})
        : seed_(seed), path_(std::move(path))
    {
        rekey();
    }

    RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
        : RngStream(seed, std::vector<std::uint64_t>(path)) {}

    [[nodiscard]] RngStream child(std::uint64_t index) const
    {
        auto p = path_;
        p.push_back(index);
        return RngStream(seed_, std::move(p));
    }

    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<std::uint64_t> &path() const noexcept { return path_; }
    std::uint64_t draws() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept
    {
        ++counter_;
        const std::uint64_t x = detail::mix64(key_ + counter_ * detail::golden_gamma);
        return detail::mix64(x ^ key2_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1).
    double next_open_unit() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

private:
    void rekey() noexcept
    {
        std::uint64_t k = detail::mix64(seed_ ^ 0x6a09e667f3bcc908ULL);
        for (const auto p : path_)
            k = detail::mix64(k ^ detail::mix64(p + detail::golden_gamma));
        key_ = k;
        key2_ = detail::mix64(k ^ 0xbb67ae8584caa73bULL);
    }

    std::uint64_t seed_;
    std::vector<std::uint64_t> path_;
    std::uint64_t key_ = 0;
    std::uint64_t key2_ = 0;
    std::uint64_t counter_ = 0;
};

/// Anything that yields uniform doubles on [0,1) and (0,1). Tests plug in scripted sources.
template <class G>
concept UnitSource = requires(G &g) {
    { g.next_unit() } -> std::convertible_to<double>;
    { g.next_open_unit() } -> std::convertible_to<double>;
};

namespace detail {

inline void require(bool ok, const char *what)
{
    if (!ok)
        throw ParameterError(what);
}

} // namespace detail

// Box-Muller, one variate per pair of uniforms
template <UnitSource G>
double sample_normal(G &rng, double mu, double sigma)
{
    detail::require(sigma >= 0.0, "sample_normal: sigma must be >= 0");
    const double u1 = rng.next_open_unit();
    const double u2 = rng.next_unit();
    if (sigma == 0.0)
        return mu;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mu + sigma * z;
}

/// Rician variate sqrt(Y^2 + Z^2), Y ~ N(s, sigma^2), Z ~ N(0, sigma^2).
/// sigma == 0 returns s exactly.
template <UnitSource G>
double sample_rician(G &rng, double s, double sigma)
{
    detail::require(s >= 0.0, "sample_rician: s must be >= 0");
    detail::require(sigma >= 0.0, "sample_rician: sigma must be >= 0");
    const double y = sample_normal(rng, s, sigma);
    const double z = sample_normal(rng, 0.0, sigma);
    if (sigma == 0.0)
        return s;
    return std::hypot(y, z);
}

/// Laplace variate with the given mean and variance (scale b = sqrt(variance / 2)).
template <UnitSource G>
double sample_laplacian(G &rng, double mu, double variance)
{
    detail::require(variance >= 0.0, "sample_laplacian: variance must be >= 0");
    const double v = rng.next_open_unit() - 0.5;
    if (variance == 0.0)
        return mu;
    const double b = std::sqrt(variance / 2.0);
    const double mag = -b * std::log1p(-2.0 * std::abs(v));
    return v < 0.0 ? mu - mag : mu + mag;
}

// Inverse CDF; the open unit keeps the result strictly positive
template <UnitSource G>
double sample_exponential(G &rng, double lambda)
{
    detail::require(lambda > 0.0, "sample_exponential: lambda must be > 0");
    return -std::log(rng.next_open_unit()) / lambda;
}

template <UnitSource G>
double sample_uniform(G &rng, double a, double b)
{
    detail::require(a <= b, "sample_uniform: a must be <= b");
    const double u = rng.next_unit();
    const double x = a + (b - a) * u;
    return x > b ? b : x;
}

} // namespace qdchan

#endif // QDCHAN_DISTRIBUTIONS_HPP
