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

#include "qdchan/qd_core.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qdchan;

namespace {

DRay make_ray(std::vector<std::string> materials, double tau = 25.0, double pg = -85.0)
{
    DRay r;
    r.order = static_cast<int>(materials.size());
    r.materials = std::move(materials);
    r.tau_ns = tau;
    r.delay_abs_ns = 30.0 + tau;
    r.path_length_m = r.delay_abs_ns * 1e-9 * speed_of_light;
    r.pg_det_db = pg;
    r.aod_az = 45.0;
    r.aod_el = 80.0;
    r.aoa_az = 300.0;
    r.aoa_el = 100.0;
    return r;
}

MaterialLibrary library_with_floor()
{
    auto lib = lecture_room_library();
    lib.set_fallback("Floor", "Ceiling (TX1)");
    return lib;
}

MaterialParams pinned_material()
{
    MaterialParams m;
    m.name = "Pinned";
    m.k_pre = m.k_post = {5.0, 0.0};
    m.gamma_pre = m.gamma_post = {0.5, 0.0};
    m.sigma_s_pre = m.sigma_s_post = {0.0, 0.0};
    m.lambda_pre = m.lambda_post = {1.0, 0.0};
    m.rl = {6.0, 0.0};
    m.mu_rl_db = 6.0;
    return m;
}

void expect_cluster_invariants(const Cluster &c)
{
    EXPECT_EQ(c.cursor.tau_ns, c.dray.tau_ns);
    double last = c.cursor.tau_ns;
    for (const auto &m : c.pre) {
        EXPECT_EQ(m.kind, MpcKind::pre);
        EXPECT_LT(m.tau_ns, last);
        EXPECT_GE(m.tau_ns, 0.0);
        last = m.tau_ns;
    }
    last = c.cursor.tau_ns;
    for (const auto &m : c.post) {
        EXPECT_EQ(m.kind, MpcKind::post);
        EXPECT_GT(m.tau_ns, last);
        last = m.tau_ns;
    }
    for (const auto *list : {&c.pre, &c.post}) {
        for (const auto &m : *list) {
            EXPECT_LT(m.pg_db, c.comparison_db);
            EXPECT_GE(m.aod_az, 0.0);
            EXPECT_LT(m.aod_az, 360.0);
            EXPECT_GE(m.aoa_az, 0.0);
            EXPECT_LT(m.aoa_az, 360.0);
            EXPECT_GE(m.aod_el, 0.0);
            EXPECT_LE(m.aod_el, 180.0);
            EXPECT_GE(m.aoa_el, 0.0);
            EXPECT_LE(m.aoa_el, 180.0);
            EXPECT_GE(m.phase_rad, 0.0);
            EXPECT_LT(m.phase_rad, 2.0 * std::numbers::pi);
        }
    }
}

bool same_cluster(const Cluster &a, const Cluster &b)
{
    return a.cursor == b.cursor && a.pre == b.pre && a.post == b.post && a.realized_pg0_db == b.realized_pg0_db &&
           a.comparison_db == b.comparison_db;
}

} // namespace

TEST(CursorGain, ZeroResidualKeepsDeterministicGain)
{
    MaterialParams m = pinned_material();
    RngStream r(1);
    const std::vector<MaterialParams> mats{m, m};
    const auto g = realize_cursor_gain(-70.0, std::span<const MaterialParams>(mats), r);
    EXPECT_EQ(g.pg0_db, -70.0);
    EXPECT_EQ(g.rl_residuals_db, (std::vector<double>{0.0, 0.0}));
}

TEST(CursorGain, OrderZeroDrawsNothing)
{
    RngStream r(1);
    const auto g = realize_cursor_gain(-60.0, std::span<const MaterialParams>(), r);
    EXPECT_EQ(g.pg0_db, -60.0);
    EXPECT_TRUE(g.rl_residuals_db.empty());
    EXPECT_EQ(r.draws(), 0u);
}

TEST(CursorGain, ResidualDistributionMatchesOracle)
{
    const auto left = *lecture_room_library().find("Left Wall (TX2)");
    std::mt19937_64 eng(99);
    std::normal_distribution<double> y(9.8412, 3.4424), z(0.0, 3.4424);
    double oracle = 0.0;
    constexpr int n = 100000;
    for (int i = 0; i < 1000000; ++i) {
        const double a = y(eng), b = z(eng);
        oracle += std::sqrt(a * a + b * b) - 10.7;
    }
    oracle /= 1e6;

    RngStream r(2);
    double mean = 0.0;
    for (int i = 0; i < n; ++i)
        mean += -70.0 - realize_cursor_gain(-70.0, std::span<const MaterialParams>(&left, 1), r).pg0_db;
    mean /= n;
    EXPECT_NEAR(mean, oracle, 0.05);
}

TEST(Arrivals, MonotoneAndPruned)
{
    const auto lib = lecture_room_library();
    const auto &ceiling = *lib.find("Ceiling (TX1)");
    for (std::uint64_t s = 0; s < 200; ++s) {
        RngStream r(s);
        const double tau0 = 0.5 + 0.02 * static_cast<double>(s);
        const auto post = generate_arrivals(tau0, ceiling, CursorSide::post, 16, r);
        const auto pre = generate_arrivals(tau0, ceiling, CursorSide::pre, 3, r);
        EXPECT_LE(post.size(), 16u);
        EXPECT_LE(pre.size(), 3u);
        double last = tau0;
        for (double t : post) {
            EXPECT_GT(t, last);
            last = t;
        }
        last = tau0;
        for (double t : pre) {
            EXPECT_LT(t, last);
            EXPECT_GE(t, 0.0);
            last = t;
        }
    }
}

TEST(Arrivals, BoundaryAndDisabled)
{
    const auto lib = lecture_room_library();
    RngStream r(3);
    EXPECT_TRUE(generate_arrivals(0.0, *lib.find("Ceiling (TX1)"), CursorSide::pre, 3, r).empty());
    EXPECT_TRUE(generate_arrivals(10.0, *lib.find("Right Wall (TX1)"), CursorSide::pre, 3, r).empty());
    EXPECT_EQ(generate_arrivals(10.0, *lib.find("Right Wall (TX1)"), CursorSide::post, 16, r).size(), 16u);
    EXPECT_THROW(generate_arrivals(-1.0, *lib.find("Ceiling (TX1)"), CursorSide::post, 3, r), ParameterError);

    MaterialParams zero_rate = pinned_material();
    zero_rate.lambda_post = {0.0, 0.0};
    EXPECT_TRUE(generate_arrivals(10.0, zero_rate, CursorSide::post, 16, r).empty());
}

TEST(Arrivals, SixteenUnitRateGapsAverageSixteenNs)
{
    const MaterialParams m = pinned_material(); // lambda = 1 / ns exactly
    RngStream root(4);
    double sum = 0.0;
    constexpr int clusters = 10000;
    for (int i = 0; i < clusters; ++i) {
        auto r = root.child(static_cast<std::uint64_t>(i));
        const auto post = generate_arrivals(7.0, m, CursorSide::post, 16, r);
        ASSERT_EQ(post.size(), 16u);
        sum += post.back() - 7.0;
    }
    EXPECT_NEAR(sum / clusters, 16.0, 0.5);
}

TEST(CursorPowers, PinnedDrawsMatchIndependentFormula)
{
    const MaterialParams m = pinned_material();
    RngStream r(5);
    const double pg0 = -80.0, tau0 = 20.0;
    const std::vector<double> taus{20.0, 21.0, 22.5};
    const auto taps = generate_cursor_powers(pg0, tau0, taus, m, CursorSide::post, pg0, r);
    ASSERT_EQ(taps.size(), 3u);
    EXPECT_EQ(taps[0].pg_db, pg0 - 5.0);
    // 10 log10(e) * |dtau| / gamma = (20 / ln 10) for |dtau| = 1, gamma = 0.5
    EXPECT_NEAR(taps[1].pg_db, pg0 - 5.0 - 20.0 / std::log(10.0), 1e-9);
    EXPECT_NEAR(taps[1].pg_db, pg0 - 5.0 - 8.6859, 1e-4);
    EXPECT_NEAR(taps[2].pg_db, pg0 - 5.0 - 10.0 * std::log10(std::exp(5.0)), 1e-9);
    EXPECT_NEAR(diffuse_gain_db(0.0, 5.0, 0.5, 1.0, 0.0, 0.0), -5.0 - 10.0 * std::log10(std::exp(1.0)) * 2.0, 1e-9);
    EXPECT_NEAR(diffuse_gain_db(0.0, 0.0, 1.0, 3.0, 3.0, 0.25), 10.0 * std::log10(std::exp(0.25)), 1e-12);
}

TEST(CursorPowers, PruningAndZeroGamma)
{
    const auto lib = lecture_room_library();
    const auto &top = *lib.find("Top Wall (TX1)");
    for (std::uint64_t s = 0; s < 500; ++s) {
        RngStream r(s);
        const std::vector<double> taus{10.0, 10.2, 11.0, 15.0};
        const double cmp = -95.0;
        for (const auto &t : generate_cursor_powers(-90.0, 10.0, taus, top, CursorSide::pre, cmp, r))
            EXPECT_LT(t.pg_db, cmp);
    }
    MaterialParams m = pinned_material();
    m.gamma_post = {0.0, 0.0};
    RngStream r(1);
    const std::vector<double> taus{1.0};
    EXPECT_TRUE(generate_cursor_powers(-50.0, 0.5, taus, m, CursorSide::post, -50.0, r).empty());
}

TEST(CursorAngles, ZeroSpreadAndRanges)
{
    MaterialParams m = pinned_material();
    RngStream r(6);
    const AngleSet base{359.0, 179.0, 0.5, 1.0};
    for (const auto &a : generate_cursor_angles(base, m, 5, r)) {
        EXPECT_EQ(a.aod_az, base.aod_az);
        EXPECT_EQ(a.aod_el, base.aod_el);
        EXPECT_EQ(a.aoa_az, base.aoa_az);
        EXPECT_EQ(a.aoa_el, base.aoa_el);
    }
    m.sigma_alpha_az = {30.0, 10.0};
    m.sigma_alpha_el = {30.0, 10.0};
    for (const auto &a : generate_cursor_angles(base, m, 5000, r)) {
        ASSERT_GE(a.aod_az, 0.0);
        ASSERT_LT(a.aod_az, 360.0);
        ASSERT_GE(a.aoa_az, 0.0);
        ASSERT_LT(a.aoa_az, 360.0);
        ASSERT_GE(a.aod_el, 0.0);
        ASSERT_LE(a.aod_el, 180.0);
        ASSERT_GE(a.aoa_el, 0.0);
        ASSERT_LE(a.aoa_el, 180.0);
    }
}

TEST(FirstOrder, DisabledFamiliesGiveCursorOnly)
{
    const auto lib = library_with_floor();
    const auto c = generate_cluster_first_order(make_ray({"Floor"}), lib, QdConfig{}, RngStream(1));
    EXPECT_EQ(c.size(), 1u);
    EXPECT_EQ(c.cursor.kind, MpcKind::cursor);
}

TEST(FirstOrder, CountsDeterminismAndInvariants)
{
    const auto lib = library_with_floor();
    for (const auto &name : {"Left Wall (TX2)", "Bottom Wall (TX3)", "Right Wall (TX1)", "Top Wall (TX1)",
                             "Tables (TX1)", "Ceiling (TX1)"}) {
        for (std::uint64_t s = 0; s < 200; ++s) {
            const auto ray = make_ray({name}, 0.3 + 0.1 * static_cast<double>(s));
            const auto c = generate_cluster_first_order(ray, lib, QdConfig{}, RngStream(s, {1}));
            EXPECT_LE(c.pre.size(), 3u);
            EXPECT_LE(c.post.size(), 16u);
            expect_cluster_invariants(c);
            const auto again = generate_cluster_first_order(ray, lib, QdConfig{}, RngStream(s, {1}));
            EXPECT_TRUE(same_cluster(c, again));
        }
    }
    EXPECT_THROW(generate_cluster_first_order(make_ray({"Ceiling (TX1)", "Floor"}), lib, QdConfig{}, RngStream(1)),
                 ParameterError);
    EXPECT_THROW(generate_cluster_first_order(make_ray({"Unobtainium"}), lib, QdConfig{}, RngStream(1)),
                 LookupError);
}

TEST(Reduced, SingleBounceEqualsFirstOrder)
{
    const auto lib = library_with_floor();
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto ray = make_ray({"Ceiling (TX1)"});
        EXPECT_TRUE(same_cluster(generate_cluster_reduced(ray, lib, QdConfig{}, RngStream(s)),
                                 generate_cluster_first_order(ray, lib, QdConfig{}, RngStream(s))));
    }
}

TEST(Reduced, SecondOrderBoundAndAnchoring)
{
    const auto lib = library_with_floor();
    std::size_t max_seen = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto ray = make_ray({"Left Wall (TX2)", "Ceiling (TX1)"}, 15.0);
        const auto c = generate_cluster_reduced(ray, lib, QdConfig{}, RngStream(s));
        EXPECT_LE(c.size(), 39u);
        max_seen = std::max(max_seen, c.size());
        expect_cluster_invariants(c);
    }
    EXPECT_GT(max_seen, 20u); // both families contribute
}

TEST(Reduced, DeterministicPruneReference)
{
    const auto lib = library_with_floor();
    QdConfig cfg;
    cfg.prune_reference = PruneReference::deterministic;
    for (std::uint64_t s = 0; s < 300; ++s) {
        const auto ray = make_ray({"Top Wall (TX1)", "Bottom Wall (TX3)"});
        const auto c = generate_cluster_reduced(ray, lib, cfg, RngStream(s));
        EXPECT_EQ(c.comparison_db, ray.pg_det_db);
        expect_cluster_invariants(c);
    }
}

TEST(Complete, SingleBounceEqualsFirstOrder)
{
    const auto lib = library_with_floor();
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto ray = make_ray({"Top Wall (TX1)"});
        EXPECT_TRUE(same_cluster(generate_cluster_complete(ray, lib, QdConfig{}, RngStream(s)),
                                 generate_cluster_first_order(ray, lib, QdConfig{}, RngStream(s))));
    }
}

TEST(Complete, SecondOrderBound)
{
    const auto lib = library_with_floor();
    std::size_t max_seen = 0;
    for (std::uint64_t s = 0; s < 300; ++s) {
        const auto ray = make_ray({"Ceiling (TX1)", "Bottom Wall (TX3)"}, 12.0);
        const auto c = generate_cluster_complete(ray, lib, QdConfig{}, RngStream(s));
        EXPECT_LE(c.size(), 400u);
        max_seen = std::max(max_seen, c.size());
        expect_cluster_invariants(c);
        EXPECT_EQ(c.cursor.pg_db, c.realized_pg0_db);
    }
    EXPECT_GT(max_seen, 39u); // grows beyond the reduced bound
}

TEST(Complete, DisabledFamiliesKeepOnlySpecular)
{
    const auto lib = library_with_floor();
    const auto c = generate_cluster_complete(make_ray({"Floor", "Floor", "Floor"}), lib, QdConfig{}, RngStream(3));
    EXPECT_EQ(c.size(), 1u);
}

TEST(Complete, CapIsEnforced)
{
    const auto lib = library_with_floor();
    QdConfig cfg;
    cfg.max_complete_mpcs = 400;
    EXPECT_NO_THROW(generate_cluster_complete(make_ray({"Floor", "Ceiling (TX1)"}), lib, cfg, RngStream(1)));
    EXPECT_THROW(generate_cluster_complete(make_ray({"Floor", "Ceiling (TX1)", "Floor"}), lib, cfg, RngStream(1)),
                 ResourceError);
    EXPECT_EQ(complete_model_bound(3, 16, 2), 400u);
    EXPECT_EQ(complete_model_bound(3, 16, 3), 8000u);
}

TEST(Clusters, ParametersFreshPerCluster)
{
    const auto lib = library_with_floor();
    const auto ray = make_ray({"Left Wall (TX2)"});
    RngStream root(8);
    const auto a = generate_cluster_first_order(ray, lib, QdConfig{}, root.child(0));
    const auto b = generate_cluster_first_order(ray, lib, QdConfig{}, root.child(1));
    EXPECT_NE(a.realized_pg0_db, b.realized_pg0_db);
    ASSERT_FALSE(a.post.empty());
    ASSERT_FALSE(b.post.empty());
    EXPECT_NE(a.post.front().tau_ns, b.post.front().tau_ns);
    EXPECT_NE(a.post.front().pg_db, b.post.front().pg_db);
}

TEST(Clusters, PhasesAreUniform)
{
    const auto lib = library_with_floor();
    std::vector<double> phases;
    for (std::uint64_t s = 0; phases.size() < 10000; ++s) {
        const auto c = generate_cluster_first_order(make_ray({"Ceiling (TX1)"}), lib, QdConfig{}, RngStream(s));
        EXPECT_EQ(c.cursor.phase_rad, 0.0);
        for (const auto *l : {&c.pre, &c.post})
            for (const auto &m : *l)
                phases.push_back(m.phase_rad);
    }
    const double two_pi = 2.0 * std::numbers::pi;
    EXPECT_LT(test::ks_one_sample(phases, [&](double x) { return x / two_pi; }), 0.02);
}

TEST(Channel, DraysOnlyHasSingleMpcClusters)
{
    Room room;
    room.dimensions = {10, 19, 3};
    room.face_materials = {"Left Wall (TX2)", "Right Wall (TX1)", "Bottom Wall (TX3)",
                           "Top Wall (TX1)",  "Floor",            "Ceiling (TX1)"};
    QdConfig cfg;
    cfg.variant = ModelVariant::drays_only;
    cfg.max_order = 1;
    const auto ch = generate_channel(room, {2, 3, 2.5}, {5, 9, 1.5}, library_with_floor(), cfg, RngStream(1));
    ASSERT_TRUE(ch.direct);
    EXPECT_EQ(ch.direct->tau_ns, 0.0);
    EXPECT_EQ(ch.direct->phase_rad, 0.0);
    EXPECT_EQ(ch.direct->kind, MpcKind::direct);
    EXPECT_NEAR(ch.direct->pg_db, free_space_gain_db(distance({2, 3, 2.5}, {5, 9, 1.5}), wavelength(60e9)), 1e-12);
    EXPECT_EQ(ch.clusters.size(), 6u);
    for (const auto &c : ch.clusters) {
        EXPECT_EQ(c.size(), 1u);
        EXPECT_EQ(c.cursor.pg_db, c.dray.pg_det_db);
    }
}

TEST(Channel, ReducedLectureRoomBoundsAndSeedSplit)
{
    Room room;
    room.dimensions = {10, 19, 3};
    room.face_materials = {"Left Wall (TX2)", "Right Wall (TX1)", "Bottom Wall (TX3)",
                           "Top Wall (TX1)",  "Floor",            "Ceiling (TX1)"};
    QdConfig cfg;
    cfg.max_order = 2;
    const auto lib = library_with_floor();
    const auto a = generate_channel(room, {2, 3, 2.5}, {4, 8, 1.2}, lib, cfg, RngStream(1));
    const auto b = generate_channel(room, {2, 3, 2.5}, {4, 8, 1.2}, lib, cfg, RngStream(2));
    ASSERT_EQ(a.clusters.size(), b.clusters.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.clusters.size(); ++i) {
        EXPECT_LE(a.clusters[i].size(), 39u);
        expect_cluster_invariants(a.clusters[i]);
        EXPECT_EQ(a.clusters[i].dray.path_length_m, b.clusters[i].dray.path_length_m);
        EXPECT_EQ(a.clusters[i].dray.pg_det_db, b.clusters[i].dray.pg_det_db);
        differs = differs || !same_cluster(a.clusters[i], b.clusters[i]);
    }
    EXPECT_TRUE(differs);
    EXPECT_NEAR(a.t_dir_ns, distance({2, 3, 2.5}, {4, 8, 1.2}) / speed_of_light * 1e9, 1e-9);
}

TEST(Channel, DropDirectAndIngestedRays)
{
    const auto lib = library_with_floor();
    DRay direct = make_ray({}, 0.0, -70.0);
    direct.delay_abs_ns = 30.0;
    std::vector<DRay> rays{direct, make_ray({"Ceiling (TX1)"}, 4.0), make_ray({"Tables (TX1)", "Floor"}, 9.0)};
    QdConfig cfg;
    auto ch = generate_channel(std::span<const DRay>(rays), lib, cfg, RngStream(3));
    EXPECT_TRUE(ch.direct.has_value());
    EXPECT_EQ(ch.t_dir_ns, 30.0);
    EXPECT_EQ(ch.clusters.size(), 2u);
    EXPECT_FALSE(ch.tx.has_value());

    cfg.drop_direct = true;
    ch = generate_channel(std::span<const DRay>(rays), lib, cfg, RngStream(3));
    EXPECT_FALSE(ch.direct.has_value());
    EXPECT_EQ(ch.clusters.size(), 2u);

    rays.push_back(make_ray({"Mystery"}, 5.0));
    EXPECT_THROW(generate_channel(std::span<const DRay>(rays), lib, cfg, RngStream(3)), LookupError);
}

// Invariants quantified over random box scenarios and all three variants.
TEST(Channel, RandomScenarioInvariants)
{
    const auto lib = library_with_floor();
    std::mt19937_64 eng(77);
    std::uniform_real_distribution<double> dim(3.0, 20.0), frac(0.05, 0.95);
    for (int trial = 0; trial < 300; ++trial) {
        Room room;
        room.dimensions = {dim(eng), dim(eng), 2.5 + frac(eng)};
        room.face_materials = {"Left Wall (TX2)", "Right Wall (TX1)", "Bottom Wall (TX3)",
                               "Top Wall (TX1)",  "Floor",            "Ceiling (TX1)"};
        const Point3 tx{frac(eng) * room.dimensions[0], frac(eng) * room.dimensions[1], frac(eng) * room.dimensions[2]};
        const Point3 rx{frac(eng) * room.dimensions[0], frac(eng) * room.dimensions[1], frac(eng) * room.dimensions[2]};
        QdConfig cfg;
        cfg.variant = static_cast<ModelVariant>(trial % 3);
        cfg.max_order = cfg.variant == ModelVariant::complete ? 2 : 1 + trial % 3;
        const auto ch = generate_channel(room, tx, rx, lib, cfg, RngStream(static_cast<std::uint64_t>(trial)));
        for (const auto &c : ch.clusters) {
            expect_cluster_invariants(c);
            const std::size_t n = static_cast<std::size_t>(c.dray.order);
            if (cfg.variant == ModelVariant::reduced) {
                EXPECT_LE(c.size(), n * 19 + 1);
            } else if (cfg.variant == ModelVariant::complete) {
                EXPECT_LE(c.size(), complete_model_bound(3, 16, static_cast<int>(n)));
            }
        }
    }
}
