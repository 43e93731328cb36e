#include "doctest.h"

#include "cellfree/errors.hpp"
#include "cellfree/scenario.hpp"

#include <cmath>

using namespace cellfree;

TEST_CASE("wrap distance basics") {
    CHECK(wrap_distance({123.0, 456.0}, {123.0, 456.0}, 1000.0) == 0.0);
    CHECK(wrap_distance({0.0, 0.0}, {990.0, 0.0}, 1000.0) == doctest::Approx(10.0));
    CHECK(wrap_distance({0.0, 0.0}, {950.0, 950.0}, 1000.0) ==
          doctest::Approx(std::sqrt(50.0 * 50.0 + 50.0 * 50.0)));
}

TEST_CASE("wrap distance is a torus metric") {
    RandomStream rng(99);
    const double side = 700.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Point a{rng.uniform(0.0, side), rng.uniform(0.0, side)};
        const Point b{rng.uniform(0.0, side), rng.uniform(0.0, side)};
        const Point c{rng.uniform(0.0, side), rng.uniform(0.0, side)};
        const double ab = wrap_distance(a, b, side);
        const double ba = wrap_distance(b, a, side);
        const double ac = wrap_distance(a, c, side);
        const double cb = wrap_distance(c, b, side);
        CHECK(ab == doctest::Approx(ba));
        CHECK(ab <= ac + cb + 1e-9);
        CHECK(ab <= side * std::sqrt(2.0) / 2.0 + 1e-9);
    }
}

TEST_CASE("AP placement respects the minimum wrap-around separation") {
    SUBCASE("a single AP has no pairwise constraint") {
        ScenarioConfig cfg;
        cfg.ap_count = 1;
        cfg.user_count = 2;
        cfg.tau_p = 2;
        cfg.min_ap_dist_m = 900.0;
        RandomStream rng(cfg.seed);
        const auto [aps, users] = generate_positions(cfg, rng);
        CHECK(aps.size() == 1);
        CHECK(users.size() == 2);
    }
    SUBCASE("paper-scale placement keeps all pairs 50 m apart") {
        ScenarioConfig cfg; // M=20, side 1000, min dist 50
        RandomStream rng(42);
        const auto [aps, users] = generate_positions(cfg, rng);
        REQUIRE(aps.size() == 20);
        for (std::size_t i = 0; i < aps.size(); ++i) {
            for (std::size_t j = i + 1; j < aps.size(); ++j) {
                CHECK(wrap_distance(aps[i], aps[j], cfg.side_m) >= cfg.min_ap_dist_m);
            }
        }
    }
    SUBCASE("over-constrained packing fails deterministically") {
        ScenarioConfig cfg;
        cfg.ap_count = 400;
        cfg.side_m = 100.0;
        cfg.min_ap_dist_m = 50.0;
        RandomStream rng(7);
        CHECK_THROWS_AS(generate_positions(cfg, rng), PlacementFailure);
    }
}

TEST_CASE("pathloss evaluation without shadowing") {
    ScenarioConfig cfg;
    cfg.ap_count = 1;
    cfg.user_count = 1;
    cfg.tau_p = 1;
    cfg.shadowing.sigma_db = 0.0;

    SUBCASE("d = 1 m gives the reference loss") {
        cfg.pathloss.ap_height_m = 1.0;
        RandomStream rng(1);
        const Eigen::MatrixXd beta =
            large_scale_fading({{50.0, 50.0}}, {{50.0, 50.0}}, cfg, rng);
        CHECK(10.0 * std::log10(beta(0, 0)) == doctest::Approx(-30.5).epsilon(1e-12));
    }
    SUBCASE("d = 100 m gives -103.9 dB") {
        cfg.pathloss.ap_height_m = 100.0;
        RandomStream rng(1);
        const Eigen::MatrixXd beta =
            large_scale_fading({{50.0, 50.0}}, {{50.0, 50.0}}, cfg, rng);
        CHECK(10.0 * std::log10(beta(0, 0)) == doctest::Approx(-103.9).epsilon(1e-12));
    }
}

TEST_CASE("shadowing generator statistics") {
    // 10^5 independent draws: mean within 0.05 dB of zero, std within 0.05
    // of sigma.
    ScenarioConfig cfg;
    cfg.ap_count = 100;
    cfg.user_count = 1000;
    cfg.tau_p = 5;
    cfg.shadowing.sigma_db = 4.0;
    cfg.pathloss.ap_height_m = 10.0;
    RandomStream rng(2024);

    std::vector<Point> aps(100), users(1000);
    RandomStream pos_rng(5);
    for (auto &p : aps) {
        p = {pos_rng.uniform(0.0, 1000.0), pos_rng.uniform(0.0, 1000.0)};
    }
    for (auto &p : users) {
        p = {pos_rng.uniform(0.0, 1000.0), pos_rng.uniform(0.0, 1000.0)};
    }
    const Eigen::MatrixXd beta = large_scale_fading(aps, users, cfg, rng);

    double sum = 0.0, sum_sq = 0.0;
    int n = 0;
    for (int m = 0; m < 100; ++m) {
        for (int k = 0; k < 1000; ++k) {
            const double d2d = wrap_distance(aps[m], users[k], cfg.side_m);
            const double d3d = std::hypot(d2d, cfg.pathloss.ap_height_m);
            const double pl = cfg.pathloss.const_db - cfg.pathloss.exp_coef * std::log10(d3d);
            const double f = 10.0 * std::log10(beta(m, k)) - pl;
            sum += f;
            sum_sq += f * f;
            ++n;
        }
    }
    const double mean = sum / n;
    const double std_dev = std::sqrt(sum_sq / n - mean * mean);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(std_dev - 4.0) < 0.05);
}

TEST_CASE("pilot assignment") {
    RandomStream rng(11);
    SUBCASE("20 users over 5 pilots gives groups of 4") {
        const auto groups = assign_pilots(20, 5, rng);
        REQUIRE(groups.size() == 5);
        std::vector<bool> seen(20, false);
        for (const auto &g : groups) {
            CHECK(g.size() == 4);
            for (int k : g) {
                CHECK(!seen[k]);
                seen[k] = true;
            }
        }
    }
    SUBCASE("K = tau_p gives singletons") {
        const auto groups = assign_pilots(6, 6, rng);
        REQUIRE(groups.size() == 6);
        for (const auto &g : groups) {
            CHECK(g.size() == 1);
        }
    }
    SUBCASE("K=7, tau_p=3 splits as {3,2,2}") {
        const auto groups = assign_pilots(7, 3, rng);
        std::vector<std::size_t> sizes;
        for (const auto &g : groups) {
            sizes.push_back(g.size());
        }
        std::sort(sizes.begin(), sizes.end());
        CHECK(sizes == std::vector<std::size_t>{2, 2, 3});
    }
    SUBCASE("tau_p > K is rejected") {
        CHECK_THROWS_AS(assign_pilots(3, 4, rng), InvalidConfig);
    }
}

TEST_CASE("channel estimate quality") {
    ScenarioConfig cfg;
    cfg.ap_count = 1;
    cfg.user_count = 1;
    cfg.tau_p = 5;
    cfg.pilot_power_w = 0.2; // tau_p * p = 1
    cfg.noise_w = 6.31e-13;

    SUBCASE("zero channel gives zero estimate") {
        Eigen::MatrixXd beta(1, 1);
        beta << 0.0;
        const auto gamma = channel_estimate_quality(beta, {{0}}, cfg);
        CHECK(gamma(0, 0) == 0.0);
    }
    SUBCASE("solo pilot scalar value") {
        Eigen::MatrixXd beta(1, 1);
        beta << 1e-10;
        const auto gamma = channel_estimate_quality(beta, {{0}}, cfg);
        CHECK(gamma(0, 0) == doctest::Approx(1e-20 / (1e-10 + 6.31e-13)).epsilon(1e-12));
        CHECK(gamma(0, 0) == doctest::Approx(9.937e-11).epsilon(1e-3));
    }
    SUBCASE("an equal-strength pilot sharer halves gamma when noise is negligible") {
        cfg.user_count = 2;
        cfg.noise_w = 1e-30;
        Eigen::MatrixXd beta(1, 2);
        beta << 1e-10, 1e-10;
        const auto shared = channel_estimate_quality(beta, {{0, 1}}, cfg);
        const auto solo = channel_estimate_quality(beta, {{0}, {1}}, cfg);
        CHECK(shared(0, 0) == doctest::Approx(0.5 * solo(0, 0)).epsilon(1e-9));
    }
}

TEST_CASE("scenario invariants") {
    ScenarioConfig cfg;
    cfg.ap_count = 8;
    cfg.user_count = 10;
    cfg.tau_p = 3;
    cfg.seed = 314159;
    const Scenario scn = generate_scenario(cfg);

    SUBCASE("gamma strictly below beta wherever beta is positive") {
        for (int m = 0; m < scn.ap_count(); ++m) {
            for (int k = 0; k < scn.user_count(); ++k) {
                CHECK(scn.beta(m, k) > 0.0);
                CHECK(scn.gamma(m, k) < scn.beta(m, k));
                CHECK(scn.gamma(m, k) >= 0.0);
            }
        }
    }
    SUBCASE("pilot groups partition the users") {
        std::vector<int> count(scn.user_count(), 0);
        for (const auto &g : scn.pilot_groups) {
            for (int k : g) {
                count[k] += 1;
            }
        }
        for (int k = 0; k < scn.user_count(); ++k) {
            CHECK(count[k] == 1);
        }
    }
    SUBCASE("same seed reproduces the scenario bit for bit") {
        const Scenario again = generate_scenario(cfg);
        CHECK(scn.beta == again.beta);
        CHECK(scn.gamma == again.gamma);
        CHECK(scn.ap_xy == again.ap_xy);
        CHECK(scn.user_xy == again.user_xy);
        CHECK(scn.pilot_groups == again.pilot_groups);
    }
    SUBCASE("raising a pilot sharer's beta weakly lowers gamma") {
        // Pick a user with at least one pilot peer.
        int k = -1, peer = -1;
        for (const auto &g : scn.pilot_groups) {
            if (g.size() >= 2) {
                k = g[0];
                peer = g[1];
                break;
            }
        }
        REQUIRE(k >= 0);
        Eigen::MatrixXd beta = scn.beta;
        beta(0, peer) *= 10.0;
        const auto bumped = channel_estimate_quality(beta, scn.pilot_groups, cfg);
        CHECK(bumped(0, k) <= scn.gamma(0, k));
    }
}

TEST_CASE("correlated shadowing mode is reproducible and flagged") {
    ScenarioConfig cfg;
    cfg.ap_count = 4;
    cfg.user_count = 6;
    cfg.tau_p = 2;
    cfg.shadowing.correlated = true;
    cfg.seed = 77;
    const Scenario a = generate_scenario(cfg);
    const Scenario b = generate_scenario(cfg);
    CHECK(a.beta == b.beta);
    CHECK(a.to_json().find("correlated") != std::string::npos);
}

TEST_CASE("scenario JSON round trip") {
    ScenarioConfig cfg;
    cfg.ap_count = 5;
    cfg.user_count = 6;
    cfg.tau_p = 2;
    cfg.seed = 9001;
    const Scenario scn = generate_scenario(cfg);
    const Scenario back = Scenario::from_json(scn.to_json());

    CHECK(back.pilot_groups == scn.pilot_groups);
    CHECK(back.config.seed == scn.config.seed);
    for (int m = 0; m < scn.ap_count(); ++m) {
        for (int k = 0; k < scn.user_count(); ++k) {
            CHECK(back.beta(m, k) == doctest::Approx(scn.beta(m, k)).epsilon(1e-12));
            CHECK(back.gamma(m, k) == doctest::Approx(scn.gamma(m, k)).epsilon(1e-12));
        }
    }
}

TEST_CASE("dBm conversion") {
    CHECK(dbm_to_watt(-92.0) == doctest::Approx(6.31e-13).epsilon(1e-3));
    CHECK(watt_to_dbm(dbm_to_watt(-92.0)) == doctest::Approx(-92.0).epsilon(1e-12));
    CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0));
}

TEST_CASE("invalid configs are rejected") {
    ScenarioConfig cfg;
    SUBCASE("tau_p above K") {
        cfg.user_count = 3;
        cfg.tau_p = 4;
        CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    }
    SUBCASE("tau_p not below tau_c") {
        cfg.tau_p = cfg.tau_c;
        CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    }
    SUBCASE("delta below one") {
        cfg.delta = 0.9;
        CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    }
}
