#include "doctest.h"

#include "cellfree/errors.hpp"
#include "cellfree/misocp.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace cellfree;
using cellfree::testing::manual_scenario;
using cellfree::testing::small_config;

namespace {

SinrTargets uniform_targets(const Scenario &scn, double xi) {
    return se_target_to_sinr(Eigen::VectorXd::Constant(scn.user_count(), xi),
                             scn.config.tau_c, scn.config.tau_p);
}

} // namespace

TEST_CASE("all-zero targets switch everything off in one node") {
    const Scenario scn = generate_scenario(small_config(5, 3, 4, 3));
    SinrTargets t;
    t.nu = Eigen::VectorXd::Zero(3);
    const BnbResult r = solve_misocp(scn, t);
    CHECK(r.active.empty());
    CHECK(r.total_power_w == 0.0);
    CHECK(r.nodes_explored == 1);
}

TEST_CASE("branch and bound matches the exhaustive oracle") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const int M = 4 + static_cast<int>(seed % 3);
        const int K = 2 + static_cast<int>(seed % 2);
        const Scenario scn = generate_scenario(small_config(M, K, 4, 9000 + seed));
        const SinrTargets t = uniform_targets(scn, 1.0);
        CAPTURE(seed);
        try {
            const BnbResult oracle = exhaustive_oracle(scn, t);
            const BnbResult bnb = solve_misocp(scn, t);
            CHECK(bnb.status == BnbResult::Status::Optimal);
            CHECK(bnb.total_power_w ==
                  doctest::Approx(oracle.total_power_w).epsilon(1e-5));
            CHECK(bnb.proof_gap_w <= 1e-5 * (1.0 + bnb.total_power_w));
            ++checked;
        } catch (const GlobalInfeasible &) {
            // Drop infeasible even with all APs: both paths must agree.
            CHECK_THROWS_AS(solve_misocp(scn, t), GlobalInfeasible);
        }
    }
    CHECK(checked >= 5);
}

TEST_CASE("a dominant AP is selected alone when P_act dominates") {
    ScenarioConfig cfg;
    cfg.ap_count = 2;
    cfg.user_count = 1;
    cfg.antennas_per_ap = 8;
    cfg.tau_p = 1;
    cfg.noise_w = 6.31e-13;
    Eigen::MatrixXd beta(2, 1);
    beta << 1e-9, 1e-11; // 100x gap
    const Scenario scn = manual_scenario(beta, {{0}}, cfg);
    const SinrTargets t = uniform_targets(scn, 1.0);

    const BnbResult r = solve_misocp(scn, t);
    CHECK(r.active.members == std::vector<int>{0});

    const BnbResult oracle = exhaustive_oracle(scn, t);
    CHECK(oracle.active.members == std::vector<int>{0});
    CHECK(r.total_power_w == doctest::Approx(oracle.total_power_w).epsilon(1e-8));
}

TEST_CASE("oracle enumeration counts") {
    SUBCASE("single AP evaluates one subset") {
        const Scenario scn = generate_scenario(small_config(1, 1, 4, 17));
        const BnbResult r = exhaustive_oracle(scn, uniform_targets(scn, 0.5));
        CHECK(r.relaxations_solved == 1);
    }
    SUBCASE("three APs evaluate exactly seven subsets") {
        const Scenario scn = generate_scenario(small_config(3, 2, 4, 18));
        const BnbResult r = exhaustive_oracle(scn, uniform_targets(scn, 0.5));
        CHECK(r.relaxations_solved == 7);
    }
    SUBCASE("cap is enforced") {
        const Scenario scn = generate_scenario(small_config(6, 2, 4, 19));
        CHECK_THROWS_AS(exhaustive_oracle(scn, uniform_targets(scn, 0.5),
                                          design_solver_options(), 5),
                        CapExceeded);
    }
}

TEST_CASE("symmetric APs tie on the objective") {
    ScenarioConfig cfg;
    cfg.ap_count = 2;
    cfg.user_count = 1;
    cfg.antennas_per_ap = 8;
    cfg.tau_p = 1;
    cfg.noise_w = 6.31e-13;
    Eigen::MatrixXd beta(2, 1);
    beta << 3e-10, 3e-10;
    const Scenario scn = manual_scenario(beta, {{0}}, cfg);
    const SinrTargets t = uniform_targets(scn, 1.0);

    const BnbResult bnb = solve_misocp(scn, t);
    const BnbResult oracle = exhaustive_oracle(scn, t);
    CHECK(bnb.total_power_w == doctest::Approx(oracle.total_power_w).epsilon(1e-6));
}

TEST_CASE("node relaxations") {
    const Scenario scn = generate_scenario(small_config(4, 2, 4, 33));
    const SinrTargets t = uniform_targets(scn, 1.0);

    SUBCASE("no free variables reduces to the fixed-set solve") {
        BnbNode node;
        node.fixed_on = {0, 2};
        node.fixed_off = {1, 3};
        const RelaxationResult relax = relax_node(node, scn, t);
        const FixedSetResult fixed = solve_fixed_set(scn, t, ActiveSet({0, 2}),
                                                     DesignObjective::total_power());
        if (fixed.status == conic::SolveStatus::Optimal) {
            REQUIRE(relax.status == conic::SolveStatus::Optimal);
            CHECK(relax.lower_bound ==
                  doctest::Approx(fixed.total_power_w).epsilon(1e-7));
        } else {
            CHECK(relax.status == conic::SolveStatus::Infeasible);
        }
    }
    SUBCASE("root bound sandwiches the optimum for both relaxation forms") {
        BnbNode root;
        root.free = {0, 1, 2, 3};
        const BnbResult oracle = exhaustive_oracle(scn, t);
        const FixedSetResult all_on = solve_fixed_set(scn, t, ActiveSet::all(4),
                                                      DesignObjective::total_power());
        for (ActivationRelaxation form :
             {ActivationRelaxation::SqrtActivation, ActivationRelaxation::LinearActivation}) {
            BnbOptions opts;
            opts.relaxation = form;
            const RelaxationResult relax = relax_node(root, scn, t, opts);
            REQUIRE(relax.status == conic::SolveStatus::Optimal);
            CHECK(relax.lower_bound <= oracle.total_power_w + 1e-6);
            CHECK(oracle.total_power_w <= all_on.total_power_w + 1e-6);
        }
    }
    SUBCASE("fixing off an AP with zero relaxed power keeps the bound") {
        ScenarioConfig cfg;
        cfg.ap_count = 2;
        cfg.user_count = 1;
        cfg.antennas_per_ap = 8;
        cfg.tau_p = 1;
        Eigen::MatrixXd beta(2, 1);
        beta << 1e-9, 0.0; // the second AP has no channel at all
        const Scenario dead = manual_scenario(beta, {{0}}, cfg);
        const SinrTargets dt = uniform_targets(dead, 1.0);

        BnbNode root;
        root.free = {0, 1};
        const RelaxationResult parent = relax_node(root, dead, dt);
        REQUIRE(parent.status == conic::SolveStatus::Optimal);
        CHECK(parent.ap_power_w(1) <= 1e-9); // interior-point epsilon on the zero solution

        BnbNode child;
        child.free = {0};
        child.fixed_off = {1};
        const RelaxationResult pruned = relax_node(child, dead, dt);
        REQUIRE(pruned.status == conic::SolveStatus::Optimal);
        CHECK(pruned.lower_bound == doctest::Approx(parent.lower_bound).epsilon(1e-7));
    }
}

TEST_CASE("unreachable targets raise GlobalInfeasible") {
    const Scenario scn = generate_scenario(small_config(3, 2, 2, 60));
    const SinrTargets t = uniform_targets(scn, 40.0);
    CHECK_THROWS_AS(solve_misocp(scn, t), GlobalInfeasible);
    CHECK_THROWS_AS(exhaustive_oracle(scn, t), GlobalInfeasible);
}

TEST_CASE("node limit returns the incumbent with a gap") {
    const Scenario scn = generate_scenario(small_config(6, 3, 4, 61));
    const SinrTargets t = uniform_targets(scn, 1.0);
    BnbOptions opts;
    opts.max_nodes = 1;
    const BnbResult r = solve_misocp(scn, t, opts);
    if (r.status == BnbResult::Status::NodeLimit) {
        CHECK(r.proof_gap_w >= 0.0);
        CHECK(!r.active.empty());
        const FeasibilityReport rep =
            check_feasible(r.alloc, r.active, scn, t);
        CHECK(rep.feasible);
    }
}

TEST_CASE("incumbents always verify feasible") {
    for (std::uint64_t seed = 200; seed < 204; ++seed) {
        const Scenario scn = generate_scenario(small_config(5, 3, 4, seed));
        const SinrTargets t = uniform_targets(scn, 1.0);
        try {
            const BnbResult r = solve_misocp(scn, t);
            const FeasibilityReport rep = check_feasible(r.alloc, r.active, scn, t);
            CHECK(rep.feasible);
            CHECK(r.total_power_w ==
                  doctest::Approx(total_power(r.alloc, r.active, scn.config.delta,
                                              scn.config.p_act_w))
                      .epsilon(1e-9));
        } catch (const GlobalInfeasible &) {
        }
    }
}
