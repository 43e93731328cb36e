#include "doctest.h"

#include "cellfree/errors.hpp"
#include "cellfree/socp_design.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace cellfree;
using cellfree::testing::manual_scenario;
using cellfree::testing::small_config;

namespace {

ScenarioConfig link_config(int N) {
    ScenarioConfig cfg;
    cfg.ap_count = 1;
    cfg.user_count = 1;
    cfg.antennas_per_ap = N;
    cfg.tau_c = 200;
    cfg.tau_p = 5;
    cfg.noise_w = 6.31e-13;
    return cfg;
}

// Evaluates one block's affine image at x.
Eigen::VectorXd block_value(const conic::ConicProgram &prog, int block,
                            const Eigen::VectorXd &x) {
    const auto &blk = prog.block(block);
    Eigen::VectorXd y = blk.offset;
    for (const auto &t : blk.coeffs) {
        y(t.row()) += t.value() * x(t.col());
    }
    return y;
}

} // namespace

TEST_CASE("single link reproduces the closed form") {
    const Scenario scn = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-10), {{0}},
                                         link_config(20));
    const SinrTargets t = se_target_to_sinr(Eigen::VectorXd::Constant(1, 2.0), 200, 5);
    const double nu = t.nu(0);
    const double closed_form =
        nu * scn.config.noise_w / (20.0 * scn.gamma(0, 0) - nu * scn.beta(0, 0));
    REQUIRE(closed_form > 0.0);

    const FixedSetResult r = solve_fixed_set(scn, t, ActiveSet::all(1),
                                             DesignObjective::total_power());
    REQUIRE(r.status == conic::SolveStatus::Optimal);
    CHECK(r.alloc.rho(0, 0) == doctest::Approx(closed_form).epsilon(1e-8));
    CHECK(r.total_power_w ==
          doctest::Approx(2.5 * closed_form + 5.03).epsilon(1e-8));
}

TEST_CASE("infeasible single link is certified") {
    // N gamma <= nu beta: pick a huge SE demand.
    const Scenario scn = manual_scenario(Eigen::MatrixXd::Constant(1, 1, 1e-10), {{0}},
                                         link_config(2));
    const SinrTargets t = se_target_to_sinr(Eigen::VectorXd::Constant(1, 12.0), 200, 5);
    REQUIRE(2.0 * scn.gamma(0, 0) <= t.nu(0) * scn.beta(0, 0));

    const FixedSetResult r = solve_fixed_set(scn, t, ActiveSet::all(1),
                                             DesignObjective::total_power());
    CHECK(r.status == conic::SolveStatus::Infeasible);
}

TEST_CASE("all-zero targets make the zero allocation optimal") {
    const Scenario scn = generate_scenario(small_config(3, 2, 4, 5));
    SinrTargets t;
    t.nu = Eigen::VectorXd::Zero(2);

    const FixedSetResult r = solve_fixed_set(scn, t, ActiveSet::all(3),
                                             DesignObjective::total_power());
    REQUIRE(r.status == conic::SolveStatus::Optimal);
    CHECK(r.transmit_power_w == 0.0);
    CHECK(r.objective == doctest::Approx(3 * scn.config.p_act_w));

    // The materialized program's optimum is sqrt(|A| P_act).
    const FixedSetProgram fsp =
        build_fixed_set_socp(scn, t, ActiveSet::all(3), DesignObjective::total_power());
    const conic::ConicSolution sol = conic::solve(fsp.program, design_solver_options());
    REQUIRE(sol.status == conic::SolveStatus::Optimal);
    CHECK(sol.primal_objective ==
          doctest::Approx(std::sqrt(3 * scn.config.p_act_w)).epsilon(1e-7));
}

TEST_CASE("pilot-sharing pair has the expected cone structure") {
    ScenarioConfig cfg = link_config(4);
    cfg.user_count = 2;
    Eigen::MatrixXd beta(1, 2);
    beta << 2e-10, 1e-10;
    const Scenario scn = manual_scenario(beta, {{0, 1}}, cfg);
    const SinrTargets t = se_target_to_sinr(Eigen::VectorXd::Constant(2, 1.0), 200, 5);

    const FixedSetProgram fsp =
        build_fixed_set_socp(scn, t, ActiveSet::all(1), DesignObjective::total_power());
    // Blocks: u-orthant, epigraph, two SINR cones, one cap.
    REQUIRE(fsp.program.blocks().size() == 5);
    for (int k = 0; k < 2; ++k) {
        const auto &blk = fsp.program.block(fsp.sinr_blocks[k]);
        // head + 1 coherent + |A| * K = 2 non-coherent + sigma.
        CHECK(blk.dim == 5);
        CHECK(blk.type == conic::ConeType::Soc);
    }
    const auto &epi = fsp.program.block(fsp.objective_blocks.front());
    CHECK(epi.dim == 1 * 2 + 2);
    const auto &cap = fsp.program.block(fsp.cap_blocks.front());
    CHECK(cap.dim == 2 + 1);
}

TEST_CASE("epigraph bookkeeping identities hold at the optimum") {
    const Scenario scn = generate_scenario(small_config(4, 3, 4, 21));
    const SinrTargets t =
        se_target_to_sinr(Eigen::VectorXd::Constant(3, 1.0), scn.config.tau_c,
                          scn.config.tau_p);
    const FixedSetProgram fsp =
        build_fixed_set_socp(scn, t, ActiveSet::all(4), DesignObjective::total_power());
    const conic::ConicSolution sol = conic::solve(fsp.program, design_solver_options());
    REQUIRE(sol.status == conic::SolveStatus::Optimal);

    PowerAllocation alloc(4, 3);
    for (int a = 0; a < 4; ++a) {
        for (int k = 0; k < 3; ++k) {
            const double u = sol.x(fsp.u_var(a, k));
            alloc.rho(a, k) = u * u;
        }
    }
    const Eigen::VectorXd gains = sinr(alloc, ActiveSet::all(4), scn);
    const double N = scn.config.antennas_per_ap;
    for (int k = 0; k < 3; ++k) {
        // The block is stored divided by its recorded normalization factor.
        const Eigen::VectorXd y =
            fsp.sinr_scales[k] * block_value(fsp.program, fsp.sinr_blocks[k], sol.x);
        double coherent = 0.0;
        for (int m = 0; m < 4; ++m) {
            coherent += std::sqrt(alloc.rho(m, k) * scn.gamma(m, k));
        }
        const double numerator = N * coherent * coherent;
        const double denominator = numerator / gains(k);
        CHECK(y(0) * y(0) == doctest::Approx(numerator).epsilon(1e-9));
        CHECK(y.tail(y.size() - 1).squaredNorm() ==
              doctest::Approx(t.nu(k) * denominator).epsilon(1e-9));
    }
}

TEST_CASE("objective consistency and active SINR constraints at the optimum") {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const Scenario scn = generate_scenario(small_config(4, 3, 4, seed));
        const SinrTargets t =
            se_target_to_sinr(Eigen::VectorXd::Constant(3, 1.0), scn.config.tau_c,
                              scn.config.tau_p);
        const FixedSetResult r = solve_fixed_set(scn, t, ActiveSet::all(4),
                                                 DesignObjective::total_power());
        REQUIRE(r.status == conic::SolveStatus::Optimal);

        // s^2 equals the Eq.-(5) recomputation.
        CHECK(r.objective == doctest::Approx(r.total_power_w).epsilon(1e-6));

        // Power minimization presses every positive-target SINR to its wall.
        const Eigen::VectorXd gains = sinr(r.alloc, ActiveSet::all(4), scn);
        for (int k = 0; k < 3; ++k) {
            CHECK(gains(k) == doctest::Approx(t.nu(k)).epsilon(1e-5));
        }

        const FeasibilityReport rep = check_feasible(r.alloc, ActiveSet::all(4), scn, t);
        CHECK(rep.feasible);
    }
}

TEST_CASE("coherent combining beats a single AP (grid-search oracle)") {
    // Two APs with identical statistics serving one user.
    ScenarioConfig cfg = link_config(4);
    cfg.ap_count = 2;
    Eigen::MatrixXd beta(2, 1);
    beta << 1e-10, 1e-10;
    const Scenario scn = manual_scenario(beta, {{0}}, cfg);
    const SinrTargets t = se_target_to_sinr(Eigen::VectorXd::Constant(1, 1.5), 200, 5);

    const FixedSetResult both = solve_fixed_set(scn, t, ActiveSet::all(2),
                                                DesignObjective::total_power());
    const FixedSetResult solo = solve_fixed_set(scn, t, ActiveSet({0}),
                                                DesignObjective::total_power());
    REQUIRE(both.status == conic::SolveStatus::Optimal);
    REQUIRE(solo.status == conic::SolveStatus::Optimal);
    CHECK(both.transmit_power_w < solo.transmit_power_w);

    // Brute-force grid at 1e-3 W resolution over (rho_0, rho_1).
    const double N = 4.0, gamma = scn.gamma(0, 0), b = beta(0, 0), nu = t.nu(0);
    double best = std::numeric_limits<double>::infinity();
    for (double r0 = 0.0; r0 <= cfg.p_max_w; r0 += 1e-3) {
        for (double r1 = 0.0; r1 <= cfg.p_max_w; r1 += 1e-3) {
            const double coh = std::sqrt(r0 * gamma) + std::sqrt(r1 * gamma);
            const double s = N * coh * coh / ((r0 + r1) * b + cfg.noise_w);
            if (s >= nu) {
                best = std::min(best, r0 + r1);
            }
        }
    }
    CHECK(both.transmit_power_w <= best + 1e-9);
    CHECK(both.transmit_power_w >= best - 2e-3); // one grid cell of slack
}

TEST_CASE("weighted mode matches its recomputed objective and monotonicity") {
    const Scenario scn = generate_scenario(small_config(4, 3, 4, 55));
    const SinrTargets t =
        se_target_to_sinr(Eigen::VectorXd::Constant(3, 1.0), scn.config.tau_c,
                          scn.config.tau_p);
    Eigen::VectorXd weights(4);
    weights << 1.0, 2.0, 0.5, 4.0;

    const FixedSetResult full = solve_fixed_set(scn, t, ActiveSet::all(4),
                                                DesignObjective::weighted(weights));
    REQUIRE(full.status == conic::SolveStatus::Optimal);
    double recomputed = 0.0;
    for (int m = 0; m < 4; ++m) {
        recomputed += weights(m) * full.alloc.rho.row(m).sum();
    }
    CHECK(full.objective == doctest::Approx(recomputed).epsilon(1e-9));

    // Enlarging the active set cannot increase the weighted optimum.
    const FixedSetResult sub = solve_fixed_set(scn, t, ActiveSet({0, 1, 2}),
                                               DesignObjective::weighted(weights));
    if (sub.status == conic::SolveStatus::Optimal) {
        CHECK(full.objective <= sub.objective + 1e-6 * (1.0 + sub.objective));
    }

    const FeasibilityReport rep = check_feasible(full.alloc, ActiveSet::all(4), scn, t);
    CHECK(rep.feasible);
}

TEST_CASE("empty active set with positive targets is rejected") {
    const Scenario scn = generate_scenario(small_config(3, 2, 4, 5));
    const SinrTargets t =
        se_target_to_sinr(Eigen::VectorXd::Constant(2, 1.0), 200, 5);
    CHECK_THROWS_AS(
        solve_fixed_set(scn, t, ActiveSet(), DesignObjective::total_power()),
        EmptyActiveSet);
}

TEST_CASE("solver residuals on design problems stay certified") {
    const Scenario scn = generate_scenario(small_config(5, 4, 4, 77));
    const SinrTargets t =
        se_target_to_sinr(Eigen::VectorXd::Constant(4, 1.5), scn.config.tau_c,
                          scn.config.tau_p);
    const FixedSetProgram fsp =
        build_fixed_set_socp(scn, t, ActiveSet::all(5), DesignObjective::total_power());
    const conic::ConicSolution sol = conic::solve(fsp.program, design_solver_options());
    REQUIRE(sol.status == conic::SolveStatus::Optimal);
    const conic::ResidualReport rep = conic::residuals(fsp.program, sol);
    CHECK(rep.primal_infeas <= 1e-7);
    CHECK(rep.dual_infeas <= 1e-7);
    CHECK(rep.rel_gap <= 1e-7);
}
