#pragma once

#include "cellfree/scenario.hpp"
#include "cellfree/se_model.hpp"

#include <vector>

namespace cellfree::testing {

/// Builds a Scenario directly from a beta matrix and pilot grouping,
/// bypassing the random generator; gamma follows from Eq.-(4) machinery.
inline Scenario manual_scenario(const Eigen::MatrixXd &beta,
                                std::vector<std::vector<int>> pilot_groups,
                                const ScenarioConfig &base) {
    Scenario scn;
    scn.config = base;
    scn.config.ap_count = static_cast<int>(beta.rows());
    scn.config.user_count = static_cast<int>(beta.cols());
    scn.ap_xy.resize(beta.rows(), {0.0, 0.0});
    scn.user_xy.resize(beta.cols(), {0.0, 0.0});
    scn.beta = beta;
    scn.pilot_groups = std::move(pilot_groups);
    scn.gamma = channel_estimate_quality(scn.beta, scn.pilot_groups, scn.config);
    scn.pilot_of_user.assign(beta.cols(), -1);
    for (std::size_t g = 0; g < scn.pilot_groups.size(); ++g) {
        for (int k : scn.pilot_groups[g]) {
            scn.pilot_of_user[k] = static_cast<int>(g);
        }
    }
    return scn;
}

/// Small-but-realistic random instance config for oracle-equivalence tests.
inline ScenarioConfig small_config(int M, int K, int N, std::uint64_t seed,
                                   double se_target = 1.0) {
    ScenarioConfig cfg;
    cfg.ap_count = M;
    cfg.user_count = K;
    cfg.antennas_per_ap = N;
    cfg.side_m = 500.0;
    cfg.min_ap_dist_m = 20.0;
    cfg.tau_p = std::min(K, 2);
    cfg.se_target = se_target;
    cfg.seed = seed;
    return cfg;
}

/// The paper's simulation setup.
inline ScenarioConfig paper_config(std::uint64_t seed) {
    ScenarioConfig cfg; // defaults already match the paper
    cfg.seed = seed;
    return cfg;
}

} // namespace cellfree::testing
