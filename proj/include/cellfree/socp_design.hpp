#pragma once

#include "cellfree/conic.hpp"
#include "cellfree/scenario.hpp"
#include "cellfree/se_model.hpp"

#include <functional>
#include <vector>

namespace cellfree {

enum class DesignMode {
    TotalPowerEpigraph,   // minimize s with ||r|| <= s
    WeightedTransmitPower // minimize sum_m a_m ||rho_m||^2, per-AP epigraphs
};

struct DesignObjective {
    DesignMode mode = DesignMode::TotalPowerEpigraph;
    Eigen::VectorXd weights; // size M, used (and required > 0 on active) in weighted mode

    static DesignObjective total_power() { return {}; }
    static DesignObjective weighted(Eigen::VectorXd w) {
        DesignObjective obj;
        obj.mode = DesignMode::WeightedTransmitPower;
        obj.weights = std::move(w);
        return obj;
    }
};

/// A materialized fixed-active-set design program plus its variable map.
/// Variables are u_mk = sqrt(rho_mk) over the active set, then the epigraph
/// scalar s (total-power mode) or per-AP quadratic epigraphs t_m (weighted).
struct FixedSetProgram {
    conic::ConicProgram program;
    ActiveSet active;
    DesignMode mode;
    int n_users = 0;
    double weight_scale = 1.0; // weighted objective was divided by this

    int u_var(int local_m, int k) const { return local_m * n_users + k; }
    int s_var() const { return active.size() * n_users; }
    int t_var(int local_m) const { return active.size() * n_users + local_m; }

    int orthant_block = -1;
    std::vector<int> objective_blocks; // epigraph cone(s)
    std::vector<int> sinr_blocks;      // one per user with nu_k > 0 (-1 otherwise)
    std::vector<double> sinr_scales;   // normalization factor per user block
    std::vector<int> cap_blocks;       // one per active AP
};

/// Adds the per-user SINR cones || s_k || <= g_k' u_k over the given APs.
/// u_var maps (local AP index, user) to the variable holding sqrt(rho).
/// Each block is divided by its largest coefficient (an SOC is invariant
/// under uniform positive row scaling); the factor used per user is appended
/// to `scales` when given, for bookkeeping checks. Returns one block id per
/// user, -1 for users with nu_k = 0.
std::vector<int> add_sinr_cones(conic::ConicProgram &prog, const Scenario &scn,
                                const SinrTargets &targets, const std::vector<int> &aps,
                                const std::function<int(int, int)> &u_var,
                                std::vector<double> *scales = nullptr);

FixedSetProgram build_fixed_set_socp(const Scenario &scn, const SinrTargets &targets,
                                     const ActiveSet &active, const DesignObjective &objective);

struct FixedSetResult {
    conic::SolveStatus status = conic::SolveStatus::NumericalTrouble;
    PowerAllocation alloc; // full M x K, zero outside the active set
    double objective = 0.0; // mode (9): s^2; weighted: sum_m a_m ||rho_m||^2
    double total_power_w = 0.0;
    double transmit_power_w = 0.0;
    int solver_iterations = 0;
    conic::ResidualReport solver_residuals;
};

/// Default solver tolerances used throughout the repo's design solves.
conic::SolverOptions design_solver_options();

FixedSetResult solve_fixed_set(const Scenario &scn, const SinrTargets &targets,
                               const ActiveSet &active, const DesignObjective &objective,
                               const conic::SolverOptions &opts = design_solver_options(),
                               const conic::Solver *solver = nullptr);

} // namespace cellfree
