#pragma once

#include "cellfree/socp_design.hpp"

#include <vector>

namespace cellfree {

struct IrlsOptions {
    double p_tilde = 1.0;       // group norm exponent, 0 < p_tilde < 2 (p~/2 = 0.5)
    double eps0_factor = 1e-2;  // eps_0 = eps0_factor * sqrt(P_max)
    double eps_decay = 0.5;     // eps_n = max(eps_{n-1} * decay, eps_floor)
    double eps_floor = 1e-8;
    double stop_rel_change = 1e-4;
    int max_iterations = 50;
    double zero_threshold_factor = 1e-8; // ||rho_m||^2 < factor * P_max -> AP off
    bool freeze_off_aps = true;
    conic::SolverOptions solver = design_solver_options();
};

/// One IRLS iteration snapshot (also the bench module's iteration trace).
struct IrlsState {
    int iteration = 0;
    Eigen::VectorXd weights; // a_m used by this iteration's solve
    double eps = 0.0;        // damping used for the following weight update
    PowerAllocation alloc;
    Eigen::VectorXd ap_power_w; // ||rho_m||^2 per AP
    double objective_lp = 0.0;  // relaxed group-sparsity objective, see lp_objective
    int active_count = 0;       // APs above the zero threshold
    std::vector<int> frozen_off;
};

/// Weight update a_m = (Delta p~/2) (||rho_m||^2 + eps^2)^(p~/2 - 1).
Eigen::VectorXd update_weights(const Eigen::VectorXd &ap_power_w, double eps, double delta,
                               double p_tilde);

/// The relaxed group-sparsity objective
///   ( Delta * sum_m (||rho_m||^2)^(p~/2) + P_act^(p~/2) )^(2/p~),
/// monitored across IRLS iterations.
double lp_objective(const Eigen::VectorXd &ap_power_w, double delta, double p_act,
                    double p_tilde);

struct IrlsResult {
    conic::SolveStatus status = conic::SolveStatus::NumericalTrouble;
    PowerAllocation alloc;
    std::vector<IrlsState> history;
    std::vector<int> ranking; // all M APs by final power, descending
    int iterations = 0;
};

/// Reweighted sequence of designer solves in weighted-transmit-power mode.
IrlsResult irls(const Scenario &scn, const SinrTargets &targets, const IrlsOptions &opts = {});

struct SelectionResult {
    conic::SolveStatus status = conic::SolveStatus::NumericalTrouble;
    ActiveSet active;
    PowerAllocation alloc;
    double total_power_w = 0.0;
    double transmit_power_w = 0.0;
    int l_min = 0;            // smallest feasible prefix length
    int fixed_set_solves = 0;
};

/// Feasibility bisection for the smallest prefix of the ranking, then local
/// descent on the prefix length while the total power strictly improves.
SelectionResult select_active_by_bisection(const Scenario &scn, const SinrTargets &targets,
                                           const std::vector<int> &ranking,
                                           const conic::SolverOptions &opts =
                                               design_solver_options());

struct SparsityPipelineResult {
    conic::SolveStatus status = conic::SolveStatus::NumericalTrouble;
    ActiveSet active;
    PowerAllocation alloc;
    double total_power_w = 0.0;
    double transmit_power_w = 0.0;
    int irls_iterations = 0;
    int l_min = 0;
    std::vector<IrlsState> irls_history;
};

/// Full low-complexity pipeline: IRLS ranking, bisection-like selection, and
/// a final fixed-set design on the chosen prefix.
SparsityPipelineResult sparsity_pipeline(const Scenario &scn, const SinrTargets &targets,
                                         const IrlsOptions &opts = {});

} // namespace cellfree
