#pragma once

#include "cellfree/scenario.hpp"

#include <Eigen/Dense>
#include <vector>

namespace cellfree {

/// Per-AP per-user downlink powers rho_mk in watts, M x K.
struct PowerAllocation {
    Eigen::MatrixXd rho;

    PowerAllocation() = default;
    PowerAllocation(int ap_count, int user_count)
        : rho(Eigen::MatrixXd::Zero(ap_count, user_count)) {}
};

/// Sorted subset of switched-on APs.
struct ActiveSet {
    std::vector<int> members;

    ActiveSet() = default;
    explicit ActiveSet(std::vector<int> aps);
    static ActiveSet all(int ap_count);

    int size() const { return static_cast<int>(members.size()); }
    bool empty() const { return members.empty(); }
    bool contains(int ap) const;
    std::uint32_t mask() const; // bitmask, valid for <= 32 APs
};

/// Per-user linear SINR thresholds nu_k equivalent to the SE demands.
struct SinrTargets {
    Eigen::VectorXd nu;

    bool all_zero() const { return nu.size() == 0 || nu.maxCoeff() <= 0.0; }
};

/// nu_k = 2^(xi_k tau_c / (tau_c - tau_p)) - 1.
SinrTargets se_target_to_sinr(const Eigen::VectorXd &xi, int tau_c, int tau_p);

/// Effective downlink SINR of every user under MRT, closed form.
Eigen::VectorXd sinr(const PowerAllocation &alloc, const ActiveSet &active,
                     const Scenario &scn);

/// Ergodic spectral efficiency R_k = (1 - tau_p/tau_c) log2(1 + SINR_k).
Eigen::VectorXd se(const PowerAllocation &alloc, const ActiveSet &active, const Scenario &scn);

double transmit_power(const PowerAllocation &alloc, const ActiveSet &active);

/// Total consumption: Delta * transmit power + |A| * P_act.
double total_power(const PowerAllocation &alloc, const ActiveSet &active, double delta,
                   double p_act);

/// Post-solve verification report; all reported powers in the repo are
/// recomputed through this path rather than trusted from solver objectives.
struct FeasibilityReport {
    bool feasible = false;
    bool sinr_ok = false;
    bool caps_ok = false;
    bool inactive_zero_ok = false;
    Eigen::VectorXd sinr;           // K
    Eigen::VectorXd sinr_slack_rel; // (SINR_k - nu_k) / nu_k, +inf where nu_k = 0
    Eigen::VectorXd ap_load_w;      // M
    Eigen::VectorXd cap_slack_w;    // P_max - load (active APs), +inf otherwise
    double min_sinr_slack_rel = 0.0;
    double min_cap_slack_w = 0.0;
};

FeasibilityReport check_feasible(const PowerAllocation &alloc, const ActiveSet &active,
                                 const Scenario &scn, const SinrTargets &targets);

} // namespace cellfree
