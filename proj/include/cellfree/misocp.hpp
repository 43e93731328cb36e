#pragma once

#include "cellfree/socp_design.hpp"

#include <iosfwd>
#include <vector>

namespace cellfree {

/// How the binary activation enters the relaxation objective.
enum class ActivationRelaxation {
    SqrtActivation,  // alpha_m sqrt(P_act) inside the epigraph vector r
    LinearActivation // auxiliary transmit-power epigraph + linear P_act terms
};

struct BnbOptions {
    double abs_gap_w = 1e-6; // watts, on the total-power scale
    double rel_gap = 1e-6;
    int max_nodes = 200000;
    ActivationRelaxation relaxation = ActivationRelaxation::SqrtActivation;
    conic::SolverOptions solver = design_solver_options();
    std::ostream *trace = nullptr; // optional line-delimited per-node records
};

struct BnbNode {
    std::vector<int> fixed_on;
    std::vector<int> fixed_off;
    std::vector<int> free;
    double lower_bound = 0.0; // watts, total-power scale
    int depth = 0;
};

struct RelaxationResult {
    conic::SolveStatus status = conic::SolveStatus::NumericalTrouble;
    double lower_bound = 0.0;   // valid bound on P_total over the node's subtree
    Eigen::VectorXd alpha;      // size M; pinned entries are exactly 0/1
    Eigen::VectorXd ap_power_w; // size M, relaxed per-AP transmit power
    PowerAllocation alloc;
};

/// Continuous relaxation of the node: alpha free in [0,1] on `free`, pinned
/// elsewhere; activation costs per BnbOptions::relaxation.
RelaxationResult relax_node(const BnbNode &node, const Scenario &scn, const SinrTargets &targets,
                            const BnbOptions &opts = {});

/// The conic program behind relax_node, exposed for solver-certification
/// tests and external-solver cross-checks.
conic::ConicProgram build_node_relaxation(const BnbNode &node, const Scenario &scn,
                                          const SinrTargets &targets,
                                          ActivationRelaxation form);

struct BnbResult {
    enum class Status { Optimal, NodeLimit };
    Status status = Status::Optimal;
    ActiveSet active;
    PowerAllocation alloc;
    double total_power_w = 0.0;
    double transmit_power_w = 0.0;
    int nodes_explored = 0;
    int relaxations_solved = 0;
    double proof_gap_w = 0.0; // incumbent minus best remaining bound
};

/// Globally optimal joint AP selection and power allocation by best-bound
/// branch-and-bound over the activation binaries. Throws GlobalInfeasible
/// when the targets are unreachable with every AP on.
BnbResult solve_misocp(const Scenario &scn, const SinrTargets &targets,
                       const BnbOptions &opts = {});

/// Reference optimum by enumerating every nonempty AP subset (and the empty
/// set when all targets are zero). Throws CapExceeded above `hard_cap` APs.
BnbResult exhaustive_oracle(const Scenario &scn, const SinrTargets &targets,
                            const conic::SolverOptions &opts = design_solver_options(),
                            int hard_cap = 12);

} // namespace cellfree
