#include "cellfree/socp_design.hpp"

#include "cellfree/errors.hpp"

#include <cassert>
#include <cmath>

namespace cellfree {

conic::SolverOptions design_solver_options() {
    conic::SolverOptions opts;
    opts.feas_tol = 1e-9;
    opts.abs_gap_tol = 1e-9;
    opts.rel_gap_tol = 1e-9;
    opts.max_iters = 200;
    return opts;
}

std::vector<int> add_sinr_cones(conic::ConicProgram &prog, const Scenario &scn,
                                const SinrTargets &targets, const std::vector<int> &aps,
                                const std::function<int(int, int)> &u_var,
                                std::vector<double> *scales) {
    const int K = scn.user_count();
    const int n_active = static_cast<int>(aps.size());
    const double N = scn.config.antennas_per_ap;
    std::vector<int> block_of_user(K, -1);
    if (scales) {
        scales->assign(K, 1.0);
    }

    std::vector<Eigen::Triplet<double>> entries;
    for (int k = 0; k < K; ++k) {
        const double nu = targets.nu(k);
        if (nu <= 0.0) {
            continue; // vacuous constraint
        }
        const double sqrt_nu = std::sqrt(nu);
        const std::vector<int> &pilot_peers = scn.pilot_groups[scn.pilot_of_user[k]];
        const int n_coherent = static_cast<int>(pilot_peers.size()) - 1;

        // [ g_k'u_k ; sqrt(nu) * ( coherent terms, z_k o u_k' flattened, sigma ) ]
        entries.clear();
        for (int a = 0; a < n_active; ++a) {
            entries.emplace_back(0, u_var(a, k), std::sqrt(N * scn.gamma(aps[a], k)));
        }
        int row = 1;
        for (int peer : pilot_peers) {
            if (peer == k) {
                continue;
            }
            for (int a = 0; a < n_active; ++a) {
                entries.emplace_back(row, u_var(a, peer),
                                     sqrt_nu * std::sqrt(N * scn.gamma(aps[a], k)));
            }
            ++row;
        }
        for (int kp = 0; kp < K; ++kp) {
            for (int a = 0; a < n_active; ++a) {
                entries.emplace_back(row, u_var(a, kp),
                                     sqrt_nu * std::sqrt(scn.beta(aps[a], k)));
                ++row;
            }
        }
        const double sigma_entry = sqrt_nu * std::sqrt(scn.config.noise_w);
        const int dim = 1 + n_coherent + n_active * K + 1;
        if (row + 1 != dim) {
            throw ShapeMismatch("SINR cone row bookkeeping is off");
        }

        double scale = sigma_entry;
        for (const auto &t : entries) {
            scale = std::max(scale, std::abs(t.value()));
        }
        const int b = prog.add_block(conic::ConeType::Soc, dim, "sinr_user_" + std::to_string(k));
        for (const auto &t : entries) {
            prog.add_coeff(b, t.row(), t.col(), t.value() / scale);
        }
        prog.set_offset(b, dim - 1, sigma_entry / scale);
        block_of_user[k] = b;
        if (scales) {
            (*scales)[k] = scale;
        }
    }
    return block_of_user;
}

FixedSetProgram build_fixed_set_socp(const Scenario &scn, const SinrTargets &targets,
                                     const ActiveSet &active, const DesignObjective &objective) {
    const int K = scn.user_count();
    const int nA = active.size();
    if (targets.nu.size() != K) {
        throw ShapeMismatch("target vector does not match the scenario");
    }
    if (nA == 0 && !targets.all_zero()) {
        throw EmptyActiveSet("cannot meet positive SINR targets with no active AP");
    }
    if (!active.empty() && active.members.back() >= scn.ap_count()) {
        throw ShapeMismatch("active set references an AP outside the scenario");
    }
    const bool weighted = objective.mode == DesignMode::WeightedTransmitPower;
    if (weighted) {
        if (objective.weights.size() != scn.ap_count()) {
            throw ShapeMismatch("weight vector must have one entry per AP");
        }
        for (int m : active.members) {
            if (objective.weights(m) <= 0.0) {
                throw InvalidConfig("weighted mode needs strictly positive weights");
            }
        }
    }

    const int n_u = nA * K;
    const int n_vars = n_u + (weighted ? nA : 1);
    FixedSetProgram fsp{conic::ConicProgram(n_vars)};
    fsp.active = active;
    fsp.mode = objective.mode;
    fsp.n_users = K;

    conic::ConicProgram &prog = fsp.program;

    // u >= 0 keeps the SINR cone's coherent sums meaningful.
    fsp.orthant_block = prog.add_block(conic::ConeType::Orthant, n_u, "u_nonneg");
    for (int i = 0; i < n_u; ++i) {
        prog.add_coeff(fsp.orthant_block, i, i, 1.0);
    }

    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_vars);
    if (!weighted) {
        // || r || <= s with r = [sqrt(Delta) u ; sqrt(|A| P_act)].
        c(fsp.s_var()) = 1.0;
        const int b = prog.add_block(conic::ConeType::Soc, n_u + 2, "total_power_epigraph");
        prog.add_coeff(b, 0, fsp.s_var(), 1.0);
        const double sqrt_delta = std::sqrt(scn.config.delta);
        for (int i = 0; i < n_u; ++i) {
            prog.add_coeff(b, 1 + i, i, sqrt_delta);
        }
        prog.set_offset(b, n_u + 1, std::sqrt(nA * scn.config.p_act_w));
        fsp.objective_blocks.push_back(b);
    } else {
        // t_m >= ||rho_m||^2 = sum_k u_mk^2, rotated-cone form; weights are
        // normalized so the objective stays O(1) for the solver.
        fsp.weight_scale = 0.0;
        for (int m : active.members) {
            fsp.weight_scale = std::max(fsp.weight_scale, objective.weights(m));
        }
        for (int a = 0; a < nA; ++a) {
            c(fsp.t_var(a)) = objective.weights(active.members[a]) / fsp.weight_scale;
            const int b = prog.add_block(conic::ConeType::Soc, K + 2,
                                         "ap_power_epigraph_" + std::to_string(active.members[a]));
            prog.add_coeff(b, 0, fsp.t_var(a), 0.5);
            prog.set_offset(b, 0, 0.5);
            for (int k = 0; k < K; ++k) {
                prog.add_coeff(b, 1 + k, fsp.u_var(a, k), 1.0);
            }
            prog.add_coeff(b, K + 1, fsp.t_var(a), 0.5);
            prog.set_offset(b, K + 1, -0.5);
            fsp.objective_blocks.push_back(b);
        }
    }
    prog.set_objective(c);

    fsp.sinr_blocks = add_sinr_cones(prog, scn, targets, active.members,
                                     [&fsp](int a, int k) { return fsp.u_var(a, k); },
                                     &fsp.sinr_scales);

    const double sqrt_pmax = std::sqrt(scn.config.p_max_w);
    for (int a = 0; a < nA; ++a) {
        const int b = prog.add_block(conic::ConeType::Soc, K + 1,
                                     "cap_ap_" + std::to_string(active.members[a]));
        prog.set_offset(b, 0, sqrt_pmax);
        for (int k = 0; k < K; ++k) {
            prog.add_coeff(b, 1 + k, fsp.u_var(a, k), 1.0);
        }
        fsp.cap_blocks.push_back(b);
    }
    return fsp;
}

namespace {

// Debug check of the epigraph bookkeeping: ||s_k||^2 must equal
// nu_k * (interference + noise) and (g_k'u_k)^2 the coherent numerator.
[[maybe_unused]] double max_identity_error(const FixedSetProgram &fsp, const Scenario &scn,
                                           const SinrTargets &targets,
                                           const Eigen::VectorXd &x,
                                           const PowerAllocation &alloc) {
    const Eigen::VectorXd s = sinr(alloc, fsp.active, scn);
    double worst = 0.0;
    const double N = scn.config.antennas_per_ap;
    for (int k = 0; k < fsp.n_users; ++k) {
        const int b = fsp.sinr_blocks[k];
        if (b < 0) {
            continue;
        }
        const auto &blk = fsp.program.block(b);
        Eigen::VectorXd y = blk.offset;
        for (const auto &t : blk.coeffs) {
            y(t.row()) += t.value() * x(t.col());
        }
        double coherent = 0.0;
        for (int a = 0; a < fsp.active.size(); ++a) {
            const int m = fsp.active.members[a];
            coherent += std::sqrt(alloc.rho(m, k) * scn.gamma(m, k));
        }
        const double numerator = N * coherent * coherent;
        const double denom = numerator / std::max(s(k), 1e-300);
        const double scale_sq = fsp.sinr_scales[k] * fsp.sinr_scales[k];
        const double head_sq = y(0) * y(0) * scale_sq;
        const double tail_sq = y.tail(y.size() - 1).squaredNorm() * scale_sq;
        worst = std::max(worst, std::abs(head_sq - numerator) / (1.0 + numerator));
        worst = std::max(worst, std::abs(tail_sq - targets.nu(k) * denom) /
                                    (1.0 + targets.nu(k) * denom));
    }
    return worst;
}

} // namespace

FixedSetResult solve_fixed_set(const Scenario &scn, const SinrTargets &targets,
                               const ActiveSet &active, const DesignObjective &objective,
                               const conic::SolverOptions &opts, const conic::Solver *solver) {
    FixedSetResult result;
    result.alloc = PowerAllocation(scn.ap_count(), scn.user_count());

    if (active.empty()) {
        if (!targets.all_zero()) {
            throw EmptyActiveSet("cannot meet positive SINR targets with no active AP");
        }
        result.status = conic::SolveStatus::Optimal;
        return result;
    }
    if (targets.all_zero()) {
        // No SINR constraint binds; the zero allocation is optimal.
        result.status = conic::SolveStatus::Optimal;
        result.objective = objective.mode == DesignMode::TotalPowerEpigraph
                               ? active.size() * scn.config.p_act_w
                               : 0.0;
        result.total_power_w = active.size() * scn.config.p_act_w;
        return result;
    }

    FixedSetProgram fsp = build_fixed_set_socp(scn, targets, active, objective);
    const conic::InteriorPointSolver default_solver;
    const conic::Solver &impl = solver ? *solver : default_solver;
    conic::ConicSolution sol = impl.solve(fsp.program, opts);

    result.status = sol.status;
    result.solver_iterations = sol.iterations;
    result.solver_residuals = sol.residuals;
    if (sol.status != conic::SolveStatus::Optimal) {
        return result;
    }

    for (int a = 0; a < active.size(); ++a) {
        for (int k = 0; k < scn.user_count(); ++k) {
            const double u = std::max(0.0, sol.x(fsp.u_var(a, k)));
            result.alloc.rho(active.members[a], k) = u * u;
        }
    }
    result.transmit_power_w = transmit_power(result.alloc, active);
    result.total_power_w =
        total_power(result.alloc, active, scn.config.delta, scn.config.p_act_w);
    if (objective.mode == DesignMode::TotalPowerEpigraph) {
        const double s_val = sol.x(fsp.s_var());
        result.objective = s_val * s_val;
    } else {
        double obj = 0.0;
        for (int m : active.members) {
            obj += objective.weights(m) * result.alloc.rho.row(m).sum();
        }
        result.objective = obj;
    }
    assert(max_identity_error(fsp, scn, targets, sol.x, result.alloc) < 1e-6);
    return result;
}

} // namespace cellfree
