#include "cellfree/sparsity.hpp"

#include "cellfree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cellfree {

Eigen::VectorXd update_weights(const Eigen::VectorXd &ap_power_w, double eps, double delta,
                               double p_tilde) {
    if (eps <= 0.0) {
        throw InvalidConfig("damping constant must be positive");
    }
    const double exponent = p_tilde / 2.0 - 1.0;
    const double factor = delta * p_tilde / 2.0;
    return (factor * (ap_power_w.array() + eps * eps).pow(exponent)).matrix();
}

double lp_objective(const Eigen::VectorXd &ap_power_w, double delta, double p_act,
                    double p_tilde) {
    const double q = p_tilde / 2.0;
    double sum = 0.0;
    for (int m = 0; m < ap_power_w.size(); ++m) {
        sum += delta * std::pow(std::max(0.0, ap_power_w(m)), q);
    }
    sum += std::pow(p_act, q);
    return std::pow(sum, 1.0 / q);
}

IrlsResult irls(const Scenario &scn, const SinrTargets &targets, const IrlsOptions &opts) {
    if (opts.p_tilde <= 0.0 || opts.p_tilde > 2.0) {
        throw InvalidConfig("need 0 < p_tilde <= 2");
    }
    const int M = scn.ap_count();
    const int K = scn.user_count();

    IrlsResult result;
    result.alloc = PowerAllocation(M, K);
    if (targets.all_zero()) {
        result.status = conic::SolveStatus::Optimal;
        result.ranking.resize(M);
        for (int m = 0; m < M; ++m) {
            result.ranking[m] = m;
        }
        return result;
    }

    const double zero_threshold = opts.zero_threshold_factor * scn.config.p_max_w;
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(M); // a_m^(0) = 1
    std::vector<bool> frozen(M, false);
    std::vector<int> frozen_list;
    double eps = opts.eps0_factor * std::sqrt(scn.config.p_max_w);
    double prev_obj = std::numeric_limits<double>::infinity();

    for (int n = 1; n <= opts.max_iterations; ++n) {
        std::vector<int> members;
        for (int m = 0; m < M; ++m) {
            if (!frozen[m]) {
                members.push_back(m);
            }
        }
        const ActiveSet active(std::move(members));
        const FixedSetResult solve =
            solve_fixed_set(scn, targets, active, DesignObjective::weighted(weights),
                            opts.solver);
        if (solve.status != conic::SolveStatus::Optimal) {
            result.status = solve.status;
            result.iterations = n - 1;
            return result;
        }

        Eigen::VectorXd ap_power = solve.alloc.rho.rowwise().sum();
        if (opts.freeze_off_aps) {
            for (int m = 0; m < M; ++m) {
                if (!frozen[m] && ap_power(m) < zero_threshold) {
                    frozen[m] = true;
                    frozen_list.push_back(m);
                }
            }
        }

        IrlsState state;
        state.iteration = n;
        state.weights = weights;
        state.eps = eps;
        state.alloc = solve.alloc;
        state.ap_power_w = ap_power;
        state.objective_lp =
            lp_objective(ap_power, scn.config.delta, scn.config.p_act_w, opts.p_tilde);
        state.active_count =
            static_cast<int>((ap_power.array() >= zero_threshold).count());
        state.frozen_off = frozen_list;
        result.history.push_back(state);
        result.alloc = solve.alloc;
        result.iterations = n;

        const double rel_change =
            std::abs(state.objective_lp - prev_obj) / std::max(std::abs(prev_obj), 1e-12);
        prev_obj = state.objective_lp;
        if (n > 1 && rel_change < opts.stop_rel_change) {
            break;
        }

        weights = update_weights(ap_power, eps, scn.config.delta, opts.p_tilde);
        eps = std::max(eps * opts.eps_decay, opts.eps_floor);
    }

    result.status = conic::SolveStatus::Optimal;
    const Eigen::VectorXd final_power = result.alloc.rho.rowwise().sum();
    result.ranking.resize(M);
    for (int m = 0; m < M; ++m) {
        result.ranking[m] = m;
    }
    std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](int a, int b) {
        if (final_power(a) != final_power(b)) {
            return final_power(a) > final_power(b);
        }
        return a < b;
    });
    return result;
}

SelectionResult select_active_by_bisection(const Scenario &scn, const SinrTargets &targets,
                                           const std::vector<int> &ranking,
                                           const conic::SolverOptions &opts) {
    const int M = scn.ap_count();
    if (static_cast<int>(ranking.size()) != M) {
        throw ShapeMismatch("ranking must cover all APs");
    }

    SelectionResult result;
    result.alloc = PowerAllocation(M, scn.user_count());
    if (targets.all_zero()) {
        result.status = conic::SolveStatus::Optimal;
        return result;
    }

    std::map<int, FixedSetResult> by_prefix;
    auto solve_prefix = [&](int len) -> const FixedSetResult & {
        auto it = by_prefix.find(len);
        if (it == by_prefix.end()) {
            ++result.fixed_set_solves;
            const ActiveSet set(std::vector<int>(ranking.begin(), ranking.begin() + len));
            it = by_prefix
                     .emplace(len, solve_fixed_set(scn, targets, set,
                                                   DesignObjective::total_power(), opts))
                     .first;
        }
        return it->second;
    };

    // The largest prefix decides overall feasibility; prefixes grow
    // monotonically feasible, which makes the bisection valid.
    if (solve_prefix(M).status != conic::SolveStatus::Optimal) {
        result.status = solve_prefix(M).status;
        return result;
    }
    int lo = 1, hi = M;
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (solve_prefix(mid).status == conic::SolveStatus::Optimal) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    result.l_min = lo;

    // Local descent: accept longer prefixes while the total power strictly
    // drops; the first non-improvement stops the walk.
    int best_len = lo;
    double best_power = solve_prefix(lo).total_power_w;
    for (int len = lo + 1; len <= M; ++len) {
        const double power = solve_prefix(len).total_power_w;
        if (power < best_power) {
            best_len = len;
            best_power = power;
        } else {
            break;
        }
    }

    const FixedSetResult &best = solve_prefix(best_len);
    result.status = conic::SolveStatus::Optimal;
    result.active = ActiveSet(std::vector<int>(ranking.begin(), ranking.begin() + best_len));
    result.alloc = best.alloc;
    result.total_power_w = best.total_power_w;
    result.transmit_power_w = best.transmit_power_w;
    return result;
}

SparsityPipelineResult sparsity_pipeline(const Scenario &scn, const SinrTargets &targets,
                                         const IrlsOptions &opts) {
    SparsityPipelineResult result;
    const IrlsResult ir = irls(scn, targets, opts);
    result.irls_iterations = ir.iterations;
    result.irls_history = ir.history;
    if (ir.status != conic::SolveStatus::Optimal) {
        result.status = ir.status;
        return result;
    }
    if (targets.all_zero()) {
        result.status = conic::SolveStatus::Optimal;
        result.alloc = PowerAllocation(scn.ap_count(), scn.user_count());
        return result;
    }
    const SelectionResult sel =
        select_active_by_bisection(scn, targets, ir.ranking, opts.solver);
    result.status = sel.status;
    result.active = sel.active;
    result.alloc = sel.alloc;
    result.total_power_w = sel.total_power_w;
    result.transmit_power_w = sel.transmit_power_w;
    result.l_min = sel.l_min;
    return result;
}

} // namespace cellfree
