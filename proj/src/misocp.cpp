#include "cellfree/misocp.hpp"

#include "cellfree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace cellfree {

namespace {

constexpr double kIntegralTol = 1e-6;

struct RelaxationProgram {
    conic::ConicProgram program;
    std::vector<int> candidates; // fixed_on + free, sorted AP ids
    std::vector<int> free_aps;   // sorted
    int n_users = 0;
    int n_on = 0;
    ActivationRelaxation form{};

    int u_var(int local, int k) const { return local * n_users + k; }
    int alpha_var(int free_local) const {
        return static_cast<int>(candidates.size()) * n_users + free_local;
    }
    int scalar_var() const { // s (sqrt form) or w (linear form)
        return static_cast<int>(candidates.size()) * n_users +
               static_cast<int>(free_aps.size());
    }
};

RelaxationProgram build_relaxation(const BnbNode &node, const Scenario &scn,
                                   const SinrTargets &targets, ActivationRelaxation form) {
    const int K = scn.user_count();
    RelaxationProgram rp{conic::ConicProgram(1)};
    rp.n_users = K;
    rp.n_on = static_cast<int>(node.fixed_on.size());
    rp.form = form;
    rp.candidates = node.fixed_on;
    rp.candidates.insert(rp.candidates.end(), node.free.begin(), node.free.end());
    std::sort(rp.candidates.begin(), rp.candidates.end());
    rp.free_aps = node.free;
    std::sort(rp.free_aps.begin(), rp.free_aps.end());

    const int nc = static_cast<int>(rp.candidates.size());
    const int nf = static_cast<int>(rp.free_aps.size());
    if (nc == 0) {
        throw EmptyActiveSet("relaxation with no candidate AP");
    }
    const int n_u = nc * K;
    const int n_vars = n_u + nf + 1;
    rp.program = conic::ConicProgram(n_vars);
    conic::ConicProgram &prog = rp.program;

    // u >= 0, alpha in [0, 1].
    const int orthant = prog.add_block(conic::ConeType::Orthant, n_u + 2 * nf, "bounds");
    for (int i = 0; i < n_u; ++i) {
        prog.add_coeff(orthant, i, i, 1.0);
    }
    for (int f = 0; f < nf; ++f) {
        prog.add_coeff(orthant, n_u + 2 * f, rp.alpha_var(f), 1.0);
        prog.add_coeff(orthant, n_u + 2 * f + 1, rp.alpha_var(f), -1.0);
        prog.set_offset(orthant, n_u + 2 * f + 1, 1.0);
    }

    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_vars);
    const double sqrt_delta = std::sqrt(scn.config.delta);
    const double p_act = scn.config.p_act_w;
    if (form == ActivationRelaxation::SqrtActivation) {
        // || [ sqrt(Delta) u ; sqrt(P_act) alpha ; sqrt(n_on P_act) ] || <= s
        c(rp.scalar_var()) = 1.0;
        const int dim = 1 + n_u + nf + (rp.n_on > 0 ? 1 : 0);
        const int b = prog.add_block(conic::ConeType::Soc, dim, "activation_epigraph");
        prog.add_coeff(b, 0, rp.scalar_var(), 1.0);
        for (int i = 0; i < n_u; ++i) {
            prog.add_coeff(b, 1 + i, i, sqrt_delta);
        }
        for (int f = 0; f < nf; ++f) {
            prog.add_coeff(b, 1 + n_u + f, rp.alpha_var(f), std::sqrt(p_act));
        }
        if (rp.n_on > 0) {
            prog.set_offset(b, dim - 1, std::sqrt(rp.n_on * p_act));
        }
    } else {
        // w >= Delta sum u^2 plus linear activation cost in the objective.
        c(rp.scalar_var()) = 1.0;
        for (int f = 0; f < nf; ++f) {
            c(rp.alpha_var(f)) = p_act;
        }
        const int b = prog.add_block(conic::ConeType::Soc, n_u + 2, "transmit_epigraph");
        prog.add_coeff(b, 0, rp.scalar_var(), 0.5);
        prog.set_offset(b, 0, 0.5);
        for (int i = 0; i < n_u; ++i) {
            prog.add_coeff(b, 1 + i, i, sqrt_delta);
        }
        prog.add_coeff(b, n_u + 1, rp.scalar_var(), 0.5);
        prog.set_offset(b, n_u + 1, -0.5);
    }
    prog.set_objective(c);

    add_sinr_cones(prog, scn, targets, rp.candidates,
                   [&rp](int a, int k) { return rp.u_var(a, k); });

    const double sqrt_pmax = std::sqrt(scn.config.p_max_w);
    for (int a = 0; a < nc; ++a) {
        const int ap = rp.candidates[a];
        const int b =
            prog.add_block(conic::ConeType::Soc, K + 1, "cap_ap_" + std::to_string(ap));
        const auto free_pos =
            std::lower_bound(rp.free_aps.begin(), rp.free_aps.end(), ap);
        if (free_pos != rp.free_aps.end() && *free_pos == ap) {
            const int f = static_cast<int>(free_pos - rp.free_aps.begin());
            prog.add_coeff(b, 0, rp.alpha_var(f), sqrt_pmax);
        } else {
            prog.set_offset(b, 0, sqrt_pmax);
        }
        for (int k = 0; k < K; ++k) {
            prog.add_coeff(b, 1 + k, rp.u_var(a, k), 1.0);
        }
    }
    return rp;
}

} // namespace

conic::ConicProgram build_node_relaxation(const BnbNode &node, const Scenario &scn,
                                          const SinrTargets &targets,
                                          ActivationRelaxation form) {
    return build_relaxation(node, scn, targets, form).program;
}

RelaxationResult relax_node(const BnbNode &node, const Scenario &scn, const SinrTargets &targets,
                            const BnbOptions &opts) {
    const int M = scn.ap_count();
    RelaxationResult result;
    result.alpha = Eigen::VectorXd::Zero(M);
    result.ap_power_w = Eigen::VectorXd::Zero(M);
    result.alloc = PowerAllocation(M, scn.user_count());
    for (int m : node.fixed_on) {
        result.alpha(m) = 1.0;
    }

    RelaxationProgram rp = build_relaxation(node, scn, targets, opts.relaxation);
    const conic::ConicSolution sol = conic::solve(rp.program, opts.solver);
    result.status = sol.status;
    if (sol.status != conic::SolveStatus::Optimal) {
        return result;
    }

    const int K = scn.user_count();
    for (std::size_t a = 0; a < rp.candidates.size(); ++a) {
        const int m = rp.candidates[a];
        double load = 0.0;
        for (int k = 0; k < K; ++k) {
            const double u = std::max(0.0, sol.x(rp.u_var(static_cast<int>(a), k)));
            result.alloc.rho(m, k) = u * u;
            load += u * u;
        }
        result.ap_power_w(m) = load;
    }
    for (std::size_t f = 0; f < rp.free_aps.size(); ++f) {
        result.alpha(rp.free_aps[f]) =
            std::clamp(sol.x(rp.alpha_var(static_cast<int>(f))), 0.0, 1.0);
    }
    if (opts.relaxation == ActivationRelaxation::SqrtActivation) {
        const double s_val = sol.x(rp.scalar_var());
        result.lower_bound = s_val * s_val;
    } else {
        result.lower_bound = sol.primal_objective + rp.n_on * scn.config.p_act_w;
    }
    return result;
}

namespace {

class FixedSetCache {
  public:
    FixedSetCache(const Scenario &scn, const SinrTargets &targets,
                  const conic::SolverOptions &opts)
        : scn_(scn), targets_(targets), opts_(opts) {}

    const FixedSetResult &solve(const ActiveSet &set, int &solve_counter) {
        const std::uint32_t key = set.mask();
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            ++solve_counter;
            it = cache_
                     .emplace(key, solve_fixed_set(scn_, targets_, set,
                                                   DesignObjective::total_power(), opts_))
                     .first;
        }
        return it->second;
    }

  private:
    const Scenario &scn_;
    const SinrTargets &targets_;
    conic::SolverOptions opts_;
    std::map<std::uint32_t, FixedSetResult> cache_;
};

struct QueueEntry {
    BnbNode node;
    RelaxationResult relax;
    std::uint64_t id = 0;
};

struct EntryOrder {
    bool operator()(const QueueEntry &a, const QueueEntry &b) const {
        if (a.node.lower_bound != b.node.lower_bound) {
            return a.node.lower_bound > b.node.lower_bound; // min-heap
        }
        return a.id > b.id;
    }
};

bool is_integral(const RelaxationResult &relax, const std::vector<int> &free) {
    for (int m : free) {
        const double a = relax.alpha(m);
        if (std::min(a, 1.0 - a) > kIntegralTol) {
            return false;
        }
    }
    return true;
}

ActiveSet rounded_set(const RelaxationResult &relax, const BnbNode &node, double threshold) {
    std::vector<int> members = node.fixed_on;
    for (int m : node.free) {
        if (relax.alpha(m) >= threshold) {
            members.push_back(m);
        }
    }
    return ActiveSet(std::move(members));
}

} // namespace

BnbResult solve_misocp(const Scenario &scn, const SinrTargets &targets, const BnbOptions &opts) {
    if (targets.nu.size() != scn.user_count()) {
        throw ShapeMismatch("target vector does not match the scenario");
    }
    const int M = scn.ap_count();
    if (M > 32) {
        throw CapExceeded("branch-and-bound supports at most 32 APs");
    }

    BnbResult result;
    result.alloc = PowerAllocation(M, scn.user_count());
    if (targets.all_zero()) {
        result.nodes_explored = 1;
        return result;
    }

    FixedSetCache cache(scn, targets, opts.solver);
    int relaxations = 0;

    // Feasibility with every AP on gates the whole search.
    const FixedSetResult &all_on = cache.solve(ActiveSet::all(M), relaxations);
    if (all_on.status == conic::SolveStatus::Infeasible) {
        throw GlobalInfeasible("SE targets unreachable even with all APs active");
    }
    if (all_on.status != conic::SolveStatus::Optimal) {
        throw std::runtime_error("all-on design solve failed: " + to_string(all_on.status));
    }

    ActiveSet best_set = ActiveSet::all(M);
    double incumbent = all_on.total_power_w;

    auto try_incumbent = [&](const ActiveSet &set) {
        if (set.empty()) {
            return;
        }
        const FixedSetResult &r = cache.solve(set, relaxations);
        if (r.status == conic::SolveStatus::Optimal && r.total_power_w < incumbent) {
            incumbent = r.total_power_w;
            best_set = set;
        }
    };

    // Rounding heuristic: threshold at 1/2, then repair by adding APs in
    // descending relaxed power until the design is feasible.
    auto rounding_heuristic = [&](const QueueEntry &entry) {
        ActiveSet set = rounded_set(entry.relax, entry.node, 0.5);
        if (set.empty()) {
            return;
        }
        std::vector<int> absent;
        for (int m : entry.node.free) {
            if (!set.contains(m)) {
                absent.push_back(m);
            }
        }
        std::sort(absent.begin(), absent.end(), [&](int a, int b) {
            if (entry.relax.ap_power_w(a) != entry.relax.ap_power_w(b)) {
                return entry.relax.ap_power_w(a) > entry.relax.ap_power_w(b);
            }
            return a < b;
        });
        while (true) {
            const FixedSetResult &r = cache.solve(set, relaxations);
            if (r.status == conic::SolveStatus::Optimal) {
                if (r.total_power_w < incumbent) {
                    incumbent = r.total_power_w;
                    best_set = set;
                }
                return;
            }
            if (absent.empty()) {
                return;
            }
            std::vector<int> members = set.members;
            members.push_back(absent.front());
            absent.erase(absent.begin());
            set = ActiveSet(std::move(members));
        }
    };

    std::priority_queue<QueueEntry, std::vector<QueueEntry>, EntryOrder> queue;
    std::uint64_t next_id = 0;

    BnbNode root;
    for (int m = 0; m < M; ++m) {
        root.free.push_back(m);
    }
    RelaxationResult root_relax = relax_node(root, scn, targets, opts);
    ++relaxations;
    double best_open_bound = incumbent;

    auto enqueue = [&](BnbNode node, RelaxationResult relax) {
        node.lower_bound = std::max(node.lower_bound, relax.lower_bound);
        if (opts.trace) {
            *opts.trace << "node id=" << next_id << " depth=" << node.depth
                        << " bound=" << node.lower_bound << " on=" << node.fixed_on.size()
                        << " off=" << node.fixed_off.size() << "\n";
        }
        queue.push(QueueEntry{std::move(node), std::move(relax), next_id++});
    };

    if (root_relax.status == conic::SolveStatus::Optimal) {
        if (is_integral(root_relax, root.free)) {
            try_incumbent(rounded_set(root_relax, root, 0.5));
        } else {
            enqueue(std::move(root), std::move(root_relax));
        }
    } else if (root_relax.status != conic::SolveStatus::Infeasible) {
        throw std::runtime_error("root relaxation failed: " + to_string(root_relax.status));
    }

    result.status = BnbResult::Status::Optimal;
    while (!queue.empty()) {
        const double gap_limit = std::max(opts.abs_gap_w, opts.rel_gap * std::abs(incumbent));
        QueueEntry entry = queue.top();
        queue.pop();
        ++result.nodes_explored;

        if (entry.node.lower_bound >= incumbent - gap_limit) {
            best_open_bound = entry.node.lower_bound;
            break; // best-bound order: everything left is at least as bad
        }
        if (result.nodes_explored >= opts.max_nodes) {
            best_open_bound = entry.node.lower_bound;
            result.status = BnbResult::Status::NodeLimit;
            break;
        }

        rounding_heuristic(entry);

        // Branch on the most fractional activation, ties to the AP carrying
        // more relaxed power.
        int branch_ap = -1;
        double best_frac = -1.0;
        for (int m : entry.node.free) {
            const double frac = std::min(entry.relax.alpha(m), 1.0 - entry.relax.alpha(m));
            const bool better =
                frac > best_frac + 1e-12 ||
                (std::abs(frac - best_frac) <= 1e-12 && branch_ap >= 0 &&
                 entry.relax.ap_power_w(m) > entry.relax.ap_power_w(branch_ap));
            if (branch_ap < 0 || better) {
                branch_ap = m;
                best_frac = frac;
            }
        }
        if (branch_ap < 0) {
            continue; // no free variable left; bound was exact
        }

        for (const int value : {1, 0}) {
            BnbNode child;
            child.fixed_on = entry.node.fixed_on;
            child.fixed_off = entry.node.fixed_off;
            for (int m : entry.node.free) {
                if (m != branch_ap) {
                    child.free.push_back(m);
                }
            }
            (value == 1 ? child.fixed_on : child.fixed_off).push_back(branch_ap);
            std::sort(child.fixed_on.begin(), child.fixed_on.end());
            std::sort(child.fixed_off.begin(), child.fixed_off.end());
            child.depth = entry.node.depth + 1;
            child.lower_bound = entry.node.lower_bound;

            if (child.fixed_on.empty() && child.free.empty()) {
                continue; // empty selection cannot meet positive targets
            }
            RelaxationResult relax = relax_node(child, scn, targets, opts);
            ++relaxations;
            if (relax.status == conic::SolveStatus::Infeasible) {
                continue; // prune the subtree
            }
            if (relax.status != conic::SolveStatus::Optimal) {
                // Numerical hiccup: keep searching with the parent bound.
                relax = entry.relax;
            }
            if (is_integral(relax, child.free)) {
                try_incumbent(rounded_set(relax, child, 0.5));
                continue;
            }
            enqueue(std::move(child), std::move(relax));
        }
    }
    if (queue.empty()) {
        best_open_bound = incumbent;
    }

    result.relaxations_solved = relaxations;
    result.proof_gap_w = std::max(0.0, incumbent - std::min(best_open_bound, incumbent));
    result.active = best_set;
    const FixedSetResult &final_solve = cache.solve(best_set, relaxations);
    result.alloc = final_solve.alloc;
    result.total_power_w = final_solve.total_power_w;
    result.transmit_power_w = final_solve.transmit_power_w;
    result.relaxations_solved = relaxations;
    return result;
}

BnbResult exhaustive_oracle(const Scenario &scn, const SinrTargets &targets,
                            const conic::SolverOptions &opts, int hard_cap) {
    if (targets.nu.size() != scn.user_count()) {
        throw ShapeMismatch("target vector does not match the scenario");
    }
    const int M = scn.ap_count();
    if (M > hard_cap || M > 31) {
        throw CapExceeded("exhaustive search capped at " + std::to_string(hard_cap) + " APs");
    }

    BnbResult result;
    result.alloc = PowerAllocation(M, scn.user_count());
    const bool include_empty = targets.all_zero();

    double best = std::numeric_limits<double>::infinity();
    ActiveSet best_set;
    PowerAllocation best_alloc(M, scn.user_count());
    double best_transmit = 0.0;
    bool found = false;

    if (include_empty) {
        best = 0.0;
        best_set = ActiveSet();
        found = true;
    }
    for (std::uint32_t mask = 1; mask < (1u << M); ++mask) {
        std::vector<int> members;
        for (int m = 0; m < M; ++m) {
            if (mask & (1u << m)) {
                members.push_back(m);
            }
        }
        const ActiveSet set(std::move(members));
        const FixedSetResult r =
            solve_fixed_set(scn, targets, set, DesignObjective::total_power(), opts);
        ++result.relaxations_solved;
        ++result.nodes_explored;
        if (r.status == conic::SolveStatus::Optimal && r.total_power_w < best) {
            best = r.total_power_w;
            best_set = set;
            best_alloc = r.alloc;
            best_transmit = r.transmit_power_w;
            found = true;
        }
    }
    if (!found) {
        throw GlobalInfeasible("no AP subset can meet the SE targets");
    }
    result.active = best_set;
    result.alloc = best_alloc;
    result.total_power_w = best;
    result.transmit_power_w = best_transmit;
    return result;
}

} // namespace cellfree
