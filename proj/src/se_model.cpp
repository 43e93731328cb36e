#include "cellfree/se_model.hpp"

#include "cellfree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cellfree {

namespace {
constexpr double kSinrSlackTol = 1e-6; // relative SINR slack accepted as met
constexpr double kCapSlackTol = 1e-8;  // cap slack relative to P_max
} // namespace

ActiveSet::ActiveSet(std::vector<int> aps) : members(std::move(aps)) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (!members.empty() && members.front() < 0) {
        throw InvalidConfig("AP indices must be nonnegative");
    }
}

ActiveSet ActiveSet::all(int ap_count) {
    ActiveSet set;
    set.members.resize(ap_count);
    for (int m = 0; m < ap_count; ++m) {
        set.members[m] = m;
    }
    return set;
}

bool ActiveSet::contains(int ap) const {
    return std::binary_search(members.begin(), members.end(), ap);
}

std::uint32_t ActiveSet::mask() const {
    std::uint32_t mask = 0;
    for (int m : members) {
        mask |= 1u << m;
    }
    return mask;
}

SinrTargets se_target_to_sinr(const Eigen::VectorXd &xi, int tau_c, int tau_p) {
    if (tau_p >= tau_c) {
        throw InvalidConfig("need tau_p < tau_c");
    }
    SinrTargets targets;
    targets.nu.resize(xi.size());
    const double factor = static_cast<double>(tau_c) / (tau_c - tau_p);
    for (int k = 0; k < xi.size(); ++k) {
        targets.nu(k) = std::exp2(xi(k) * factor) - 1.0;
    }
    return targets;
}

namespace {

void check_shapes(const PowerAllocation &alloc, const ActiveSet &active, const Scenario &scn) {
    if (alloc.rho.rows() != scn.ap_count() || alloc.rho.cols() != scn.user_count()) {
        throw ShapeMismatch("allocation dimensions do not match the scenario");
    }
    if (!active.empty() && active.members.back() >= scn.ap_count()) {
        throw ShapeMismatch("active set references an AP outside the scenario");
    }
}

} // namespace

Eigen::VectorXd sinr(const PowerAllocation &alloc, const ActiveSet &active,
                     const Scenario &scn) {
    check_shapes(alloc, active, scn);
    const int K = scn.user_count();
    const double N = scn.config.antennas_per_ap;
    Eigen::VectorXd out(K);

    for (int k = 0; k < K; ++k) {
        double coherent = 0.0;
        for (int m : active.members) {
            coherent += std::sqrt(alloc.rho(m, k) * scn.gamma(m, k));
        }
        const double numerator = N * coherent * coherent;

        double denom = scn.config.noise_w;
        // Coherent interference from pilot-sharing users, through the
        // victim's own estimate quality gamma_mk.
        for (int kp : scn.pilot_groups[scn.pilot_of_user[k]]) {
            if (kp == k) {
                continue;
            }
            double coh = 0.0;
            for (int m : active.members) {
                coh += std::sqrt(alloc.rho(m, kp) * scn.gamma(m, k));
            }
            denom += N * coh * coh;
        }
        // Non-coherent interference from every user, own signal included.
        for (int kp = 0; kp < K; ++kp) {
            for (int m : active.members) {
                denom += alloc.rho(m, kp) * scn.beta(m, k);
            }
        }
        out(k) = numerator / denom;
    }
    return out;
}

Eigen::VectorXd se(const PowerAllocation &alloc, const ActiveSet &active, const Scenario &scn) {
    const Eigen::VectorXd s = sinr(alloc, active, scn);
    const double prefactor =
        1.0 - static_cast<double>(scn.config.tau_p) / static_cast<double>(scn.config.tau_c);
    return (prefactor * (s.array() + 1.0).log() / std::log(2.0)).matrix();
}

double transmit_power(const PowerAllocation &alloc, const ActiveSet &active) {
    double sum = 0.0;
    for (int m : active.members) {
        sum += alloc.rho.row(m).sum();
    }
    return sum;
}

double total_power(const PowerAllocation &alloc, const ActiveSet &active, double delta,
                   double p_act) {
    return delta * transmit_power(alloc, active) + active.size() * p_act;
}

FeasibilityReport check_feasible(const PowerAllocation &alloc, const ActiveSet &active,
                                 const Scenario &scn, const SinrTargets &targets) {
    check_shapes(alloc, active, scn);
    if (targets.nu.size() != scn.user_count()) {
        throw ShapeMismatch("target vector does not match the scenario");
    }
    const int M = scn.ap_count();
    const int K = scn.user_count();
    const double inf = std::numeric_limits<double>::infinity();

    FeasibilityReport rep;
    rep.sinr = sinr(alloc, active, scn);
    rep.sinr_slack_rel.resize(K);
    rep.sinr_ok = true;
    for (int k = 0; k < K; ++k) {
        if (targets.nu(k) > 0.0) {
            rep.sinr_slack_rel(k) = (rep.sinr(k) - targets.nu(k)) / targets.nu(k);
            if (rep.sinr_slack_rel(k) < -kSinrSlackTol) {
                rep.sinr_ok = false;
            }
        } else {
            rep.sinr_slack_rel(k) = inf;
        }
    }

    rep.ap_load_w.resize(M);
    rep.cap_slack_w.resize(M);
    rep.caps_ok = true;
    rep.inactive_zero_ok = true;
    for (int m = 0; m < M; ++m) {
        rep.ap_load_w(m) = alloc.rho.row(m).sum();
        if (active.contains(m)) {
            rep.cap_slack_w(m) = scn.config.p_max_w - rep.ap_load_w(m);
            if (rep.cap_slack_w(m) < -kCapSlackTol * scn.config.p_max_w) {
                rep.caps_ok = false;
            }
        } else {
            rep.cap_slack_w(m) = inf;
            if (rep.ap_load_w(m) != 0.0) {
                rep.inactive_zero_ok = false;
            }
        }
        if (alloc.rho.row(m).minCoeff() < 0.0) {
            rep.caps_ok = false;
        }
    }

    rep.min_sinr_slack_rel = K > 0 ? rep.sinr_slack_rel.minCoeff() : inf;
    rep.min_cap_slack_w = M > 0 ? rep.cap_slack_w.minCoeff() : inf;
    rep.feasible = rep.sinr_ok && rep.caps_ok && rep.inactive_zero_ok;
    return rep;
}

} // namespace cellfree
