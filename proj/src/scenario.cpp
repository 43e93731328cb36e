#include "cellfree/scenario.hpp"

#include "cellfree/errors.hpp"

#include "json.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

namespace cellfree {

namespace {
constexpr int kPlacementAttemptCap = 10000; // resamples per AP
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

void ScenarioConfig::validate() const {
    if (ap_count < 1 || user_count < 1 || antennas_per_ap < 1) {
        throw InvalidConfig("M, K and N must all be >= 1");
    }
    if (tau_p < 1 || tau_p >= tau_c) {
        throw InvalidConfig("need 1 <= tau_p < tau_c");
    }
    if (tau_p > user_count) {
        throw InvalidConfig("tau_p must not exceed the user count");
    }
    if (side_m <= 0.0 || min_ap_dist_m < 0.0) {
        throw InvalidConfig("side length must be positive, min AP distance nonnegative");
    }
    if (delta < 1.0) {
        throw InvalidConfig("amplifier inefficiency must be >= 1");
    }
    if (p_act_w < 0.0 || p_max_w <= 0.0 || noise_w <= 0.0) {
        throw InvalidConfig("powers must be positive (P_act may be zero)");
    }
    if (pilot_power_w <= 0.0) {
        throw InvalidConfig("pilot power must be positive");
    }
    if (!per_user_pilot_power_w.empty() &&
        static_cast<int>(per_user_pilot_power_w.size()) != user_count) {
        throw InvalidConfig("per-user pilot power list must have K entries");
    }
    if (!per_user_se_target.empty() &&
        static_cast<int>(per_user_se_target.size()) != user_count) {
        throw InvalidConfig("per-user SE target list must have K entries");
    }
    if (se_target < 0.0) {
        throw InvalidConfig("SE targets must be >= 0");
    }
    for (double xi : per_user_se_target) {
        if (xi < 0.0) {
            throw InvalidConfig("SE targets must be >= 0");
        }
    }
    if (shadowing.sigma_db < 0.0) {
        throw InvalidConfig("shadowing sigma must be >= 0");
    }
}

Eigen::VectorXd ScenarioConfig::pilot_powers() const {
    Eigen::VectorXd p(user_count);
    if (per_user_pilot_power_w.empty()) {
        p.setConstant(pilot_power_w);
    } else {
        for (int k = 0; k < user_count; ++k) {
            p(k) = per_user_pilot_power_w[k];
        }
    }
    return p;
}

Eigen::VectorXd ScenarioConfig::se_targets_vec() const {
    Eigen::VectorXd xi(user_count);
    if (per_user_se_target.empty()) {
        xi.setConstant(se_target);
    } else {
        for (int k = 0; k < user_count; ++k) {
            xi(k) = per_user_se_target[k];
        }
    }
    return xi;
}

double wrap_distance(const Point &a, const Point &b, double side_m) {
    if (side_m <= 0.0) {
        throw InvalidConfig("wrap distance needs a positive side length");
    }
    double best = std::numeric_limits<double>::infinity();
    for (int sx = -1; sx <= 1; ++sx) {
        for (int sy = -1; sy <= 1; ++sy) {
            const double dx = a[0] - (b[0] + sx * side_m);
            const double dy = a[1] - (b[1] + sy * side_m);
            best = std::min(best, std::hypot(dx, dy));
        }
    }
    return best;
}

std::pair<std::vector<Point>, std::vector<Point>>
generate_positions(const ScenarioConfig &config, RandomStream &rng) {
    config.validate();
    std::vector<Point> aps;
    aps.reserve(config.ap_count);
    for (int m = 0; m < config.ap_count; ++m) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttemptCap; ++attempt) {
            const Point candidate{rng.uniform(0.0, config.side_m),
                                  rng.uniform(0.0, config.side_m)};
            bool ok = true;
            for (const Point &other : aps) {
                if (wrap_distance(candidate, other, config.side_m) < config.min_ap_dist_m) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                aps.push_back(candidate);
                placed = true;
                break;
            }
        }
        if (!placed) {
            throw PlacementFailure("could not place AP " + std::to_string(m) + " after " +
                                   std::to_string(kPlacementAttemptCap) +
                                   " attempts; min_ap_dist_m is too large for the area");
        }
    }
    std::vector<Point> users;
    users.reserve(config.user_count);
    for (int k = 0; k < config.user_count; ++k) {
        users.push_back({rng.uniform(0.0, config.side_m), rng.uniform(0.0, config.side_m)});
    }
    return {std::move(aps), std::move(users)};
}

Eigen::MatrixXd large_scale_fading(const std::vector<Point> &ap_xy,
                                   const std::vector<Point> &user_xy,
                                   const ScenarioConfig &config, RandomStream &rng) {
    const int M = static_cast<int>(ap_xy.size());
    const int K = static_cast<int>(user_xy.size());
    Eigen::MatrixXd beta(M, K);

    // Independent N(0, sigma^2) per (m, k) by default. The correlated mode
    // splits the variance into a per-AP and a per-user component, each with
    // exponential spatial correlation 2^(-d / decorr), so one deeply shadowed
    // user stays shadowed towards every AP.
    Eigen::MatrixXd shadow_db(M, K);
    if (config.shadowing.correlated) {
        auto correlated_field = [&](const std::vector<Point> &points) {
            const int n = static_cast<int>(points.size());
            Eigen::MatrixXd corr(n, n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double d = wrap_distance(points[i], points[j], config.side_m);
                    corr(i, j) = std::pow(2.0, -d / config.shadowing.decorr_dist_m);
                }
                corr(i, i) += 1e-10;
            }
            const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(corr).matrixL();
            Eigen::VectorXd draws(n);
            for (int i = 0; i < n; ++i) {
                draws(i) = rng.normal();
            }
            return (chol * draws).eval();
        };
        const Eigen::VectorXd ap_field = correlated_field(ap_xy);
        const Eigen::VectorXd user_field = correlated_field(user_xy);
        const double half = std::sqrt(0.5) * config.shadowing.sigma_db;
        for (int m = 0; m < M; ++m) {
            for (int k = 0; k < K; ++k) {
                shadow_db(m, k) = half * (ap_field(m) + user_field(k));
            }
        }
    } else {
        for (int m = 0; m < M; ++m) {
            for (int k = 0; k < K; ++k) {
                shadow_db(m, k) = config.shadowing.sigma_db * rng.normal();
            }
        }
    }

    const double height = config.pathloss.ap_height_m;
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const double d2d = wrap_distance(ap_xy[m], user_xy[k], config.side_m);
            const double d3d = std::hypot(d2d, height);
            const double pl_db =
                config.pathloss.const_db - config.pathloss.exp_coef * std::log10(d3d);
            beta(m, k) = std::pow(10.0, (pl_db + shadow_db(m, k)) / 10.0);
        }
    }
    return beta;
}

std::vector<std::vector<int>> assign_pilots(int user_count, int tau_p, RandomStream &rng) {
    if (tau_p > user_count || tau_p < 1) {
        throw InvalidConfig("need 1 <= tau_p <= K for pilot assignment");
    }
    std::vector<int> users(user_count);
    for (int k = 0; k < user_count; ++k) {
        users[k] = k;
    }
    rng.shuffle(users);

    // Sizes as equal as possible, the +1 groups in random positions.
    std::vector<int> sizes(tau_p, user_count / tau_p);
    for (int i = 0; i < user_count % tau_p; ++i) {
        sizes[i] += 1;
    }
    rng.shuffle(sizes);

    std::vector<std::vector<int>> groups(tau_p);
    int next = 0;
    for (int g = 0; g < tau_p; ++g) {
        for (int i = 0; i < sizes[g]; ++i) {
            groups[g].push_back(users[next++]);
        }
        std::sort(groups[g].begin(), groups[g].end());
    }
    return groups;
}

Eigen::MatrixXd channel_estimate_quality(const Eigen::MatrixXd &beta,
                                         const std::vector<std::vector<int>> &pilot_groups,
                                         const ScenarioConfig &config) {
    const int M = static_cast<int>(beta.rows());
    const int K = static_cast<int>(beta.cols());
    const Eigen::VectorXd p = config.pilot_powers();
    if (p.size() != K) {
        throw ShapeMismatch("pilot power vector does not match beta");
    }
    Eigen::MatrixXd gamma(M, K);
    std::vector<int> group_of(K, -1);
    for (std::size_t g = 0; g < pilot_groups.size(); ++g) {
        for (int k : pilot_groups[g]) {
            group_of[k] = static_cast<int>(g);
        }
    }
    for (int k = 0; k < K; ++k) {
        if (group_of[k] < 0) {
            throw InvalidConfig("pilot groups do not cover every user");
        }
    }
    const double tau_p = static_cast<double>(config.tau_p);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            double denom = config.noise_w;
            for (int kp : pilot_groups[group_of[k]]) {
                denom += tau_p * p(kp) * beta(m, kp);
            }
            gamma(m, k) = tau_p * p(k) * beta(m, k) * beta(m, k) / denom;
        }
    }
    return gamma;
}

Scenario generate_scenario(const ScenarioConfig &config) {
    config.validate();
    RandomStream rng(config.seed);
    Scenario scn;
    scn.config = config;
    std::tie(scn.ap_xy, scn.user_xy) = generate_positions(config, rng);
    scn.beta = large_scale_fading(scn.ap_xy, scn.user_xy, config, rng);
    scn.pilot_groups = assign_pilots(config.user_count, config.tau_p, rng);
    scn.gamma = channel_estimate_quality(scn.beta, scn.pilot_groups, config);
    scn.pilot_of_user.assign(config.user_count, -1);
    for (std::size_t g = 0; g < scn.pilot_groups.size(); ++g) {
        for (int k : scn.pilot_groups[g]) {
            scn.pilot_of_user[k] = static_cast<int>(g);
        }
    }
    return scn;
}

// --- JSON ----------------------------------------------------------------

namespace {

using nlohmann::json;

json config_to_json_obj(const ScenarioConfig &c) {
    json j;
    j["ap_count"] = c.ap_count;
    j["user_count"] = c.user_count;
    j["antennas_per_ap"] = c.antennas_per_ap;
    j["side_m"] = c.side_m;
    j["min_ap_dist_m"] = c.min_ap_dist_m;
    j["tau_c"] = c.tau_c;
    j["tau_p"] = c.tau_p;
    j["pilot_power_w"] = c.pilot_power_w;
    if (!c.per_user_pilot_power_w.empty()) {
        j["per_user_pilot_power_w"] = c.per_user_pilot_power_w;
    }
    j["noise_w"] = c.noise_w;
    j["p_max_w"] = c.p_max_w;
    j["delta"] = c.delta;
    j["p_act_w"] = c.p_act_w;
    j["se_target"] = c.se_target;
    if (!c.per_user_se_target.empty()) {
        j["per_user_se_target"] = c.per_user_se_target;
    }
    j["pathloss"] = {{"const_db", c.pathloss.const_db},
                     {"exp_coef", c.pathloss.exp_coef},
                     {"ap_height_m", c.pathloss.ap_height_m}};
    j["shadowing"] = {{"sigma_db", c.shadowing.sigma_db},
                      {"correlated", c.shadowing.correlated},
                      {"decorr_dist_m", c.shadowing.decorr_dist_m}};
    j["seed"] = c.seed;
    return j;
}

ScenarioConfig config_from_json_obj(const json &j) {
    ScenarioConfig c;
    c.ap_count = j.value("ap_count", c.ap_count);
    c.user_count = j.value("user_count", c.user_count);
    c.antennas_per_ap = j.value("antennas_per_ap", c.antennas_per_ap);
    c.side_m = j.value("side_m", c.side_m);
    c.min_ap_dist_m = j.value("min_ap_dist_m", c.min_ap_dist_m);
    c.tau_c = j.value("tau_c", c.tau_c);
    c.tau_p = j.value("tau_p", c.tau_p);
    c.pilot_power_w = j.value("pilot_power_w", c.pilot_power_w);
    if (j.contains("per_user_pilot_power_w")) {
        c.per_user_pilot_power_w = j["per_user_pilot_power_w"].get<std::vector<double>>();
    }
    // Noise may be given in dBm at the interface boundary; watts win if both.
    if (j.contains("noise_w")) {
        c.noise_w = j["noise_w"].get<double>();
    } else if (j.contains("noise_dbm")) {
        c.noise_w = dbm_to_watt(j["noise_dbm"].get<double>());
    }
    c.p_max_w = j.value("p_max_w", c.p_max_w);
    c.delta = j.value("delta", c.delta);
    c.p_act_w = j.value("p_act_w", c.p_act_w);
    c.se_target = j.value("se_target", c.se_target);
    if (j.contains("per_user_se_target")) {
        c.per_user_se_target = j["per_user_se_target"].get<std::vector<double>>();
    }
    if (j.contains("pathloss")) {
        const json &p = j["pathloss"];
        c.pathloss.const_db = p.value("const_db", c.pathloss.const_db);
        c.pathloss.exp_coef = p.value("exp_coef", c.pathloss.exp_coef);
        c.pathloss.ap_height_m = p.value("ap_height_m", c.pathloss.ap_height_m);
    }
    if (j.contains("shadowing")) {
        const json &s = j["shadowing"];
        c.shadowing.sigma_db = s.value("sigma_db", c.shadowing.sigma_db);
        c.shadowing.correlated = s.value("correlated", c.shadowing.correlated);
        c.shadowing.decorr_dist_m = s.value("decorr_dist_m", c.shadowing.decorr_dist_m);
    }
    c.seed = j.value("seed", c.seed);
    return c;
}

} // namespace

std::string ScenarioConfig::to_json() const { return config_to_json_obj(*this).dump(2); }

ScenarioConfig ScenarioConfig::from_json(const std::string &text) {
    return config_from_json_obj(json::parse(text));
}

std::string Scenario::to_json() const {
    json j;
    j["config"] = config_to_json_obj(config);
    j["shadowing_mode"] = config.shadowing.correlated ? "correlated" : "independent";
    json aps = json::array();
    for (const Point &p : ap_xy) {
        aps.push_back({p[0], p[1]});
    }
    j["ap_xy"] = std::move(aps);
    json users = json::array();
    for (const Point &p : user_xy) {
        users.push_back({p[0], p[1]});
    }
    j["user_xy"] = std::move(users);
    json beta_db = json::array();
    for (int m = 0; m < beta.rows(); ++m) {
        json row = json::array();
        for (int k = 0; k < beta.cols(); ++k) {
            row.push_back(10.0 * std::log10(beta(m, k)));
        }
        beta_db.push_back(std::move(row));
    }
    j["beta_db"] = std::move(beta_db);
    j["pilot_groups"] = pilot_groups;
    return j.dump(2);
}

Scenario Scenario::from_json(const std::string &text) {
    const json j = json::parse(text);
    Scenario scn;
    scn.config = config_from_json_obj(j.at("config"));
    for (const auto &p : j.at("ap_xy")) {
        scn.ap_xy.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    for (const auto &p : j.at("user_xy")) {
        scn.user_xy.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    const auto &beta_db = j.at("beta_db");
    const int M = static_cast<int>(beta_db.size());
    const int K = M > 0 ? static_cast<int>(beta_db.at(0).size()) : 0;
    scn.beta.resize(M, K);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            scn.beta(m, k) = std::pow(10.0, beta_db.at(m).at(k).get<double>() / 10.0);
        }
    }
    scn.pilot_groups = j.at("pilot_groups").get<std::vector<std::vector<int>>>();
    scn.gamma = channel_estimate_quality(scn.beta, scn.pilot_groups, scn.config);
    scn.pilot_of_user.assign(K, -1);
    for (std::size_t g = 0; g < scn.pilot_groups.size(); ++g) {
        for (int k : scn.pilot_groups[g]) {
            scn.pilot_of_user[k] = static_cast<int>(g);
        }
    }
    return scn;
}

} // namespace cellfree
