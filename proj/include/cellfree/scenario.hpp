#pragma once

#include "cellfree/rng.hpp"

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cellfree {

using Point = std::array<double, 2>;

/// Converts a dBm level to linear watts (and back).
double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

struct PathlossParams {
    double const_db = -30.5;   // pathloss at 1 m
    double exp_coef = 36.7;    // multiplies log10(d / 1 m)
    double ap_height_m = 10.0; // vertical offset entering the 3-D distance
};

struct ShadowingParams {
    double sigma_db = 4.0;
    bool correlated = false; // exponential inter-user correlation per AP
    double decorr_dist_m = 9.0;
};

struct ScenarioConfig {
    int ap_count = 20;        // M
    int user_count = 20;      // K
    int antennas_per_ap = 20; // N
    double side_m = 1000.0;
    double min_ap_dist_m = 50.0;
    int tau_c = 200;
    int tau_p = 5;
    double pilot_power_w = 0.2;                 // uniform p_k
    std::vector<double> per_user_pilot_power_w; // optional override, size K
    double noise_w = 6.309573444801929e-13;     // -92 dBm
    double p_max_w = 1.0;
    double delta = 2.5;    // amplifier inefficiency
    double p_act_w = 5.03; // fixed power per active AP
    double se_target = 2.0;                 // uniform xi_k (bit/s/Hz)
    std::vector<double> per_user_se_target; // optional override, size K
    PathlossParams pathloss;
    ShadowingParams shadowing;
    std::uint64_t seed = 1;

    void validate() const; // throws InvalidConfig

    Eigen::VectorXd pilot_powers() const; // size K
    Eigen::VectorXd se_targets_vec() const;

    std::string to_json() const;
    static ScenarioConfig from_json(const std::string &text);
};

/// One network drop: geometry plus large-scale channel statistics. Immutable
/// after construction and safe to share read-only across threads.
struct Scenario {
    std::vector<Point> ap_xy;
    std::vector<Point> user_xy;
    Eigen::MatrixXd beta;  // M x K, linear
    Eigen::MatrixXd gamma; // M x K, linear
    std::vector<std::vector<int>> pilot_groups; // tau_p groups partitioning users
    std::vector<int> pilot_of_user;             // K, group index per user
    ScenarioConfig config;

    int ap_count() const { return static_cast<int>(ap_xy.size()); }
    int user_count() const { return static_cast<int>(user_xy.size()); }

    std::string to_json() const;
    static Scenario from_json(const std::string &text);
};

/// Torus distance: minimum over the nine shifted copies of b.
double wrap_distance(const Point &a, const Point &b, double side_m);

std::pair<std::vector<Point>, std::vector<Point>>
generate_positions(const ScenarioConfig &config, RandomStream &rng);

Eigen::MatrixXd large_scale_fading(const std::vector<Point> &ap_xy,
                                   const std::vector<Point> &user_xy,
                                   const ScenarioConfig &config, RandomStream &rng);

std::vector<std::vector<int>> assign_pilots(int user_count, int tau_p, RandomStream &rng);

Eigen::MatrixXd channel_estimate_quality(const Eigen::MatrixXd &beta,
                                         const std::vector<std::vector<int>> &pilot_groups,
                                         const ScenarioConfig &config);

/// Full deterministic drop generation from config.seed.
Scenario generate_scenario(const ScenarioConfig &config);

} // namespace cellfree
