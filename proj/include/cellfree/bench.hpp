#pragma once

#include "cellfree/misocp.hpp"
#include "cellfree/sparsity.hpp"

#include <map>
#include <string>
#include <vector>

namespace cellfree {

enum class Method { AllOn, Sparsity, Misocp, Oracle };

std::string to_string(Method method);
Method method_from_string(const std::string &name);

struct BenchConfig {
    ScenarioConfig scenario;
    std::vector<Method> methods = {Method::AllOn, Method::Sparsity};
    IrlsOptions irls;
    BnbOptions bnb;
    int oracle_cap = 12;
    conic::SolverOptions solver = design_solver_options();

    std::string to_json() const;
    static BenchConfig from_json(const std::string &text);
};

struct MethodRecord {
    Method method = Method::AllOn;
    std::string status; // Optimal / GlobalInfeasible / NodeLimit / ...
    bool ok = false;    // solved to optimality and passed the verifier
    double total_power_w = 0.0;
    double transmit_power_w = 0.0;
    int active_count = 0;
    double solve_time_s = 0.0;
    int iterations = 0; // IRLS iterations, B&B nodes, or IPM iterations
    bool verified = false;
    double min_sinr_slack_rel = 0.0;
    double min_cap_slack_w = 0.0;
};

struct DropResult {
    int drop_index = 0;
    std::uint64_t seed = 0;
    bool feasible = true; // SE targets reachable with every AP on
    std::vector<MethodRecord> records;
};

std::string drop_result_to_json(const DropResult &drop);

/// Runs every requested method on drop `drop_index`; the drop seed derives
/// from the config's base seed and the index. Per-method failures are
/// recorded, never thrown.
DropResult run_drop(const BenchConfig &config, int drop_index);

struct MethodStats {
    int count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
    std::vector<double> samples; // sorted ascending
};

struct CampaignSummary {
    BenchConfig config;
    int n_drops = 0;
    std::vector<DropResult> drops; // sorted by index
    // metric name -> method name -> stats; metrics: total_power_w,
    // transmit_power_w, active_count.
    std::map<std::string, std::map<std::string, MethodStats>> stats;
    std::map<std::string, double> savings_total_power_pct; // "<a>_vs_<b>"
    std::vector<std::string> failures;
};

/// Drops run in a worker pool; results are collected by index, so any worker
/// count produces the same drop set. workers == 1 is the determinism
/// reference used by the reproducibility tests.
CampaignSummary run_campaign(const BenchConfig &config, int n_drops, int workers);

std::string summary_to_json(const CampaignSummary &summary);

/// Writes transmit_power_cdf.csv, total_power_cdf.csv and summary.json into
/// out_dir (created if missing); optionally one JSON per drop.
void emit_cdf(const CampaignSummary &summary, const std::string &out_dir,
              bool per_drop_json = false);

} // namespace cellfree
