#include "cellfree/bench.hpp"
#include "cellfree/errors.hpp"
#include "cellfree/rng.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

cellfree::BenchConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return cellfree::BenchConfig::from_json(buf.str());
}

std::vector<cellfree::Method> parse_methods(const std::string &list) {
    std::vector<cellfree::Method> methods;
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) {
            methods.push_back(cellfree::method_from_string(name));
        }
    }
    return methods;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Joint AP selection and downlink power design benchmark"};
    app.require_subcommand(1);

    // drop
    auto *drop_cmd = app.add_subcommand("drop", "Run all methods on a single network drop");
    std::string drop_config;
    int drop_index = 0;
    std::string drop_methods;
    std::string drop_out;
    bool drop_scenario = false;
    drop_cmd->add_option("--config", drop_config, "Benchmark config JSON")->required();
    drop_cmd->add_option("--index", drop_index, "Drop index (seeds derive from it)");
    drop_cmd->add_option("--methods", drop_methods,
                         "Comma-separated subset of all-on,sparsity,misocp,oracle");
    drop_cmd->add_option("--out", drop_out, "Directory for drop_<i>.json");
    drop_cmd->add_flag("--scenario", drop_scenario, "Also print the generated scenario JSON");

    // campaign
    auto *camp_cmd = app.add_subcommand("campaign", "Monte-Carlo campaign with CDF outputs");
    std::string camp_config, camp_out;
    int camp_drops = 25;
    int camp_workers = 1;
    bool per_drop = false;
    camp_cmd->add_option("--config", camp_config, "Benchmark config JSON")->required();
    camp_cmd->add_option("--drops", camp_drops, "Number of drops")->check(CLI::PositiveNumber);
    camp_cmd->add_option("--workers", camp_workers, "Worker threads (1 = deterministic reference)")
        ->check(CLI::PositiveNumber);
    camp_cmd->add_option("--out", camp_out, "Output directory")->required();
    camp_cmd->add_flag("--per-drop", per_drop, "Also write one JSON per drop");

    // oracle-check
    auto *oracle_cmd =
        app.add_subcommand("oracle-check", "Random small-instance oracle-equivalence suite");
    int oc_m = 6, oc_k = 3, oc_n = 4, oc_instances = 10;
    std::uint64_t oc_seed = 1;
    double oc_se = 1.0;
    oracle_cmd->add_option("--m", oc_m, "AP count")->check(CLI::Range(1, 12));
    oracle_cmd->add_option("--k", oc_k, "User count")->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--n", oc_n, "Antennas per AP")->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--instances", oc_instances, "Instance count")
        ->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--seed", oc_seed, "Base seed");
    oracle_cmd->add_option("--se", oc_se, "Per-user SE target (bit/s/Hz)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*drop_cmd) {
            cellfree::BenchConfig cfg = load_config(drop_config);
            if (!drop_methods.empty()) {
                cfg.methods = parse_methods(drop_methods);
            }
            const cellfree::DropResult result = cellfree::run_drop(cfg, drop_index);
            const std::string json = cellfree::drop_result_to_json(result);
            std::cout << json << "\n";
            if (drop_scenario) {
                cellfree::ScenarioConfig sc = cfg.scenario;
                sc.seed = cellfree::mix_seed(cfg.scenario.seed, drop_index);
                std::cout << cellfree::generate_scenario(sc).to_json() << "\n";
            }
            if (!drop_out.empty()) {
                std::filesystem::create_directories(drop_out);
                std::ofstream out(std::filesystem::path(drop_out) /
                                  ("drop_" + std::to_string(drop_index) + ".json"));
                out << json << "\n";
            }
            return 0;
        }

        if (*camp_cmd) {
            const cellfree::BenchConfig cfg = load_config(camp_config);
            const cellfree::CampaignSummary summary =
                cellfree::run_campaign(cfg, camp_drops, camp_workers);
            cellfree::emit_cdf(summary, camp_out, per_drop);
            std::cout << "wrote " << camp_out << "/summary.json";
            std::cout << " (" << summary.n_drops << " drops";
            if (!summary.failures.empty()) {
                std::cout << ", " << summary.failures.size() << " method failures";
            }
            std::cout << ")\n";
            for (const auto &[pair, pct] : summary.savings_total_power_pct) {
                std::printf("savings %s: %.1f%%\n", pair.c_str(), pct);
            }
            return 0;
        }

        if (*oracle_cmd) {
            int mismatches = 0;
            int compared = 0;
            for (int i = 0; i < oc_instances; ++i) {
                cellfree::ScenarioConfig sc;
                sc.ap_count = oc_m;
                sc.user_count = oc_k;
                sc.antennas_per_ap = oc_n;
                sc.side_m = 500.0;
                sc.min_ap_dist_m = 20.0;
                sc.tau_p = std::min(oc_k, 2);
                sc.se_target = oc_se;
                sc.seed = cellfree::mix_seed(oc_seed, i);
                const cellfree::Scenario scn = cellfree::generate_scenario(sc);
                const cellfree::SinrTargets targets = cellfree::se_target_to_sinr(
                    sc.se_targets_vec(), sc.tau_c, sc.tau_p);
                try {
                    const cellfree::BnbResult oracle = cellfree::exhaustive_oracle(scn, targets);
                    const cellfree::BnbResult bnb = cellfree::solve_misocp(scn, targets);
                    const double rel =
                        std::abs(bnb.total_power_w - oracle.total_power_w) /
                        std::max(1.0, oracle.total_power_w);
                    const bool ok = rel <= 1e-5;
                    std::printf("instance %2d: %s  misocp=%.6f W  oracle=%.6f W  rel=%.2e\n", i,
                                ok ? "MATCH   " : "MISMATCH", bnb.total_power_w,
                                oracle.total_power_w, rel);
                    mismatches += ok ? 0 : 1;
                    ++compared;
                } catch (const cellfree::GlobalInfeasible &) {
                    std::printf("instance %2d: infeasible (both methods agree)\n", i);
                }
            }
            std::printf("%d/%d compared instances match\n", compared - mismatches, compared);
            return mismatches == 0 ? 0 : 1;
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
