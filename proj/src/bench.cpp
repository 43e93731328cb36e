#include "cellfree/bench.hpp"

#include "cellfree/errors.hpp"
#include "cellfree/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

namespace cellfree {

using nlohmann::json;

std::string to_string(Method method) {
    switch (method) {
    case Method::AllOn:
        return "all-on";
    case Method::Sparsity:
        return "sparsity";
    case Method::Misocp:
        return "misocp";
    case Method::Oracle:
        return "oracle";
    }
    return "unknown";
}

Method method_from_string(const std::string &name) {
    if (name == "all-on" || name == "all_on" || name == "allon") {
        return Method::AllOn;
    }
    if (name == "sparsity") {
        return Method::Sparsity;
    }
    if (name == "misocp") {
        return Method::Misocp;
    }
    if (name == "oracle") {
        return Method::Oracle;
    }
    throw InvalidConfig("unknown method: " + name);
}

std::string BenchConfig::to_json() const {
    json j;
    j["scenario"] = json::parse(scenario.to_json());
    json methods_json = json::array();
    for (Method m : methods) {
        methods_json.push_back(to_string(m));
    }
    j["methods"] = std::move(methods_json);
    j["irls"] = {{"p_tilde", irls.p_tilde},
                 {"eps0_factor", irls.eps0_factor},
                 {"eps_decay", irls.eps_decay},
                 {"eps_floor", irls.eps_floor},
                 {"stop_rel_change", irls.stop_rel_change},
                 {"max_iterations", irls.max_iterations},
                 {"zero_threshold_factor", irls.zero_threshold_factor},
                 {"freeze_off_aps", irls.freeze_off_aps}};
    j["bnb"] = {{"abs_gap_w", bnb.abs_gap_w},
                {"rel_gap", bnb.rel_gap},
                {"max_nodes", bnb.max_nodes},
                {"relaxation", bnb.relaxation == ActivationRelaxation::SqrtActivation
                                   ? "sqrt"
                                   : "linear"}};
    j["oracle_cap"] = oracle_cap;
    return j.dump(2);
}

BenchConfig BenchConfig::from_json(const std::string &text) {
    const json j = json::parse(text);
    BenchConfig cfg;
    if (j.contains("scenario")) {
        cfg.scenario = ScenarioConfig::from_json(j["scenario"].dump());
    }
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto &name : j["methods"]) {
            cfg.methods.push_back(method_from_string(name.get<std::string>()));
        }
    }
    if (j.contains("irls")) {
        const json &i = j["irls"];
        cfg.irls.p_tilde = i.value("p_tilde", cfg.irls.p_tilde);
        cfg.irls.eps0_factor = i.value("eps0_factor", cfg.irls.eps0_factor);
        cfg.irls.eps_decay = i.value("eps_decay", cfg.irls.eps_decay);
        cfg.irls.eps_floor = i.value("eps_floor", cfg.irls.eps_floor);
        cfg.irls.stop_rel_change = i.value("stop_rel_change", cfg.irls.stop_rel_change);
        cfg.irls.max_iterations = i.value("max_iterations", cfg.irls.max_iterations);
        cfg.irls.zero_threshold_factor =
            i.value("zero_threshold_factor", cfg.irls.zero_threshold_factor);
        cfg.irls.freeze_off_aps = i.value("freeze_off_aps", cfg.irls.freeze_off_aps);
    }
    if (j.contains("bnb")) {
        const json &b = j["bnb"];
        cfg.bnb.abs_gap_w = b.value("abs_gap_w", cfg.bnb.abs_gap_w);
        cfg.bnb.rel_gap = b.value("rel_gap", cfg.bnb.rel_gap);
        cfg.bnb.max_nodes = b.value("max_nodes", cfg.bnb.max_nodes);
        if (b.value("relaxation", "sqrt") == std::string("linear")) {
            cfg.bnb.relaxation = ActivationRelaxation::LinearActivation;
        }
    }
    cfg.oracle_cap = j.value("oracle_cap", cfg.oracle_cap);
    return cfg;
}

namespace {

MethodRecord verify_record(MethodRecord rec, const PowerAllocation &alloc,
                           const ActiveSet &active, const Scenario &scn,
                           const SinrTargets &targets) {
    const FeasibilityReport rep = check_feasible(alloc, active, scn, targets);
    rec.verified = rep.feasible;
    rec.min_sinr_slack_rel = rep.min_sinr_slack_rel;
    rec.min_cap_slack_w = rep.min_cap_slack_w;
    // Reported powers are recomputed from rho, never from solver objectives.
    rec.transmit_power_w = transmit_power(alloc, active);
    rec.total_power_w = total_power(alloc, active, scn.config.delta, scn.config.p_act_w);
    rec.active_count = active.size();
    rec.ok = rec.status == "Optimal" && rec.verified;
    return rec;
}

} // namespace

DropResult run_drop(const BenchConfig &config, int drop_index) {
    DropResult drop;
    drop.drop_index = drop_index;
    drop.seed = mix_seed(config.scenario.seed, static_cast<std::uint64_t>(drop_index));

    ScenarioConfig scn_config = config.scenario;
    scn_config.seed = drop.seed;
    const Scenario scn = generate_scenario(scn_config);
    const SinrTargets targets =
        se_target_to_sinr(scn_config.se_targets_vec(), scn_config.tau_c, scn_config.tau_p);
    const ActiveSet full = ActiveSet::all(scn.ap_count());

    // Shared feasibility gate: minimize transmit power with every AP on.
    const Eigen::VectorXd unit_weights = Eigen::VectorXd::Ones(scn.ap_count());
    FixedSetResult all_on;
    std::string all_on_status;
    try {
        all_on = solve_fixed_set(scn, targets, full, DesignObjective::weighted(unit_weights),
                                 config.solver);
        all_on_status = to_string(all_on.status);
    } catch (const std::exception &e) {
        all_on_status = std::string("Error: ") + e.what();
    }
    drop.feasible = all_on_status == "Optimal";

    for (Method method : config.methods) {
        MethodRecord rec;
        rec.method = method;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (!drop.feasible) {
                rec.status = all_on_status == "Infeasible" ? "GlobalInfeasible" : all_on_status;
            } else {
                switch (method) {
                case Method::AllOn: {
                    rec.status = to_string(all_on.status);
                    rec.iterations = all_on.solver_iterations;
                    rec = verify_record(rec, all_on.alloc, full, scn, targets);
                    break;
                }
                case Method::Sparsity: {
                    const SparsityPipelineResult r = sparsity_pipeline(scn, targets, config.irls);
                    rec.status = to_string(r.status);
                    rec.iterations = r.irls_iterations;
                    if (r.status == conic::SolveStatus::Optimal) {
                        rec = verify_record(rec, r.alloc, r.active, scn, targets);
                    }
                    break;
                }
                case Method::Misocp: {
                    const BnbResult r = solve_misocp(scn, targets, config.bnb);
                    rec.status = r.status == BnbResult::Status::Optimal ? "Optimal" : "NodeLimit";
                    rec.iterations = r.nodes_explored;
                    rec = verify_record(rec, r.alloc, r.active, scn, targets);
                    break;
                }
                case Method::Oracle: {
                    const BnbResult r =
                        exhaustive_oracle(scn, targets, config.solver, config.oracle_cap);
                    rec.status = "Optimal";
                    rec.iterations = r.relaxations_solved;
                    rec = verify_record(rec, r.alloc, r.active, scn, targets);
                    break;
                }
                }
            }
        } catch (const GlobalInfeasible &) {
            rec.status = "GlobalInfeasible";
        } catch (const std::exception &e) {
            rec.status = std::string("Error: ") + e.what();
        }
        rec.solve_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        drop.records.push_back(std::move(rec));
    }
    return drop;
}

namespace {

json record_to_json(const MethodRecord &rec) {
    json j;
    j["method"] = to_string(rec.method);
    j["status"] = rec.status;
    j["ok"] = rec.ok;
    j["total_power_w"] = rec.total_power_w;
    j["transmit_power_w"] = rec.transmit_power_w;
    j["active_count"] = rec.active_count;
    j["solve_time_s"] = rec.solve_time_s;
    j["iterations"] = rec.iterations;
    j["verified"] = rec.verified;
    j["min_sinr_slack_rel"] = rec.min_sinr_slack_rel;
    j["min_cap_slack_w"] = rec.min_cap_slack_w;
    return j;
}

double quantile(const std::vector<double> &sorted, double p) {
    if (sorted.empty()) {
        return 0.0;
    }
    const int idx = std::min(static_cast<int>(sorted.size()) - 1,
                             static_cast<int>(std::floor(p * sorted.size())));
    return sorted[idx];
}

MethodStats make_stats(std::vector<double> samples) {
    MethodStats st;
    std::sort(samples.begin(), samples.end());
    st.count = static_cast<int>(samples.size());
    if (st.count > 0) {
        st.mean = 0.0;
        for (double v : samples) {
            st.mean += v;
        }
        st.mean /= st.count;
        st.median = quantile(samples, 0.5);
        st.q05 = quantile(samples, 0.05);
        st.q95 = quantile(samples, 0.95);
    }
    st.samples = std::move(samples);
    return st;
}

} // namespace

std::string drop_result_to_json(const DropResult &drop) {
    json j;
    j["drop_index"] = drop.drop_index;
    j["seed"] = drop.seed;
    j["feasible"] = drop.feasible;
    json recs = json::array();
    for (const MethodRecord &rec : drop.records) {
        recs.push_back(record_to_json(rec));
    }
    j["records"] = std::move(recs);
    return j.dump(2);
}

CampaignSummary run_campaign(const BenchConfig &config, int n_drops, int workers) {
    if (n_drops < 1) {
        throw InvalidConfig("campaign needs at least one drop");
    }
    CampaignSummary summary;
    summary.config = config;
    summary.n_drops = n_drops;
    summary.drops.resize(n_drops);

    if (workers <= 1) {
        for (int i = 0; i < n_drops; ++i) {
            summary.drops[i] = run_drop(config, i);
        }
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n_drops) {
                    break;
                }
                summary.drops[i] = run_drop(config, i);
            }
        };
        std::vector<std::thread> pool;
        const int n_workers = std::min(workers, n_drops);
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        for (std::thread &t : pool) {
            t.join();
        }
    }

    // Aggregate per-method CDF samples over drops that solved and verified.
    std::map<std::string, std::map<std::string, std::vector<double>>> samples;
    for (const DropResult &drop : summary.drops) {
        for (const MethodRecord &rec : drop.records) {
            const std::string name = to_string(rec.method);
            if (rec.ok) {
                samples["total_power_w"][name].push_back(rec.total_power_w);
                samples["transmit_power_w"][name].push_back(rec.transmit_power_w);
                samples["active_count"][name].push_back(rec.active_count);
            } else {
                summary.failures.push_back("drop=" + std::to_string(drop.drop_index) +
                                           " method=" + name + " status=" + rec.status);
            }
        }
    }
    for (auto &[metric, by_method] : samples) {
        for (auto &[name, vals] : by_method) {
            summary.stats[metric][name] = make_stats(std::move(vals));
        }
    }
    const auto &totals = summary.stats["total_power_w"];
    for (const auto &[a, stat_a] : totals) {
        for (const auto &[b, stat_b] : totals) {
            if (a != b && stat_b.mean > 0.0) {
                summary.savings_total_power_pct[a + "_vs_" + b] =
                    100.0 * (1.0 - stat_a.mean / stat_b.mean);
            }
        }
    }
    return summary;
}

std::string summary_to_json(const CampaignSummary &summary) {
    json j;
    j["config"] = json::parse(summary.config.to_json());
    j["n_drops"] = summary.n_drops;
    int feasible = 0;
    for (const DropResult &d : summary.drops) {
        feasible += d.feasible ? 1 : 0;
    }
    j["feasible_drops"] = feasible;
    json metrics;
    for (const auto &[metric, by_method] : summary.stats) {
        json per_method;
        for (const auto &[name, st] : by_method) {
            per_method[name] = {{"count", st.count},
                                {"mean", st.mean},
                                {"median", st.median},
                                {"q05", st.q05},
                                {"q95", st.q95}};
        }
        metrics[metric] = std::move(per_method);
    }
    j["metrics"] = std::move(metrics);
    j["savings_total_power_pct"] = summary.savings_total_power_pct;
    j["failures"] = summary.failures;
    return j.dump(2);
}

void emit_cdf(const CampaignSummary &summary, const std::string &out_dir, bool per_drop_json) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    for (const std::string metric : {"transmit_power_w", "total_power_w"}) {
        const auto it = summary.stats.find(metric);
        const std::string base = metric.substr(0, metric.size() - 2); // strip "_w"
        std::ofstream out(fs::path(out_dir) / (base + "_cdf.csv"));
        if (!out) {
            throw std::runtime_error("cannot write CDF file in " + out_dir);
        }
        std::vector<std::string> names;
        std::size_t max_count = 0;
        if (it != summary.stats.end()) {
            for (const auto &[name, st] : it->second) {
                names.push_back(name);
                max_count = std::max(max_count, st.samples.size());
            }
        }
        out << "cdf";
        for (const std::string &name : names) {
            out << "," << name;
        }
        out << "\n";
        out.precision(17);
        for (std::size_t i = 0; i < max_count; ++i) {
            out << (static_cast<double>(i + 1) / static_cast<double>(max_count));
            for (const std::string &name : names) {
                const auto &s = it->second.at(name).samples;
                out << ",";
                if (i < s.size()) {
                    out << s[i];
                }
            }
            out << "\n";
        }
    }

    std::ofstream sj(fs::path(out_dir) / "summary.json");
    sj << summary_to_json(summary) << "\n";

    if (per_drop_json) {
        fs::create_directories(fs::path(out_dir) / "drops");
        for (const DropResult &drop : summary.drops) {
            std::ofstream dj(fs::path(out_dir) / "drops" /
                             ("drop_" + std::to_string(drop.drop_index) + ".json"));
            dj << drop_result_to_json(drop) << "\n";
        }
    }
}

} // namespace cellfree
