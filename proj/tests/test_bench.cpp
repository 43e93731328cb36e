#include "doctest.h"

#include "cellfree/bench.hpp"
#include "test_helpers.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cellfree;
using cellfree::testing::small_config;

namespace {

BenchConfig small_bench(int M, int K, std::uint64_t seed, double xi = 1.0) {
    BenchConfig cfg;
    cfg.scenario = small_config(M, K, 4, seed, xi);
    return cfg;
}

} // namespace

TEST_CASE("method names round trip") {
    for (Method m : {Method::AllOn, Method::Sparsity, Method::Misocp, Method::Oracle}) {
        CHECK(method_from_string(to_string(m)) == m);
    }
    CHECK_THROWS(method_from_string("nope"));
}

TEST_CASE("config JSON round trip with dBm noise") {
    BenchConfig cfg = small_bench(4, 2, 5);
    cfg.methods = {Method::AllOn, Method::Oracle};
    cfg.irls.p_tilde = 1.4;
    const BenchConfig back = BenchConfig::from_json(cfg.to_json());
    CHECK(back.methods == cfg.methods);
    CHECK(back.irls.p_tilde == cfg.irls.p_tilde);
    CHECK(back.scenario.ap_count == 4);

    const BenchConfig dbm = BenchConfig::from_json(
        R"({"scenario": {"ap_count": 3, "user_count": 2, "tau_p": 2, "noise_dbm": -92.0}})");
    CHECK(dbm.scenario.noise_w == doctest::Approx(6.31e-13).epsilon(1e-3));
}

TEST_CASE("all-on drop record") {
    BenchConfig cfg = small_bench(4, 2, 11);
    cfg.methods = {Method::AllOn};
    const DropResult drop = run_drop(cfg, 0);
    REQUIRE(drop.records.size() == 1);
    const MethodRecord &rec = drop.records.front();
    CHECK(rec.status == "Optimal");
    CHECK(rec.ok);
    CHECK(rec.verified);
    CHECK(rec.active_count == 4);
    CHECK(rec.total_power_w ==
          doctest::Approx(cfg.scenario.delta * rec.transmit_power_w +
                          4 * cfg.scenario.p_act_w)
              .epsilon(1e-9));
}

TEST_CASE("misocp and oracle agree inside a drop") {
    BenchConfig cfg = small_bench(5, 3, 12);
    cfg.methods = {Method::Misocp, Method::Oracle};
    const DropResult drop = run_drop(cfg, 1);
    REQUIRE(drop.records.size() == 2);
    if (drop.feasible) {
        CHECK(drop.records[0].ok);
        CHECK(drop.records[1].ok);
        CHECK(drop.records[0].total_power_w ==
              doctest::Approx(drop.records[1].total_power_w).epsilon(1e-5));
    }
}

TEST_CASE("infeasible drops report GlobalInfeasible for every method") {
    BenchConfig cfg = small_bench(3, 2, 13, 40.0); // absurd SE demand
    cfg.scenario.antennas_per_ap = 2;
    cfg.methods = {Method::AllOn, Method::Sparsity, Method::Misocp};
    const DropResult drop = run_drop(cfg, 0);
    CHECK(!drop.feasible);
    for (const MethodRecord &rec : drop.records) {
        CHECK(rec.status == "GlobalInfeasible");
        CHECK(!rec.ok);
    }
}

TEST_CASE("per-drop method ordering") {
    BenchConfig cfg = small_bench(5, 3, 14);
    cfg.methods = {Method::AllOn, Method::Sparsity, Method::Misocp};
    for (int index = 0; index < 3; ++index) {
        const DropResult drop = run_drop(cfg, index);
        if (!drop.feasible) {
            continue;
        }
        double all_on = 0.0, sparsity = 0.0, misocp = 0.0;
        bool all_ok = true;
        for (const MethodRecord &rec : drop.records) {
            all_ok = all_ok && rec.ok;
            if (rec.method == Method::AllOn) {
                all_on = rec.total_power_w;
            } else if (rec.method == Method::Sparsity) {
                sparsity = rec.total_power_w;
            } else {
                misocp = rec.total_power_w;
            }
        }
        if (all_ok) {
            CHECK(misocp <= sparsity + 1e-6);
            CHECK(sparsity <= all_on + 1e-6);
        }
    }
}

TEST_CASE("campaign aggregation and determinism") {
    BenchConfig cfg = small_bench(4, 2, 15);
    cfg.methods = {Method::AllOn, Method::Sparsity};

    SUBCASE("single-drop campaign mirrors the drop result") {
        const CampaignSummary summary = run_campaign(cfg, 1, 1);
        const DropResult direct = run_drop(cfg, 0);
        REQUIRE(summary.drops.size() == 1);
        for (std::size_t i = 0; i < direct.records.size(); ++i) {
            CHECK(summary.drops[0].records[i].total_power_w ==
                  direct.records[i].total_power_w);
        }
        const auto &stats = summary.stats.at("total_power_w");
        if (direct.records[0].ok) {
            CHECK(stats.at("all-on").count == 1);
            CHECK(stats.at("all-on").mean ==
                  doctest::Approx(direct.records[0].total_power_w));
        }
    }

    SUBCASE("extending a campaign replays its prefix exactly") {
        const CampaignSummary four = run_campaign(cfg, 4, 1);
        const CampaignSummary eight = run_campaign(cfg, 8, 1);
        for (int i = 0; i < 4; ++i) {
            REQUIRE(four.drops[i].records.size() == eight.drops[i].records.size());
            CHECK(four.drops[i].seed == eight.drops[i].seed);
            for (std::size_t r = 0; r < four.drops[i].records.size(); ++r) {
                CHECK(four.drops[i].records[r].total_power_w ==
                      eight.drops[i].records[r].total_power_w);
            }
        }
    }

    SUBCASE("summary JSON is byte-identical across runs and worker counts") {
        const CampaignSummary a = run_campaign(cfg, 4, 1);
        const CampaignSummary b = run_campaign(cfg, 4, 1);
        const CampaignSummary c = run_campaign(cfg, 4, 2);
        CHECK(summary_to_json(a) == summary_to_json(b));
        CHECK(summary_to_json(a) == summary_to_json(c));
    }
}

TEST_CASE("CDF emission") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "cellfree_bench_test";
    fs::remove_all(dir);

    BenchConfig cfg = small_bench(4, 2, 16);
    cfg.methods = {Method::AllOn, Method::Sparsity};
    const CampaignSummary summary = run_campaign(cfg, 5, 1);
    emit_cdf(summary, dir.string(), true);

    REQUIRE(fs::exists(dir / "total_power_cdf.csv"));
    REQUIRE(fs::exists(dir / "transmit_power_cdf.csv"));
    REQUIRE(fs::exists(dir / "summary.json"));
    REQUIRE(fs::exists(dir / "drops" / "drop_0.json"));

    // Parse the CSV back: cdf column non-decreasing and ending at 1, and the
    // recomputed mean must match the summary.
    std::ifstream in(dir / "total_power_cdf.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("cdf,", 0) == 0);
    std::vector<double> cdf;
    std::map<int, std::vector<double>> columns;
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream row(line);
        std::string cell;
        int col = 0;
        while (std::getline(row, cell, ',')) {
            if (col == 0) {
                cdf.push_back(std::stod(cell));
            } else if (!cell.empty()) {
                columns[col].push_back(std::stod(cell));
            }
            ++col;
        }
    }
    REQUIRE(!cdf.empty());
    for (std::size_t i = 1; i < cdf.size(); ++i) {
        CHECK(cdf[i] >= cdf[i - 1]);
    }
    CHECK(cdf.back() == doctest::Approx(1.0));

    std::stringstream names(header);
    std::string name;
    std::getline(names, name, ','); // "cdf"
    int col = 1;
    while (std::getline(names, name, ',')) {
        const auto &vals = columns[col];
        if (!vals.empty()) {
            double mean = 0.0;
            for (double v : vals) {
                mean += v;
            }
            mean /= static_cast<double>(vals.size());
            const auto &st = summary.stats.at("total_power_w").at(name);
            CHECK(mean == doctest::Approx(st.mean).epsilon(1e-9));
            for (std::size_t i = 1; i < vals.size(); ++i) {
                CHECK(vals[i] >= vals[i - 1]); // sorted samples
            }
        }
        ++col;
    }
    fs::remove_all(dir);
}
