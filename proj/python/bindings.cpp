#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cellfree/bench.hpp"
#include "cellfree/rng.hpp"

namespace py = pybind11;
using namespace cellfree;

namespace {

py::object json_loads(const std::string &text) {
    return py::module_::import("json").attr("loads")(text);
}

ActiveSet as_active_set(const std::vector<int> &members) { return ActiveSet(members); }

SinrTargets as_targets(const Eigen::VectorXd &nu) {
    SinrTargets t;
    t.nu = nu;
    return t;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Joint AP selection and downlink power design for cell-free massive MIMO";

    py::class_<ScenarioConfig>(m, "ScenarioConfig")
        .def(py::init<>())
        .def_readwrite("ap_count", &ScenarioConfig::ap_count)
        .def_readwrite("user_count", &ScenarioConfig::user_count)
        .def_readwrite("antennas_per_ap", &ScenarioConfig::antennas_per_ap)
        .def_readwrite("side_m", &ScenarioConfig::side_m)
        .def_readwrite("min_ap_dist_m", &ScenarioConfig::min_ap_dist_m)
        .def_readwrite("tau_c", &ScenarioConfig::tau_c)
        .def_readwrite("tau_p", &ScenarioConfig::tau_p)
        .def_readwrite("pilot_power_w", &ScenarioConfig::pilot_power_w)
        .def_readwrite("noise_w", &ScenarioConfig::noise_w)
        .def_readwrite("p_max_w", &ScenarioConfig::p_max_w)
        .def_readwrite("delta", &ScenarioConfig::delta)
        .def_readwrite("p_act_w", &ScenarioConfig::p_act_w)
        .def_readwrite("se_target", &ScenarioConfig::se_target)
        .def_readwrite("seed", &ScenarioConfig::seed)
        .def("validate", &ScenarioConfig::validate)
        .def("to_json", &ScenarioConfig::to_json)
        .def_static("from_json", &ScenarioConfig::from_json);

    py::class_<Scenario>(m, "Scenario")
        .def_property_readonly("beta", [](const Scenario &s) { return s.beta; })
        .def_property_readonly("gamma", [](const Scenario &s) { return s.gamma; })
        .def_property_readonly("ap_xy", [](const Scenario &s) { return s.ap_xy; })
        .def_property_readonly("user_xy", [](const Scenario &s) { return s.user_xy; })
        .def_property_readonly("pilot_groups",
                               [](const Scenario &s) { return s.pilot_groups; })
        .def_property_readonly("config", [](const Scenario &s) { return s.config; })
        .def("to_json", &Scenario::to_json)
        .def_static("from_json", &Scenario::from_json);

    m.def("generate_scenario", &generate_scenario, py::arg("config"));
    m.def("wrap_distance", [](double ax, double ay, double bx, double by, double side) {
        return wrap_distance({ax, ay}, {bx, by}, side);
    });
    m.def("dbm_to_watt", &dbm_to_watt);
    m.def("watt_to_dbm", &watt_to_dbm);
    m.def("mix_seed", &mix_seed, py::arg("base"), py::arg("index"));

    m.def(
        "se_target_to_sinr",
        [](const Eigen::VectorXd &xi, int tau_c, int tau_p) {
            return se_target_to_sinr(xi, tau_c, tau_p).nu;
        },
        py::arg("xi"), py::arg("tau_c"), py::arg("tau_p"));

    m.def(
        "sinr",
        [](const Eigen::MatrixXd &rho, const std::vector<int> &active, const Scenario &scn) {
            PowerAllocation alloc;
            alloc.rho = rho;
            return sinr(alloc, as_active_set(active), scn);
        },
        py::arg("rho"), py::arg("active"), py::arg("scenario"));
    m.def(
        "se",
        [](const Eigen::MatrixXd &rho, const std::vector<int> &active, const Scenario &scn) {
            PowerAllocation alloc;
            alloc.rho = rho;
            return se(alloc, as_active_set(active), scn);
        },
        py::arg("rho"), py::arg("active"), py::arg("scenario"));
    m.def(
        "total_power",
        [](const Eigen::MatrixXd &rho, const std::vector<int> &active, double delta,
           double p_act) {
            PowerAllocation alloc;
            alloc.rho = rho;
            return total_power(alloc, as_active_set(active), delta, p_act);
        },
        py::arg("rho"), py::arg("active"), py::arg("delta"), py::arg("p_act"));

    m.def(
        "check_feasible",
        [](const Eigen::MatrixXd &rho, const std::vector<int> &active, const Scenario &scn,
           const Eigen::VectorXd &nu) {
            PowerAllocation alloc;
            alloc.rho = rho;
            const FeasibilityReport rep =
                check_feasible(alloc, as_active_set(active), scn, as_targets(nu));
            py::dict out;
            out["feasible"] = rep.feasible;
            out["sinr"] = rep.sinr;
            out["sinr_slack_rel"] = rep.sinr_slack_rel;
            out["ap_load_w"] = rep.ap_load_w;
            out["min_sinr_slack_rel"] = rep.min_sinr_slack_rel;
            out["min_cap_slack_w"] = rep.min_cap_slack_w;
            return out;
        },
        py::arg("rho"), py::arg("active"), py::arg("scenario"), py::arg("nu"));

    m.def(
        "solve_fixed_set",
        [](const Scenario &scn, const Eigen::VectorXd &nu, const std::vector<int> &active,
           py::object weights) {
            DesignObjective obj = DesignObjective::total_power();
            if (!weights.is_none()) {
                obj = DesignObjective::weighted(weights.cast<Eigen::VectorXd>());
            }
            const FixedSetResult r =
                solve_fixed_set(scn, as_targets(nu), as_active_set(active), obj);
            py::dict out;
            out["status"] = conic::to_string(r.status);
            out["rho"] = r.alloc.rho;
            out["objective"] = r.objective;
            out["total_power_w"] = r.total_power_w;
            out["transmit_power_w"] = r.transmit_power_w;
            out["iterations"] = r.solver_iterations;
            return out;
        },
        py::arg("scenario"), py::arg("nu"), py::arg("active"), py::arg("weights") = py::none(),
        "Fixed-active-set design; minimizes total power, or the weighted "
        "transmit power when per-AP weights are given.");

    m.def(
        "solve_misocp",
        [](const Scenario &scn, const Eigen::VectorXd &nu) {
            const BnbResult r = solve_misocp(scn, as_targets(nu));
            py::dict out;
            out["status"] = r.status == BnbResult::Status::Optimal ? "Optimal" : "NodeLimit";
            out["active"] = r.active.members;
            out["rho"] = r.alloc.rho;
            out["total_power_w"] = r.total_power_w;
            out["transmit_power_w"] = r.transmit_power_w;
            out["nodes_explored"] = r.nodes_explored;
            out["proof_gap_w"] = r.proof_gap_w;
            return out;
        },
        py::arg("scenario"), py::arg("nu"));

    m.def(
        "exhaustive_oracle",
        [](const Scenario &scn, const Eigen::VectorXd &nu) {
            const BnbResult r = exhaustive_oracle(scn, as_targets(nu));
            py::dict out;
            out["active"] = r.active.members;
            out["total_power_w"] = r.total_power_w;
            out["transmit_power_w"] = r.transmit_power_w;
            out["subsets_evaluated"] = r.relaxations_solved;
            return out;
        },
        py::arg("scenario"), py::arg("nu"));

    m.def(
        "sparsity_pipeline",
        [](const Scenario &scn, const Eigen::VectorXd &nu) {
            const SparsityPipelineResult r = sparsity_pipeline(scn, as_targets(nu));
            py::dict out;
            out["status"] = conic::to_string(r.status);
            out["active"] = r.active.members;
            out["rho"] = r.alloc.rho;
            out["total_power_w"] = r.total_power_w;
            out["transmit_power_w"] = r.transmit_power_w;
            out["irls_iterations"] = r.irls_iterations;
            out["l_min"] = r.l_min;
            py::list trace;
            for (const IrlsState &st : r.irls_history) {
                py::dict row;
                row["iteration"] = st.iteration;
                row["objective_lp"] = st.objective_lp;
                row["active_count"] = st.active_count;
                row["eps"] = st.eps;
                trace.append(std::move(row));
            }
            out["irls_trace"] = std::move(trace);
            return out;
        },
        py::arg("scenario"), py::arg("nu"));

    m.def(
        "run_drop",
        [](const std::string &config_json, int index) {
            return json_loads(
                drop_result_to_json(run_drop(BenchConfig::from_json(config_json), index)));
        },
        py::arg("config_json"), py::arg("index"));

    m.def(
        "run_campaign",
        [](const std::string &config_json, int n_drops, int workers) {
            return json_loads(summary_to_json(
                run_campaign(BenchConfig::from_json(config_json), n_drops, workers)));
        },
        py::arg("config_json"), py::arg("n_drops"), py::arg("workers") = 1);
}
