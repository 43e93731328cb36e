"""Joint AP selection and downlink power design for cell-free massive MIMO."""

from ._core import (
    Scenario,
    ScenarioConfig,
    check_feasible,
    dbm_to_watt,
    exhaustive_oracle,
    generate_scenario,
    mix_seed,
    run_campaign,
    run_drop,
    se,
    se_target_to_sinr,
    sinr,
    solve_fixed_set,
    solve_misocp,
    sparsity_pipeline,
    total_power,
    watt_to_dbm,
    wrap_distance,
)

__all__ = [
    "Scenario",
    "ScenarioConfig",
    "check_feasible",
    "dbm_to_watt",
    "exhaustive_oracle",
    "generate_scenario",
    "mix_seed",
    "run_campaign",
    "run_drop",
    "se",
    "se_target_to_sinr",
    "sinr",
    "solve_fixed_set",
    "solve_misocp",
    "sparsity_pipeline",
    "total_power",
    "watt_to_dbm",
    "wrap_distance",
]
