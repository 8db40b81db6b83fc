from catekit.experiments.config import ExperimentConfig, load_config, parse_config
from catekit.experiments.results import ResultRow, ResultTable, SummaryRow
from catekit.experiments.runners import (
    ExperimentFailed,
    run_auuc_eval,
    run_benchmark_pehe,
    run_experiment,
    run_sweep_complexity,
    run_sweep_discrepancy,
    run_verify_decomposition,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentFailed",
    "ResultRow",
    "ResultTable",
    "SummaryRow",
    "load_config",
    "parse_config",
    "run_auuc_eval",
    "run_benchmark_pehe",
    "run_experiment",
    "run_sweep_complexity",
    "run_sweep_discrepancy",
    "run_verify_decomposition",
]
