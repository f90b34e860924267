"""Four-tank experiment: configuration, runs, metrics and CLI."""

from .config import ExperimentConfig, FilterConfig, config_to_text, load_config, four_tank_config, parse_config
from .experiment import (
    BenchmarkResult,
    RunRecord,
    Trajectory,
    compute_mape,
    estimate,
    make_filter,
    run_benchmark,
    run_estimation,
    run_simulation,
    simulate,
)
