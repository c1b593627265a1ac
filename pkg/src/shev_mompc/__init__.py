"""Series hybrid electric vehicle simulation with a multi-objective MPC.

Library layout:

- :mod:`shev_mompc.powertrain` — longitudinal, engine and battery models
- :mod:`shev_mompc.cycles` — drive-cycle ingestion and reference building
- :mod:`shev_mompc.nlp` — dense SQP solver with box/inequality constraints
- :mod:`shev_mompc.controller` — the weighted-sum MPC transcription
- :mod:`shev_mompc.harness` — closed-loop simulation, metrics, replay
- :mod:`shev_mompc.config` — JSON run configuration
- :mod:`shev_mompc.report` — matplotlib report figures
- :mod:`shev_mompc.cli` — the ``shev-mompc`` command
"""

__version__ = "0.1.0"

from .config import RunConfig, default_config, load_config
from .controller import (
    MompcConfig,
    OcpSolution,
    ParetoPoint,
    build_ocp,
    pareto_sweep,
    solve_step,
)
from .cycles import DriveCycle, ReferenceTrajectory, bundled_cycle, parse_cycle, resample
from .harness import SimLog, SimMetrics, compute_metrics, replay_check, run_closed_loop
from .nlp import NlpProblem, NlpSolution, SolveStatus, finite_diff_grad, solve_nlp
from .powertrain import (
    BatteryParams,
    EngineParams,
    ShevParams,
    VehicleParams,
    VehicleState,
)

__all__ = [
    "__version__",
    "BatteryParams",
    "DriveCycle",
    "EngineParams",
    "MompcConfig",
    "NlpProblem",
    "NlpSolution",
    "OcpSolution",
    "ParetoPoint",
    "ReferenceTrajectory",
    "RunConfig",
    "ShevParams",
    "SimLog",
    "SimMetrics",
    "SolveStatus",
    "VehicleParams",
    "VehicleState",
    "build_ocp",
    "bundled_cycle",
    "compute_metrics",
    "default_config",
    "finite_diff_grad",
    "load_config",
    "parse_cycle",
    "pareto_sweep",
    "replay_check",
    "resample",
    "run_closed_loop",
    "solve_nlp",
    "solve_step",
]
