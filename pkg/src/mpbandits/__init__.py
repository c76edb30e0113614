"""Restless Gilbert-Elliott channel simulator and multi-play bandit benchmark.

Modules
-------
numkit       dense numeric primitives (incremental inverse, small ReLU
             network with analytic gradients, adaptive-moment optimizer,
             seeded random streams)
environment  restless two-state channel environment with context-driven noise
policies     context-free baselines (random / ucb / klucb) and shared ops
rca          regenerative-cycle estimation and block-epoch scheduling
contextual   linear and neural context-aware multi-play policies
harness      episode runner, regret metrics, sweeps, CSV emission
cli          `mpbandits run | bench | sweep`

The numeric hot kernels live in `_kernels`: a compiled Cython core with a
pure-numpy fallback selected at import (`mpbandits._kernels.BACKEND` names
the active one).
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .environment import (
    ChannelSpec,
    Environment,
    Observation,
    OracleStats,
    ScenarioConfig,
    StepOutcome,
    load_scenario,
    load_scenario_file,
    mean_reward,
    oracle_stats,
    stationary_distribution,
)
from .harness import MetricsSeries, RunConfig, Trace, compute_regret, run_episode
from .numkit import RngStream
from .policies import ActionSet, Feedback

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "ChannelSpec",
    "Environment",
    "Feedback",
    "KERNEL_BACKEND",
    "MetricsSeries",
    "Observation",
    "OracleStats",
    "RngStream",
    "RunConfig",
    "ScenarioConfig",
    "StepOutcome",
    "Trace",
    "compute_regret",
    "load_scenario",
    "load_scenario_file",
    "mean_reward",
    "oracle_stats",
    "run_episode",
    "stationary_distribution",
    "__version__",
]
