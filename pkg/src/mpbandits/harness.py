"""Experiment orchestration: episodes, regret metrics, sweeps, CSV output.

Runs are deterministic given their seed list: every random draw descends
from per-purpose substreams of the episode seed, and environment draws do
not depend on the policy, so all policies compared under one seed face
identical channel realizations.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contextual import LinUcbPolicy, NeuralUcbPolicy
from .environment import (
    Environment,
    OracleStats,
    ScenarioConfig,
    load_scenario,
    load_scenario_file,
    oracle_stats,
)
from .errors import ConfigurationError, ContractViolation
from .numkit import RngStream
from .policies import Feedback, KlUcbPolicy, RandomPolicy, UcbPolicy
from .rca import RcaConfig, RcaHostedPolicy, RcaPolicy

POLICY_NAMES = ("random", "ucb", "klucb", "rca", "lucb", "nucb")
SCENARIO_NAMES = ("S1", "S2", "S3", "S4")
BETA_GRID = (0.1, 0.5, 1.0, 10.0, 100.0, 1000.0)
M_GRID = (2, 3, 4, 5, 6, 7, 8)


@dataclass
class RunConfig:
    """Everything needed to reproduce one (scenario, policy) experiment."""

    scenario: str = "S1"
    policy: str = "lucb"
    T: int = 100_000
    M: int = 5
    d: int = 8
    seeds: tuple = (1, 2, 3, 4, 5)
    feedback: str = "full"
    beta: float = 1.0
    gamma: float = 1.0
    depth: int = 2
    width: int = 16
    dropout: float = 0.1
    lr: float = 0.005
    buffer: int = 4096
    target_mode: str = "observed"
    index_mode: str = "literal"
    host: str = "none"
    lexp: float = 2.0
    per_arm: bool = False
    mirror_inputs: bool = False
    noise_jitter: float = 0.0

    def __post_init__(self):
        if self.T < 1:
            raise ConfigurationError(f"horizon must be positive, got {self.T}")
        if not self.seeds:
            raise ConfigurationError("seed list must be non-empty")
        if self.policy not in POLICY_NAMES:
            raise ConfigurationError(
                f"unknown policy {self.policy!r}; expected one of {POLICY_NAMES}")
        if self.host not in ("none", "rca"):
            raise ConfigurationError(f"unknown host {self.host!r}")
        if self.host == "rca" and self.policy not in ("lucb", "nucb"):
            raise ConfigurationError("--host rca only wraps the contextual policies")
        if self.index_mode == "composite" and self.host != "rca":
            raise ConfigurationError(
                "composite index mode needs cycle statistics; add --host rca")

    def label(self) -> str:
        """Output label; non-default variants are annotated."""
        parts = [self.policy]
        if self.host == "rca":
            parts.append("rca")
        if self.index_mode == "composite":
            parts.append("composite")
        if self.target_mode == "literal" and self.policy == "lucb":
            parts.append("literal")
        return "+".join(parts)


def build_scenario(cfg: RunConfig, seed: int) -> ScenarioConfig:
    """Resolve the scenario name (built-in or a definition-file path)."""
    if cfg.scenario in SCENARIO_NAMES:
        return load_scenario(cfg.scenario, M=cfg.M, T=cfg.T, d=cfg.d, seed=seed,
                             feedback_mode=cfg.feedback, noise_jitter=cfg.noise_jitter)
    path = Path(cfg.scenario)
    if path.exists():
        return load_scenario_file(path, M=cfg.M, T=cfg.T, d=cfg.d, seed=seed,
                                  feedback_mode=cfg.feedback)
    raise ConfigurationError(
        f"scenario {cfg.scenario!r} is neither built-in {SCENARIO_NAMES} nor a file")


def make_policy(cfg: RunConfig, scen: ScenarioConfig, stream: RngStream):
    K, M, d = scen.K, scen.M, scen.d
    levels = scen.reward_levels
    shared = not cfg.per_arm
    if cfg.policy == "random":
        policy = RandomPolicy(K, M, stream.child("base"))
    elif cfg.policy == "ucb":
        policy = UcbPolicy(K, M, stream.child("base"))
    elif cfg.policy == "klucb":
        policy = KlUcbPolicy(K, M, stream.child("base"), support=levels)
    elif cfg.policy == "rca":
        policy = RcaPolicy(K, M, stream.child("base"), RcaConfig(cfg.lexp))
    elif cfg.policy == "lucb":
        policy = LinUcbPolicy(K, M, d, stream.child("ctx"), beta=cfg.beta,
                              target_mode=cfg.target_mode, reward_levels=levels,
                              index_mode=cfg.index_mode, shared=shared)
    elif cfg.policy == "nucb":
        policy = NeuralUcbPolicy(K, M, d, stream.child("ctx"), gamma=cfg.gamma,
                                 width=cfg.width, depth=cfg.depth,
                                 dropout=cfg.dropout, lr=cfg.lr,
                                 buffer_capacity=cfg.buffer, reward_levels=levels,
                                 index_mode=cfg.index_mode, shared=shared,
                                 mirror_inputs=cfg.mirror_inputs)
    else:  # unreachable, validated in RunConfig
        raise ConfigurationError(f"unknown policy {cfg.policy!r}")
    if cfg.host == "rca":
        policy = RcaHostedPolicy(policy, stream.child("host"), RcaConfig(cfg.lexp))
    return policy


@dataclass
class Trace:
    """Per-step record of one episode (played arms only)."""

    scenario: str
    policy: str
    seed: int
    actions: np.ndarray    # (T, M) channel indices
    rewards: np.ndarray    # (T, M) quantized rewards
    noise: np.ndarray      # (T, M) realized perturbations
    states: np.ndarray     # (T, M) observed states
    net: np.ndarray        # (T, M) state reward minus noise
    indices: np.ndarray | None = None  # (T, K) per-round policy indices (debug)

    @property
    def T(self) -> int:
        return self.actions.shape[0]


def build_feedback(obs, outcome, action, full: bool) -> Feedback:
    played = list(action.chosen)
    return Feedback(
        t=outcome.t,
        played=action.chosen,
        rewards=outcome.quantized[played],
        states=outcome.states[played],
        noise=outcome.noise[played],
        contexts=obs.contexts[played],
        all_states=outcome.states if full else None,
        all_noise=outcome.noise if full else None,
    )


def play(env: Environment, policy, scenario_name: str = "", policy_label: str = "",
         seed: int = 0, record_indices: bool = False) -> Trace:
    """Drive one episode to the horizon and record the trace."""
    cfg = env.cfg
    T, M, K = cfg.horizon, cfg.M, cfg.K
    actions = np.empty((T, M), dtype=np.int16)
    rewards = np.empty((T, M))
    noise = np.empty((T, M))
    states = np.empty((T, M), dtype=np.int8)
    net = np.empty((T, M))
    indices = np.full((T, K), np.nan) if record_indices else None
    full = cfg.feedback_mode == "full"

    for t in range(T):
        try:
            obs, outcome = env.advance()
            action = policy.select(obs)
            if len(action.chosen) != M or action.K != K:
                raise ContractViolation(
                    f"policy returned {len(action.chosen)} arms, expected {M}")
            fb = build_feedback(obs, outcome, action, full)
            policy.learn(fb)
        except ContractViolation as exc:
            raise ContractViolation(f"episode failed at step {t + 1}: {exc}") from exc
        played = list(action.chosen)
        actions[t] = played
        rewards[t] = outcome.quantized[played]
        noise[t] = outcome.noise[played]
        states[t] = outcome.states[played]
        net[t] = outcome.net[played]
        if record_indices and getattr(policy, "last_indices", None) is not None:
            indices[t] = policy.last_indices
    return Trace(scenario=scenario_name, policy=policy_label, seed=seed,
                 actions=actions, rewards=rewards, noise=noise, states=states,
                 net=net, indices=indices)


def run_episode(cfg: RunConfig, seed: int, record_indices: bool = False,
                return_policy: bool = False):
    """One (config, seed) episode; deterministic given the seed."""
    scen = build_scenario(cfg, seed)
    env = Environment(scen)
    policy = make_policy(cfg, scen, RngStream(seed, "policy"))
    trace = play(env, policy, scenario_name=scen.name, policy_label=cfg.label(),
                 seed=seed, record_indices=record_indices)
    return (trace, policy) if return_policy else trace


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricsSeries:
    """Cumulative regret series and selection counts for one episode."""

    regret: np.ndarray            # realized form of the regret definition
    regret_expected: np.ndarray   # chosen-arm mean-reward form
    regret_quantized: np.ndarray  # quantized-reward alternative
    normalized: np.ndarray        # regret / ln t (NaN at t = 1)
    suboptimal_cum: np.ndarray    # cumulative sub-optimal selections
    channel_counts: np.ndarray    # (K,) total selections per channel

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])

    @property
    def final_normalized(self) -> float:
        return float(self.normalized[-1])


def compute_regret(trace: Trace, oracle: OracleStats) -> MetricsSeries:
    """Regret against always playing the M best-mean arms.

    The primary series subtracts the realized per-round net values; the
    expected series substitutes the chosen arms' stationary means; the
    quantized series substitutes the paid-out reward levels.
    """
    T = trace.T
    K = oracle.mu.shape[0]
    t_axis = np.arange(1, T + 1, dtype=np.float64)
    best = oracle.optimal_value * t_axis

    regret = best - np.cumsum(trace.net.sum(axis=1))
    regret_expected = best - np.cumsum(oracle.mu[trace.actions].sum(axis=1))
    regret_quantized = best - np.cumsum(trace.rewards.sum(axis=1))

    normalized = np.full(T, np.nan)
    if T >= 2:
        normalized[1:] = regret[1:] / np.log(t_axis[1:])

    suboptimal = np.ones(K, dtype=bool)
    suboptimal[list(oracle.optimal_set)] = False
    suboptimal_cum = np.cumsum(suboptimal[trace.actions].sum(axis=1))
    channel_counts = np.bincount(trace.actions.ravel(), minlength=K)

    return MetricsSeries(regret=regret, regret_expected=regret_expected,
                         regret_quantized=regret_quantized, normalized=normalized,
                         suboptimal_cum=suboptimal_cum,
                         channel_counts=channel_counts)


def suboptimal_counts(trace: Trace, oracle: OracleStats) -> np.ndarray:
    """Selections per channel, zeroed on the optimal set."""
    K = oracle.mu.shape[0]
    counts = np.bincount(trace.actions.ravel(), minlength=K).astype(np.int64)
    counts[list(oracle.optimal_set)] = 0
    return counts


def single_step_expected_regret(mu, chosen, M: int) -> float:
    """Expected one-round regret of a concrete selection under means mu."""
    mu = np.asarray(mu, dtype=np.float64)
    best = np.sort(mu)[::-1][:M].sum()
    return float(best - mu[list(chosen)].sum())


def checkpoints(T: int) -> list:
    """Decade checkpoints 100, 1000, ... plus the horizon itself."""
    out = []
    c = 100
    while c < T:
        out.append(c)
        c *= 10
    out.append(T)
    return out


# ---------------------------------------------------------------------------
# multi-run drivers


@dataclass
class RunResult:
    scenario: str
    policy: str
    seed: int
    series: MetricsSeries
    oracle: OracleStats
    T: int


def run_config(cfg: RunConfig) -> list:
    """All seeds of one configuration."""
    results = []
    for seed in cfg.seeds:
        scen = build_scenario(cfg, seed)
        env = Environment(scen)
        policy = make_policy(cfg, scen, RngStream(seed, "policy"))
        trace = play(env, policy, scenario_name=scen.name, policy_label=cfg.label(),
                     seed=seed)
        oracle = oracle_stats(scen)
        results.append(RunResult(scenario=scen.name, policy=cfg.label(), seed=seed,
                                 series=compute_regret(trace, oracle), oracle=oracle,
                                 T=cfg.T))
    return results


def run_bench(cfg: RunConfig, scenarios=SCENARIO_NAMES, policies=POLICY_NAMES,
              variants: bool = False) -> list:
    """Full grid: every scenario crossed with every policy (and, with
    variants=True, the rca-hosted literal/composite contextual runs)."""
    results = []
    grid = [(s, p, "none", "literal") for s in scenarios for p in policies]
    if variants:
        for s in scenarios:
            for p in ("lucb", "nucb"):
                if p in policies:
                    grid.append((s, p, "rca", "literal"))
                    grid.append((s, p, "rca", "composite"))
    for scenario, policy, host, index_mode in grid:
        sub = dataclasses.replace(cfg, scenario=scenario, policy=policy,
                                  host=host, index_mode=index_mode)
        results.extend(run_config(sub))
    return results


def run_sweep(cfg: RunConfig, axis: str, values) -> tuple:
    """Sweep one hyperparameter; returns (per-run rows, per-value summary)."""
    if axis not in ("beta", "M"):
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    rows = []
    summary = []
    for value in values:
        if axis == "beta":
            sub = dataclasses.replace(cfg, beta=float(value))
        else:
            sub = dataclasses.replace(cfg, M=int(value))
        finals = []
        for res in run_config(sub):
            rows.append({"axis": axis, "value": value, "seed": res.seed,
                         "final_regret": res.series.final_regret,
                         "final_normalized_regret": res.series.final_normalized})
            finals.append(res.series.final_normalized)
        summary.append({"axis": axis, "value": value,
                        "mean_final_normalized_regret": float(np.mean(finals))})
    return rows, summary


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    return repr(float(value))


def emit_results(results: list, outdir, manifest: dict | None = None) -> dict:
    """Write results.csv, channel_counts.csv and manifest.json.

    Deterministic: rows are fully ordered and floats use repr, so identical
    runs produce byte-identical files.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output dir {outdir}: {exc}") from exc

    ordered = sorted(results, key=lambda r: (r.scenario, r.policy, r.seed))
    paths = {}

    results_path = outdir / "results.csv"
    with results_path.open("w") as fh:
        fh.write("scenario,policy,seed,t,regret,normalized_regret,"
                 "quantized_regret,suboptimal_total\n")
        for res in ordered:
            for t in checkpoints(res.T):
                i = t - 1
                fh.write(",".join([
                    res.scenario, res.policy, str(res.seed), str(t),
                    _fmt(res.series.regret[i]),
                    _fmt(res.series.normalized[i]),
                    _fmt(res.series.regret_quantized[i]),
                    str(int(res.series.suboptimal_cum[i])),
                ]) + "\n")
    paths["results"] = results_path

    counts_path = outdir / "channel_counts.csv"
    with counts_path.open("w") as fh:
        fh.write("scenario,policy,seed,channel,selections,suboptimal\n")
        for res in ordered:
            optimal = set(res.oracle.optimal_set)
            for k, count in enumerate(res.series.channel_counts):
                fh.write(",".join([
                    res.scenario, res.policy, str(res.seed), str(k + 1),
                    str(int(count)), "0" if k in optimal else "1",
                ]) + "\n")
    paths["channel_counts"] = counts_path

    manifest_path = outdir / "manifest.json"
    with manifest_path.open("w") as fh:
        json.dump(manifest or {}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["manifest"] = manifest_path
    return paths


def emit_sweep(rows: list, summary: list, outdir) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows_path = outdir / "sweep.csv"
    with rows_path.open("w") as fh:
        fh.write("axis,value,seed,final_regret,final_normalized_regret\n")
        for row in rows:
            fh.write(",".join([
                row["axis"], _fmt(row["value"]), str(row["seed"]),
                _fmt(row["final_regret"]), _fmt(row["final_normalized_regret"]),
            ]) + "\n")
    summary_path = outdir / "sweep_summary.csv"
    with summary_path.open("w") as fh:
        fh.write("axis,value,mean_final_normalized_regret\n")
        for row in summary:
            fh.write(",".join([
                row["axis"], _fmt(row["value"]),
                _fmt(row["mean_final_normalized_regret"]),
            ]) + "\n")
    return {"sweep": rows_path, "summary": summary_path}


def manifest_for(cfg: RunConfig, extra: dict | None = None) -> dict:
    from . import __version__
    from ._kernels import BACKEND

    out = {"config": dataclasses.asdict(cfg), "package": f"mpbandits {__version__}",
           "kernel_backend": BACKEND}
    out["config"]["seeds"] = list(cfg.seeds)
    if extra:
        out.update(extra)
    return out
