"""Policy interface and the context-free baselines.

A policy is asked for an ActionSet each round via select(obs) and told the
outcome via learn(feedback). The baselines here (random, ucb, klucb) use
only the quantized rewards of the arms they played; each starts with a
round-robin initialization so every arm is tried once within ceil(K/M)
rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ContractViolation
from .numkit import RngStream


@dataclass(frozen=True)
class ActionSet:
    """Partition of the K channels into M chosen and K-M complement."""

    chosen: tuple
    complement: tuple

    def __post_init__(self):
        overlap = set(self.chosen) & set(self.complement)
        if overlap:
            raise ContractViolation(f"chosen and complement overlap: {overlap}")

    @classmethod
    def from_chosen(cls, chosen, K: int) -> "ActionSet":
        chosen = tuple(int(c) for c in chosen)
        rest = tuple(k for k in range(K) if k not in set(chosen))
        return cls(chosen=chosen, complement=rest)

    @property
    def K(self) -> int:
        return len(self.chosen) + len(self.complement)


@dataclass(frozen=True)
class Feedback:
    """Round outcome as revealed to a policy.

    Played-arm entries are always present (aligned with `played`); the
    all-channel arrays are filled only in full-information mode.
    """

    t: int
    played: tuple
    rewards: np.ndarray           # quantized rewards of the played arms
    states: np.ndarray            # observed states of the played arms
    noise: np.ndarray             # realized perturbations of the played arms
    contexts: np.ndarray          # contexts of the played arms, (len(played), d)
    all_states: np.ndarray | None = None
    all_noise: np.ndarray | None = None


class ArmStats:
    """Play counts and running reward means for K arms."""

    def __init__(self, K: int):
        self.counts = np.zeros(K, dtype=np.int64)
        self.sums = np.zeros(K)

    def update(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward

    def mean(self, arm: int) -> float:
        if self.counts[arm] == 0:
            raise ContractViolation(f"arm {arm} has no plays")
        return self.sums[arm] / self.counts[arm]

    def means(self) -> np.ndarray:
        """Per-arm sample means; unplayed arms come back as +inf."""
        with np.errstate(divide="ignore", invalid="ignore"):
            m = self.sums / self.counts
        m[self.counts == 0] = np.inf
        return m


def top_m(indices, M: int, rng: np.random.Generator) -> ActionSet:
    """The M channels with the largest index, ties broken uniformly."""
    indices = np.asarray(indices, dtype=np.float64)
    K = indices.shape[0]
    if M > K:
        raise ContractViolation(f"M={M} exceeds K={K}")
    # random secondary key => ties resolved uniformly at random
    order = np.lexsort((rng.random(K), -indices))
    return ActionSet.from_chosen(order[:M], K)


def random_subset(K: int, M: int, rng: np.random.Generator) -> ActionSet:
    """Uniform draw over all C(K, M) subsets."""
    if M > K:
        raise ContractViolation(f"M={M} exceeds K={K}")
    chosen = rng.choice(K, size=M, replace=False)
    return ActionSet.from_chosen(chosen, K)


def ucb1_index(mean: float, count: int, t: int) -> float:
    """Sample mean plus the classical sqrt(2 ln t / N) width."""
    if count == 0:
        return math.inf
    return mean + math.sqrt(2.0 * math.log(t) / count)


def kl_bernoulli(p: float, q: float) -> float:
    """KL(Bernoulli(p) || Bernoulli(q)) with the 0 log 0 = 0 convention."""
    if q <= 0.0:
        return 0.0 if p == 0.0 else math.inf
    if q >= 1.0:
        return 0.0 if p == 1.0 else math.inf
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def kl_ucb_index(mean: float, count: int, t: int,
                 support: tuple = (0.1, 1.0)) -> float:
    """Largest plausible mean under a KL budget of ln(t) / N.

    Rewards on [lo, hi] are rescaled to [0, 1] for the Bernoulli KL and
    the solved upper bound is mapped back. Bisection to 1e-6 absolute.
    """
    if count == 0:
        return math.inf
    lo, hi = support
    p = (mean - lo) / (hi - lo)
    p = min(max(p, 0.0), 1.0)
    budget = math.log(t) / count
    q = _kernels.klucb_solve(np.array([p]), np.array([budget]))[0]
    return lo + (hi - lo) * float(q)


def kl_ucb_indices(stats: ArmStats, t: int, support: tuple = (0.1, 1.0)) -> np.ndarray:
    """Vectorised kl_ucb_index over all arms (+inf where unplayed)."""
    lo, hi = support
    out = np.full(stats.counts.shape, np.inf)
    played = stats.counts > 0
    if played.any():
        p = (stats.sums[played] / stats.counts[played] - lo) / (hi - lo)
        p = np.clip(p, 0.0, 1.0)
        budget = math.log(t) / stats.counts[played]
        out[played] = lo + (hi - lo) * _kernels.klucb_solve(p, budget)
    return out


def init_blocks(K: int, M: int) -> list:
    """Round-robin M-blocks covering every arm once in ceil(K/M) rounds."""
    rounds = -(-K // M)
    return [tuple((r * M + i) % K for i in range(M)) for r in range(rounds)]


class Policy:
    """Base class: forced initialization plus per-round bookkeeping."""

    name = "base"
    needs_states = False  # whether select() uses all-channel states

    def __init__(self, K: int, M: int, rng: RngStream, forced_init: bool = True):
        self.K = K
        self.M = M
        self.rng = rng.gen if isinstance(rng, RngStream) else rng
        self.t = 0
        self._pending = list(init_blocks(K, M)) if forced_init else []

    def select(self, obs, **kw) -> ActionSet:
        self.t += 1
        if self._pending:
            return ActionSet.from_chosen(self._pending.pop(0), self.K)
        return self._select(obs, **kw)

    def _select(self, obs, **kw) -> ActionSet:
        raise NotImplementedError

    def learn(self, fb: Feedback) -> None:
        pass


class RandomPolicy(Policy):
    """Uniformly random M-subsets."""

    name = "random"

    def _select(self, obs):
        return random_subset(self.K, self.M, self.rng)


class UcbPolicy(Policy):
    """Top-M selection on classical UCB indices of the quantized rewards."""

    name = "ucb"

    def __init__(self, K, M, rng, forced_init=True):
        super().__init__(K, M, rng, forced_init)
        self.stats = ArmStats(K)

    def indices(self) -> np.ndarray:
        out = np.full(self.K, np.inf)
        played = self.stats.counts > 0
        means = self.stats.sums[played] / self.stats.counts[played]
        out[played] = means + np.sqrt(2.0 * math.log(self.t) / self.stats.counts[played])
        return out

    def _select(self, obs):
        self.last_indices = self.indices()
        return top_m(self.last_indices, self.M, self.rng)

    def learn(self, fb):
        for arm, r in zip(fb.played, fb.rewards):
            self.stats.update(arm, float(r))


class KlUcbPolicy(UcbPolicy):
    """Top-M selection on Bernoulli KL upper-confidence indices."""

    name = "klucb"

    def __init__(self, K, M, rng, support=(0.1, 1.0), forced_init=True):
        super().__init__(K, M, rng, forced_init)
        self.support = support

    def indices(self) -> np.ndarray:
        return kl_ucb_indices(self.stats, self.t, self.support)
