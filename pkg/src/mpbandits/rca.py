"""Regenerative-cycle estimation for restless arms.

A restless chain keeps evolving while unplayed, so raw play records are
not identically distributed. Anchoring every recorded stretch at a fixed
regenerative state restores renewal structure: each completed block holds
the samples from one visit to the regenerative state up to (excluding)
the next such visit, and the concatenation of blocks behaves like one
stationary sample path. Sample means over that path estimate the
stationary mean reward without restless bias.

Provides the standalone top-M cycle policy and a host that gives the same
block-epoch scheduling to a contextual policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .policies import ActionSet, Feedback, Policy, top_m

SB1, SB2 = 0, 1  # waiting for the regenerative state / recording a block


@dataclass
class CycleState:
    """Per-arm block bookkeeping.

    reward_sum / sample_count accumulate only SB2 (concatenated-path)
    samples. The observation that closes a block is the anchor of the
    *next* renewal cycle and is deliberately not recorded; recording it
    would double-count the regenerative state and bias the path mean.
    """

    regen_state: int = 1
    phase: int = SB1
    reward_sum: float = 0.0
    sample_count: int = 0
    blocks: int = 0
    _left_regen: bool = False  # current block has seen a non-regenerative state

    def observe(self, state: int, reward: float) -> bool:
        """Feed one played-round observation; True when a block completes."""
        if self.phase == SB1:
            if state == self.regen_state:
                self.phase = SB2
                self._left_regen = False
                self.reward_sum += reward
                self.sample_count += 1
            return False
        if state == self.regen_state:
            if self._left_regen:
                self.blocks += 1
                self.phase = SB1
                self._left_regen = False
                return True
            self.reward_sum += reward
            self.sample_count += 1
            return False
        self.reward_sum += reward
        self.sample_count += 1
        self._left_regen = True
        return False

    def mean(self) -> float:
        return self.reward_sum / self.sample_count if self.sample_count else math.nan


@dataclass(frozen=True)
class RcaConfig:
    """exploration_scale is the L in the sqrt(L ln t2 / T) width."""

    exploration_scale: float = 2.0
    regen_state: int = 1

    def __post_init__(self):
        if self.exploration_scale <= 0.0:
            raise ConfigurationError("exploration scale must be positive")


def rca_index(cycle: CycleState, cfg: RcaConfig, t2_global: int) -> float:
    """Concatenated-path mean plus exploration width; +inf if unsampled."""
    if cycle.sample_count == 0:
        return math.inf
    width = math.sqrt(cfg.exploration_scale * math.log(max(t2_global, 1))
                      / cycle.sample_count)
    return cycle.reward_sum / cycle.sample_count + width


class _BlockScheduler:
    """Shared epoch logic: hold a selection until every chosen arm has
    completed the block it opened this epoch."""

    def __init__(self, K: int, regen_state: int):
        self.cycles = [CycleState(regen_state=regen_state) for _ in range(K)]
        self.current: ActionSet | None = None
        self._open = set()

    @property
    def t2(self) -> int:
        return sum(c.sample_count for c in self.cycles)

    def epoch_done(self) -> bool:
        return self.current is None or not self._open

    def start_epoch(self, action: ActionSet) -> None:
        self.current = action
        self._open = set(action.chosen)

    def feed(self, fb: Feedback) -> None:
        for arm, state, reward in zip(fb.played, fb.states, fb.rewards):
            if arm in self._open:
                if self.cycles[arm].observe(int(state), float(reward)):
                    self._open.discard(arm)


class RcaPolicy(Policy):
    """Top-M arms by cycle index, reselected at block barriers only.

    First selection is pure forced exploration: every index is +inf, so
    the tie-break picks a uniformly random M-subset.
    """

    name = "rca"

    def __init__(self, K, M, rng, config: RcaConfig | None = None):
        super().__init__(K, M, rng, forced_init=False)
        self.config = config or RcaConfig()
        self.sched = _BlockScheduler(K, self.config.regen_state)

    def indices(self) -> np.ndarray:
        t2 = self.sched.t2
        return np.array([rca_index(c, self.config, t2) for c in self.sched.cycles])

    def _select(self, obs):
        if not self.sched.epoch_done():
            return self.sched.current
        self.last_indices = self.indices()
        self.sched.start_epoch(top_m(self.last_indices, self.M, self.rng))
        return self.sched.current

    def learn(self, fb):
        self.sched.feed(fb)


class RcaHostedPolicy(Policy):
    """Runs a contextual policy under block-epoch scheduling.

    The inner policy reselects only at block barriers but its context
    model keeps learning every round (contexts are i.i.d., unlike the
    chain states). In composite index mode the inner selection combines
    the cycle mean and width with the perturbation estimate; the cycle
    statistics come from this host.
    """

    def __init__(self, inner, rng, config: RcaConfig | None = None):
        super().__init__(inner.K, inner.M, rng, forced_init=False)
        self.inner = inner
        self.needs_states = inner.needs_states
        self.config = config or RcaConfig()
        self.sched = _BlockScheduler(inner.K, self.config.regen_state)

    def cycle_terms(self) -> np.ndarray:
        """Per-arm cycle mean + width (+inf for unsampled arms)."""
        t2 = self.sched.t2
        return np.array([rca_index(c, self.config, t2) for c in self.sched.cycles])

    def _select(self, obs):
        if not self.sched.epoch_done():
            return self.sched.current
        action = self.inner.select(obs, cycle_terms=self.cycle_terms())
        self.sched.start_epoch(action)
        return self.sched.current

    def learn(self, fb):
        self.sched.feed(fb)
        self.inner.learn(fb)
