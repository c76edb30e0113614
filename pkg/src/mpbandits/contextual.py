"""Context-driven multi-play policies.

Both policies learn the map from a channel's context vector to its reward
perturbation (the noise) and rank arms on a confidence-bounded estimate:

  linear:  n_hat = theta^T x with ridge-regression theta, width
           beta * sqrt(x^T Lambda^-1 x) from the accumulated design matrix;
  neural:  n_hat from a small ReLU network, width
           gamma * sqrt(g^T Z^-1 g) over the network gradient g, with Z
           accumulated as g g^T / D.

Selection treats the upper bound u = n_hat + width as the worst-case
perturbation: an arm worth picking under its maximum plausible noise is
safe to pick when the noise is mild, so the M channels with the SMALLEST
u become the candidates. A replacement pass then repairs the set on the
net values h(state) - n_hat: any candidate whose net value is
non-positive is swapped for a complement channel with a non-negative one
(candidates scanned by ascending net value, complements by descending,
each complement used at most once). The pass needs the observed states,
so it is skipped under bandit feedback.

In composite mode (under the cycle host) the selection score is instead
the optimistic net-value index cycle_mean + cycle_width - n_hat + width,
sorted descending as usual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numkit
from ._kernels import quad_form, sm_update
from .errors import ConfigurationError, ContractViolation
from .numkit import AdamState, MlpParams, RngStream, adam_step, mlp_batch_loss_grad
from .policies import ActionSet, Policy, top_m

TRAIN_WINDOW = 256  # most recent samples used per training pass


@dataclass(frozen=True)
class PerturbationEstimate:
    point: float
    width: float

    def __post_init__(self):
        if self.width < 0.0:
            raise ContractViolation(f"negative confidence width {self.width}")

    @property
    def upper(self) -> float:
        return self.point + self.width


def replacement_pass(action: ActionSet, net_values: np.ndarray) -> ActionSet:
    """Swap non-positive-valued candidates for non-negative complements."""
    outgoing = sorted((m for m in action.chosen if net_values[m] <= 0.0),
                      key=lambda m: net_values[m])
    incoming = sorted((j for j in action.complement if net_values[j] >= 0.0),
                      key=lambda j: -net_values[j])
    if not outgoing or not incoming:
        return action
    chosen = list(action.chosen)
    for m, j in zip(outgoing, incoming):
        chosen[chosen.index(m)] = j
    return ActionSet.from_chosen(chosen, action.K)


class LinearModel:
    """Ridge regression state: design matrix, its maintained inverse, and
    the response accumulator. Regularization weight fixed at 1 (identity)."""

    def __init__(self, d: int, beta: float = 1.0):
        if beta <= 0.0:
            raise ConfigurationError(f"beta must be positive, got {beta}")
        self.beta = beta
        self.lam = np.eye(d)
        self.lam_inv = np.eye(d)
        self.b = np.zeros(d)
        self.theta = np.zeros(d)

    def estimate(self, x: np.ndarray) -> PerturbationEstimate:
        point = float(self.theta @ x)
        width = self.beta * math.sqrt(max(quad_form(self.lam_inv, x), 0.0))
        return PerturbationEstimate(point=point, width=width)

    def update(self, x: np.ndarray, target: float) -> None:
        x = np.ascontiguousarray(x, dtype=np.float64)
        self.lam += np.outer(x, x)
        sm_update(self.lam_inv, x)
        self.b += target * x
        self.theta = self.lam_inv @ self.b


def ridge_theta(model: LinearModel) -> np.ndarray:
    """Current coefficient estimate Lambda^-1 b (the ridge-loss minimizer)."""
    return model.lam_inv @ model.b


def block_gaussian_weights(d: int, D: int, depth: int,
                           rng: np.random.Generator) -> list:
    """Block-diagonal Gaussian initialization.

    Hidden layers are [[W, 0], [0, W]] with W entries N(0, 4/D); the output
    layer is [w, -w] with w entries N(0, 2/D). The antisymmetric output
    pair makes the initial network vanish exactly on inputs whose two
    halves agree.
    """
    if d % 2 or D % 2:
        raise ConfigurationError(f"block init needs even dims, got d={d}, D={D}")
    weights = []
    in_dim = d
    for _ in range(depth - 1):
        half = rng.normal(0.0, 2.0 / math.sqrt(D), (D // 2, in_dim // 2))
        full = np.zeros((D, in_dim))
        full[:D // 2, :in_dim // 2] = half
        full[D // 2:, in_dim // 2:] = half
        weights.append(full)
        in_dim = D
    w = rng.normal(0.0, math.sqrt(2.0 / D), D // 2)
    weights.append(np.concatenate([w, -w])[None, :])
    return weights


class NeuralModel:
    """Network, gradient design matrix, optimizer state and replay buffer."""

    def __init__(self, d: int, width: int = 16, depth: int = 2,
                 dropout: float = 0.1, gamma: float = 1.0, lr: float = 0.005,
                 buffer_capacity: int = 4096, rng: np.random.Generator | None = None,
                 mirror: bool = False):
        if gamma <= 0.0:
            raise ConfigurationError(f"gamma must be positive, got {gamma}")
        rng = rng if rng is not None else np.random.default_rng()
        self.gamma = gamma
        self.mirror = mirror
        d_eff = 2 * d if mirror else d
        self.params = MlpParams(block_gaussian_weights(d_eff, width, depth, rng),
                                dropout=dropout)
        self.z_inv = np.eye(self.params.size)
        self.adam = AdamState(self.params.size, lr=lr)
        self._grad_buf = np.empty(self.params.size)
        self._buf_x = np.empty((buffer_capacity, d_eff))
        self._buf_y = np.empty(buffer_capacity)
        self._seen = 0

    def _transform(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if self.mirror:
            # duplicated halves keep the norm bound and make the block
            # initialization vanish exactly at round one
            return np.concatenate([x, x]) / math.sqrt(2.0)
        return x

    def estimate(self, x: np.ndarray) -> PerturbationEstimate:
        x = self._transform(x)
        point = numkit.mlp_value_and_gradient(self.params, x, self._grad_buf)
        width = self.gamma * math.sqrt(max(quad_form(self.z_inv, self._grad_buf), 0.0))
        return PerturbationEstimate(point=point, width=width)

    def learn(self, x: np.ndarray, target: float, rng: np.random.Generator) -> None:
        """Record the sample, grow the gradient design, run one training pass."""
        x = self._transform(x)
        cap = self._buf_x.shape[0]
        self._buf_x[self._seen % cap] = x
        self._buf_y[self._seen % cap] = target
        self._seen += 1

        numkit.mlp_value_and_gradient(self.params, x, self._grad_buf)
        sm_update(self.z_inv, self._grad_buf / math.sqrt(self.params.width))

        n = min(self._seen, cap)
        take = min(n, TRAIN_WINDOW)
        idx = np.arange(self._seen - take, self._seen) % cap
        loss, grad = mlp_batch_loss_grad(self.params, self._buf_x[idx],
                                         self._buf_y[idx], rng=rng)
        self.params.from_vector(adam_step(self.adam, self.params.to_vector(), grad))


class ContextualPolicy(Policy):
    """Shared selection logic for the linear and neural policies."""

    needs_states = True

    def __init__(self, K, M, d, rng: RngStream, reward_levels=(0.1, 1.0),
                 index_mode: str = "literal", shared: bool = True):
        if index_mode not in ("literal", "composite"):
            raise ConfigurationError(f"unknown index mode {index_mode!r}")
        super().__init__(K, M, rng.child("select") if isinstance(rng, RngStream) else rng,
                         forced_init=False)
        self.d = d
        self.h_bad, self.h_good = reward_levels
        self.index_mode = index_mode
        self.shared = shared
        self.last_estimates: list = []
        self.last_indices: np.ndarray | None = None

    def model_for(self, arm: int):
        return self.models[0] if self.shared else self.models[arm]

    def _select(self, obs, cycle_terms=None):
        if self.index_mode == "composite" and cycle_terms is None:
            raise ConfigurationError(
                "composite index mode needs cycle statistics (run under the rca host)")
        est = [self.model_for(k).estimate(obs.contexts[k]) for k in range(self.K)]
        if self.index_mode == "composite":
            idx = np.array([cycle_terms[k] - est[k].point + est[k].width
                            for k in range(self.K)])
        else:
            # robust-to-noise ranking: smallest worst-case perturbation first
            idx = np.array([-e.upper for e in est])
        action = top_m(idx, self.M, self.rng)
        if obs.states is not None:
            state_reward = np.where(obs.states == 1, self.h_good, self.h_bad)
            net = state_reward - np.array([e.point for e in est])
            action = replacement_pass(action, net)
        self.last_estimates = est
        self.last_indices = idx
        return action


class LinUcbPolicy(ContextualPolicy):
    """Multi-play linear-UCB with the net-value replacement pass.

    target_mode "observed" regresses on the realized perturbation from
    feedback; "literal" regresses on the model's own prediction (a fixed
    point that never moves from zero, kept for fidelity experiments).
    """

    name = "lucb"

    def __init__(self, K, M, d, rng, beta: float = 1.0, target_mode: str = "observed",
                 reward_levels=(0.1, 1.0), index_mode: str = "literal",
                 shared: bool = True):
        super().__init__(K, M, d, rng, reward_levels, index_mode, shared)
        if target_mode not in ("observed", "literal"):
            raise ConfigurationError(f"unknown target mode {target_mode!r}")
        self.target_mode = target_mode
        count = 1 if shared else K
        self.models = [LinearModel(d, beta) for _ in range(count)]

    def learn(self, fb):
        for i, arm in enumerate(fb.played):
            model = self.model_for(arm)
            x = fb.contexts[i]
            if self.target_mode == "observed":
                target = float(fb.noise[i])
            else:
                target = float(model.theta @ x)
            model.update(x, target)


class NeuralUcbPolicy(ContextualPolicy):
    """Multi-play neural-UCB: MLP perturbation model with gradient widths."""

    name = "nucb"

    def __init__(self, K, M, d, rng, gamma: float = 1.0, width: int = 16,
                 depth: int = 2, dropout: float = 0.1, lr: float = 0.005,
                 buffer_capacity: int = 4096, reward_levels=(0.1, 1.0),
                 index_mode: str = "literal", shared: bool = True,
                 mirror_inputs: bool = False):
        super().__init__(K, M, d, rng, reward_levels, index_mode, shared)
        base = rng if isinstance(rng, RngStream) else None
        if base is None:
            raise ConfigurationError("neural policy needs an RngStream")
        self._train_rng = base.child("dropout").gen
        count = 1 if shared else K
        self.models = [
            NeuralModel(d, width=width, depth=depth, dropout=dropout, gamma=gamma,
                        lr=lr, buffer_capacity=buffer_capacity,
                        rng=base.child("init", i).gen, mirror=mirror_inputs)
            for i in range(count)
        ]

    def learn(self, fb):
        for i, arm in enumerate(fb.played):
            self.model_for(arm).learn(fb.contexts[i], float(fb.noise[i]),
                                      self._train_rng)
