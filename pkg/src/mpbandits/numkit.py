"""Minimal dense numerics: incremental inverse maintenance, a small
fully-connected ReLU network with analytic gradients, an adaptive-moment
optimizer and splittable seeded random streams.

Vectors and matrices are plain float64 numpy arrays. The hot kernels
(Sherman-Morrison update, quadratic form, network forward/gradient) are
dispatched through `mpbandits._kernels`, which picks the compiled core or
the numpy fallback at import time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ContractViolation, DegeneracyError

# ---------------------------------------------------------------------------
# random streams


def _key_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


class RngStream:
    """Seeded random stream addressable by a (seed, *key) path.

    Identical (seed, key) pairs yield identical draw sequences; distinct
    keys yield statistically independent streams. Key parts may be ints or
    strings (strings are hashed to 32-bit words).
    """

    def __init__(self, seed: int, *key):
        self.seed = int(seed)
        self.key = tuple(key)
        words = tuple(_key_word(p) for p in key)
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=words)))

    def child(self, *key) -> "RngStream":
        """Independent stream one level down the key hierarchy."""
        return RngStream(self.seed, *self.key, *key)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


# ---------------------------------------------------------------------------
# incremental inverse


def rank1_inverse_update(inv: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Return (A + v v^T)^-1 given inv = A^-1 (Sherman-Morrison).

    `inv` must be the symmetric positive definite inverse of some matrix,
    in which case the update denominator 1 + v^T inv v is positive.
    """
    out = np.array(inv, dtype=np.float64, order="C", copy=True)
    _kernels.sm_update(out, np.ascontiguousarray(v, dtype=np.float64))
    return out


def quad_form(mat: np.ndarray, v: np.ndarray) -> float:
    """v^T mat v."""
    return _kernels.quad_form(np.ascontiguousarray(mat, dtype=np.float64),
                              np.ascontiguousarray(v, dtype=np.float64))


# ---------------------------------------------------------------------------
# fixed-topology ReLU network


@dataclass
class MlpParams:
    """Weights of a ReLU network x -> W_L relu(... relu(W_1 x)).

    Layer shapes: W_1 is (D, d), middle layers (D, D), W_L is (1, D).
    `dropout` is the rate applied to hidden activations in train mode.
    """

    weights: list
    dropout: float = 0.0

    def __post_init__(self):
        if len(self.weights) < 2:
            raise ConfigurationError("network needs at least two layers")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout rate {self.dropout} outside [0, 1)")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        for lower, upper in zip(self.weights, self.weights[1:]):
            if upper.shape[1] != lower.shape[0]:
                raise ConfigurationError(
                    f"layer shapes do not compose: {lower.shape} -> {upper.shape}")
        if self.weights[-1].shape[0] != 1:
            raise ConfigurationError("output layer must have a single unit")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def width(self) -> int:
        return self.weights[0].shape[0]

    @property
    def size(self) -> int:
        """Total parameter count P."""
        return sum(w.size for w in self.weights)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights])

    def from_vector(self, vec: np.ndarray) -> None:
        """Load flattened parameters back into the layer matrices."""
        if vec.shape[0] != self.size:
            raise ContractViolation(
                f"parameter vector length {vec.shape[0]} != {self.size}")
        off = 0
        for w in self.weights:
            w[...] = vec[off:off + w.size].reshape(w.shape)
            off += w.size


def dropout_masks(params: MlpParams, rng: np.random.Generator) -> list | None:
    """Inverted-dropout multipliers for each hidden layer, or None if p=0."""
    if params.dropout == 0.0:
        return None
    keep = 1.0 - params.dropout
    masks = []
    for w in params.weights[:-1]:
        m = (rng.random(w.shape[0]) >= params.dropout) / keep
        masks.append(np.ascontiguousarray(m))
    return masks


def mlp_forward(params: MlpParams, x: np.ndarray, train_mode: bool = False,
                rng: np.random.Generator | None = None) -> float:
    """Network output. Deterministic unless train_mode enables dropout."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape[0] != params.input_dim:
        raise ContractViolation(f"input dim {x.shape[0]} != {params.input_dim}")
    masks = None
    if train_mode and params.dropout > 0.0:
        if rng is None:
            raise ContractViolation("train_mode with dropout needs an rng")
        masks = dropout_masks(params, rng)
    out = _kernels.mlp_forward(params.weights, x, masks)
    if not np.isfinite(out):
        raise DegeneracyError(f"non-finite network output {out}")
    return out


def mlp_gradient(params: MlpParams, x: np.ndarray,
                 out_grad: np.ndarray | None = None) -> np.ndarray:
    """Flattened parameter gradient of the output at x (dropout disabled)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape[0] != params.input_dim:
        raise ContractViolation(f"input dim {x.shape[0]} != {params.input_dim}")
    if out_grad is None:
        out_grad = np.empty(params.size)
    _kernels.mlp_grad(params.weights, x, out_grad)
    return out_grad


def mlp_value_and_gradient(params: MlpParams, x: np.ndarray,
                           out_grad: np.ndarray) -> float:
    """Forward value and flattened gradient in one pass."""
    return _kernels.mlp_grad(params.weights,
                             np.ascontiguousarray(x, dtype=np.float64), out_grad)


def mlp_batch_loss_grad(params: MlpParams, X: np.ndarray, y: np.ndarray,
                        rng: np.random.Generator | None = None) -> tuple:
    """Mean squared-error loss and its parameter gradient over a batch.

    Dropout (fresh mask per sample) is applied when the params carry a
    nonzero rate and an rng is given. Stays vectorised numpy in both
    backends: BLAS beats per-sample loops at batch size.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = X.shape[0]
    last = params.depth - 1
    keep = 1.0 - params.dropout
    use_dropout = params.dropout > 0.0 and rng is not None

    acts = [X]
    masks = []
    a = X
    for i, w in enumerate(params.weights):
        z = a @ w.T
        if i < last:
            a = np.maximum(z, 0.0)
            if use_dropout:
                m = (rng.random(z.shape) >= params.dropout) / keep
                a = a * m
                masks.append(m)
            acts.append(a)
        else:
            a = z
    pred = a[:, 0]
    err = pred - y
    loss = float(err @ err) / n

    grads = [None] * params.depth
    delta = (2.0 / n) * err[:, None]
    for i in range(last, -1, -1):
        grads[i] = delta.T @ acts[i]
        if i > 0:
            delta = delta @ params.weights[i]
            if use_dropout:
                delta = delta * masks[i - 1]
            delta = delta * (acts[i] > 0.0)
    return loss, np.concatenate([g.ravel() for g in grads])


# ---------------------------------------------------------------------------
# adaptive-moment optimizer


@dataclass
class AdamState:
    """First/second moment accumulators and step counter."""

    size: int
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.m = np.zeros(self.size)
        self.v = np.zeros(self.size)


def adam_step(opt: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected update; mutates `opt`, returns the new parameters."""
    if params.shape != grad.shape or params.shape[0] != opt.size:
        raise ContractViolation(
            f"adam shapes disagree: {params.shape}, {grad.shape}, state {opt.size}")
    opt.step_count += 1
    opt.m += (1.0 - opt.beta1) * (grad - opt.m)
    opt.v += (1.0 - opt.beta2) * (grad * grad - opt.v)
    m_hat = opt.m / (1.0 - opt.beta1 ** opt.step_count)
    v_hat = opt.v / (1.0 - opt.beta2 ** opt.step_count)
    return params - opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
