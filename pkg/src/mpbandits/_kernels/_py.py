"""Pure-numpy kernel implementations.

Mirrors the signatures of the compiled core (`_core.pyx`); one of the two
modules is selected at import time by `mpbandits._kernels`.

Conventions shared by both backends:
  * matrices are C-contiguous float64,
  * MLP weights are a list [W1 (D,d), W2 (D,D) ..., WL (1,D)],
  * flattened gradients concatenate the row-major entries of each layer,
  * ReLU subgradient at 0 is 0,
  * `masks` are post-activation multipliers (inverted-dropout scaling
    already applied), one vector per hidden layer, or None.
"""

import numpy as np

from ..errors import ContractViolation, DegeneracyError

BISECT_ITERS = 40  # interval shrinks to 0.9 / 2^40 << the 1e-6 tolerance


def sm_update(inv, v):
    """In-place Sherman-Morrison update: inv <- (A + v v^T)^-1 for inv = A^-1."""
    if inv.shape[0] != inv.shape[1] or v.shape[0] != inv.shape[0]:
        raise ContractViolation(
            f"rank-1 update shape mismatch: {inv.shape} vs {v.shape}")
    w = inv @ v
    denom = 1.0 + v @ w
    if denom <= 0.0:
        raise DegeneracyError(f"non-positive update denominator {denom}")
    inv -= np.outer(w, w) / denom
    # keep the maintained inverse exactly symmetric against fp drift
    inv += inv.T
    inv *= 0.5


def quad_form(mat, v):
    """v^T mat v."""
    return float(v @ mat @ v)


def _head_dot(w_row, a):
    """Output-row dot product with half-paired summation.

    Pairing column i with i + n/2 and adding each pair before accumulating
    makes an antisymmetric head ([w, -w] applied to mirrored activations)
    cancel exactly: every pair is t + (-t) = 0 in IEEE arithmetic.
    """
    n = a.shape[0]
    h = n // 2
    prod = w_row * a
    total = float((prod[:h] + prod[h:2 * h]).sum())
    if n % 2:
        total += float(prod[-1])
    return total


def mlp_forward(weights, x, masks=None):
    """Scalar output of the ReLU network; `masks` enables dropout."""
    a = x
    last = len(weights) - 1
    for i, w in enumerate(weights):
        if i == last:
            return _head_dot(w[0], a)
        a = w @ a
        a = np.maximum(a, 0.0)
        if masks is not None:
            a = a * masks[i]
    raise AssertionError("unreachable")


def mlp_grad(weights, x, grad_out):
    """Reverse-mode gradient of the scalar output w.r.t. all weights.

    Writes the flattened gradient into `grad_out` (length P) and returns
    the forward output. Dropout is never applied here.
    """
    last = len(weights) - 1
    acts = [x]
    pre = []
    a = x
    for i, w in enumerate(weights):
        if i == last:
            z = np.array([_head_dot(w[0], a)])
        else:
            z = w @ a
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    out = float(a[0])

    offsets = np.cumsum([0] + [w.size for w in weights])
    delta = np.ones(1)
    for i in range(last, -1, -1):
        grad_out[offsets[i]:offsets[i + 1]] = np.outer(delta, acts[i]).ravel()
        if i > 0:
            delta = (weights[i].T @ delta) * (pre[i - 1] > 0.0)
    return out


def klucb_solve(p, allowance):
    """Largest q in [p, 1] with kl_bernoulli(p, q) <= allowance, per entry.

    Vectorised bisection with a fixed iteration count so results are
    bit-reproducible across runs.
    """
    p = np.asarray(p, dtype=np.float64)
    lo = p.copy()
    hi = np.ones_like(p)
    one_minus_p = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            kl = np.where(p > 0.0, p * np.log(p / mid), 0.0)
            kl += np.where(one_minus_p > 0.0,
                           one_minus_p * np.log(one_minus_p / (1.0 - mid)),
                           0.0)
            ok = kl <= allowance
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
    return lo
