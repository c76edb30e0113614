"""Independent oracles shared across test modules.

These deliberately avoid the package's own code paths: the finite
difference gradient only calls the forward pass, the KL grid scan never
bisects, and the cycle re-scan walks a play record from scratch.
"""

import math

import numpy as np

from mpbandits.numkit import MlpParams, mlp_forward


def fd_gradient(params: MlpParams, x, h=1e-5) -> np.ndarray:
    """Central finite differences through the forward pass only."""
    vec = params.to_vector()
    grad = np.empty_like(vec)
    for i in range(vec.shape[0]):
        bumped = vec.copy()
        bumped[i] += h
        params.from_vector(bumped)
        up = mlp_forward(params, x)
        bumped[i] -= 2 * h
        params.from_vector(bumped)
        down = mlp_forward(params, x)
        grad[i] = (up - down) / (2 * h)
    params.from_vector(vec)
    return grad


def kl_bernoulli_ref(p, q):
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def klucb_grid(p, allowance, step=1e-4):
    """Largest grid point q in [p, 1) with kl(p, q) <= allowance."""
    best = p
    q = p
    while q + step < 1.0:
        q += step
        if kl_bernoulli_ref(p, q) <= allowance:
            best = q
        else:
            break
    return best


def rescan_cycles(states, rewards, regen_state=1):
    """Re-derive block statistics from a raw play record.

    Returns (blocks, sample_count, reward_sum) under the convention that a
    block records from a visit to the regenerative state up to, but not
    including, the next visit that follows at least one other state.
    """
    blocks = 0
    samples = 0
    total = 0.0
    phase_record = False
    left = False
    for s, r in zip(states, rewards):
        if not phase_record:
            if s == regen_state:
                phase_record = True
                left = False
                samples += 1
                total += r
            continue
        if s == regen_state:
            if left:
                blocks += 1
                phase_record = False
                left = False
            else:
                samples += 1
                total += r
        else:
            samples += 1
            total += r
            left = True
    return blocks, samples, total


class ConstantRng:
    """Stub generator whose random() always returns one value."""

    def __init__(self, value):
        self.value = value

    def random(self, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)
