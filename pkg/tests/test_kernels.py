"""Backend equivalence: the compiled core and the numpy fallback must agree."""

import math

import numpy as np
import pytest

from mpbandits import _kernels
from mpbandits._kernels import _py
from mpbandits.errors import ContractViolation, DegeneracyError

try:
    from mpbandits._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")

BACKENDS = [_py] + ([_core] if _core is not None else [])


def random_net(rng, d=8, width=16, depth=2):
    shapes = [(width, d)] + [(width, width)] * (depth - 2) + [(1, width)]
    return [np.ascontiguousarray(rng.normal(size=s)) for s in shapes]


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestEachBackend:
    def test_sm_update_against_direct_inverse(self, impl):
        rng = np.random.default_rng(0)
        inv = np.eye(6)
        acc = np.eye(6)
        for _ in range(200):
            v = rng.random(6) / math.sqrt(6)
            impl.sm_update(inv, v)
            acc += np.outer(v, v)
        assert np.abs(inv - np.linalg.inv(acc)).max() < 1e-10
        assert np.array_equal(inv, inv.T)

    def test_sm_update_shape_mismatch(self, impl):
        with pytest.raises(ContractViolation):
            impl.sm_update(np.eye(3), np.ones(2))

    def test_sm_update_degenerate_denominator(self, impl):
        inv = np.ascontiguousarray(-np.eye(2))
        with pytest.raises(DegeneracyError):
            impl.sm_update(inv, np.array([2.0, 0.0]))

    def test_quad_form(self, impl):
        rng = np.random.default_rng(1)
        m = np.ascontiguousarray(rng.random((5, 5)))
        v = rng.random(5)
        assert impl.quad_form(m, v) == pytest.approx(v @ m @ v, rel=1e-12)

    def test_forward_matches_manual(self, impl):
        rng = np.random.default_rng(2)
        weights = random_net(rng)
        x = rng.random(8)
        manual = weights[1] @ np.maximum(weights[0] @ x, 0.0)
        assert impl.mlp_forward(weights, x) == pytest.approx(float(manual[0]), rel=1e-12)

    def test_forward_with_masks(self, impl):
        rng = np.random.default_rng(3)
        weights = random_net(rng)
        x = rng.random(8)
        mask = np.ascontiguousarray((rng.random(16) > 0.5) / 0.5)
        manual = weights[1] @ (np.maximum(weights[0] @ x, 0.0) * mask)
        got = impl.mlp_forward(weights, x, [mask])
        assert got == pytest.approx(float(manual[0]), rel=1e-12)

    def test_klucb_solve_bounds(self, impl):
        p = np.array([0.0, 0.3, 0.9, 1.0])
        allowance = np.array([0.5, 0.5, 0.01, 0.2])
        q = impl.klucb_solve(p, allowance)
        assert np.all(q >= p) and np.all(q <= 1.0)
        assert q[3] == pytest.approx(1.0)


@needs_core
class TestBackendParity:
    def test_sm_update_parity(self):
        rng = np.random.default_rng(4)
        a = np.eye(10)
        b = np.eye(10)
        for _ in range(500):
            v = rng.random(10) / 3.0
            _core.sm_update(a, v)
            _py.sm_update(b, v)
        assert np.abs(a - b).max() < 1e-12

    @pytest.mark.parametrize("depth", [2, 3])
    def test_mlp_parity(self, depth):
        rng = np.random.default_rng(5)
        for _ in range(20):
            weights = random_net(rng, depth=depth)
            x = rng.random(8)
            size = sum(w.size for w in weights)
            ga, gb = np.empty(size), np.empty(size)
            oa = _core.mlp_grad(weights, x, ga)
            ob = _py.mlp_grad(weights, x, gb)
            assert oa == pytest.approx(ob, rel=1e-12, abs=1e-12)
            assert np.abs(ga - gb).max() < 1e-10
            assert _core.mlp_forward(weights, x) == pytest.approx(
                _py.mlp_forward(weights, x), rel=1e-12, abs=1e-12)

    def test_klucb_parity(self):
        rng = np.random.default_rng(6)
        p = rng.random(100)
        allowance = rng.random(100) * 2
        qa = _core.klucb_solve(p, allowance)
        qb = _py.klucb_solve(p, allowance)
        assert np.abs(qa - qb).max() < 1e-9

    def test_selected_backend_is_compiled(self):
        assert _kernels.BACKEND == "compiled"
