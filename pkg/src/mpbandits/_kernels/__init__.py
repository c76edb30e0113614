"""Kernel backend selection.

Imports the compiled core when available, otherwise the numpy fallback.
Set MPBANDITS_PURE_PYTHON=1 to force the fallback (used by the test suite
and the kernel benchmark to compare backends).
"""

import os

if os.environ.get("MPBANDITS_PURE_PYTHON"):
    from . import _py as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _py as _impl

        BACKEND = "python"

BISECT_ITERS = _impl.BISECT_ITERS
sm_update = _impl.sm_update
quad_form = _impl.quad_form
mlp_forward = _impl.mlp_forward
mlp_grad = _impl.mlp_grad
klucb_solve = _impl.klucb_solve

__all__ = [
    "BACKEND",
    "BISECT_ITERS",
    "sm_update",
    "quad_form",
    "mlp_forward",
    "mlp_grad",
    "klucb_solve",
]
