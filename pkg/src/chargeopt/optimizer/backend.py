"""Selects the backward-induction kernel: compiled if available, NumPy otherwise.

Override with the environment variable CHARGEOPT_BACKEND=compiled|python or
per call via the backend argument.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import InvalidParameterError
from . import _kernel_py

try:
    from . import _ddp_kernel  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _ddp_kernel = None
    HAVE_COMPILED = False

_ALIASES = {"c": "compiled", "cython": "compiled", "py": "python", "numpy": "python"}


def normalize_backend(name: str | None) -> str:
    if name is None:
        name = os.environ.get("CHARGEOPT_BACKEND") or ("compiled" if HAVE_COMPILED else "python")
    name = _ALIASES.get(name.lower(), name.lower())
    if name not in ("compiled", "python"):
        raise InvalidParameterError(f"unknown backend {name!r}")
    if name == "compiled" and not HAVE_COMPILED:
        raise InvalidParameterError("compiled kernel not available; build the extension or use backend='python'")
    return name


def active_backend() -> str:
    """Name of the kernel used when no explicit backend is requested."""
    return normalize_backend(None)


def backward_pass(
    cost3,
    action3,
    valid,
    corner00,
    frac_e,
    frac_theta,
    jd,
    je,
    p_d,
    penalty,
    backend: str | None = None,
):
    """Run the backward induction over flattened state cells.

    cost3 is the (N+1, Ni, Nj) cost grid, action3 the (N, Ni, Nj) action
    grid; both are filled in place. Successor costs are read by bilinear
    interpolation from corner00 with weights (frac_e, frac_theta).
    """
    n_plus_1, ni, nj = cost3.shape
    cost2 = cost3.reshape(n_plus_1, ni * nj)
    action2 = action3.reshape(action3.shape[0], ni * nj)
    args = (
        np.ascontiguousarray(valid, dtype=np.uint8),
        np.ascontiguousarray(corner00, dtype=np.int64),
        np.ascontiguousarray(frac_e, dtype=np.float64),
        np.ascontiguousarray(frac_theta, dtype=np.float64),
        nj if ni > 1 else 0,
        1 if nj > 1 else 0,
        np.ascontiguousarray(jd, dtype=np.float64),
        np.ascontiguousarray(je, dtype=np.float64),
        np.ascontiguousarray(p_d, dtype=np.float64),
        float(penalty),
    )
    if normalize_backend(backend) == "compiled":
        _ddp_kernel.backward_pass(cost2, action2, *args)
    else:
        _kernel_py.backward_pass(cost2, action2, *args)
