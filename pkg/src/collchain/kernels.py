"""Backend selection for the tensor contraction.

The compiled extension is used when it imports; otherwise the numpy
implementation runs. Set ``COLLCHAIN_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _assemble_py

try:
    from . import _assemble as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("compiled", "python")
DEFAULT_BACKEND = "compiled" if _compiled is not None and os.environ.get("COLLCHAIN_BACKEND", "") != "python" else "python"


def available_backends():
    return [b for b in BACKENDS if b == "python" or _compiled is not None]


def contract(q, wq, u, delta, labels, mass, beta, sigma_p=None, n_threads=1, backend=None, profile=None):
    backend = backend or DEFAULT_BACKEND
    if profile is not None:
        backend = "python"
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled backend not available")
        S = _compiled.contract_canonical(
            np.ascontiguousarray(q, dtype=float),
            np.ascontiguousarray(wq, dtype=float),
            np.ascontiguousarray(u, dtype=complex),
            np.ascontiguousarray(delta, dtype=float),
            np.ascontiguousarray(labels, dtype=np.int64),
            float(mass),
            float(beta),
            float(sigma_p) if sigma_p is not None else 1.0,
            sigma_p is not None,
            max(int(n_threads), 1),
        )
        return _assemble_py.symmetrize_from_canonical(S)
    if backend == "python":
        return _assemble_py.contract(q, wq, u, delta, labels, mass, beta, sigma_p, n_threads, profile)
    raise ValueError(f"unknown backend {backend!r}")
