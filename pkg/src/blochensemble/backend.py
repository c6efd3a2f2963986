"""Kernel backend selection.

The compiled Cython kernel is preferred when its extension module imports;
otherwise the pure-numpy fallback takes over with identical semantics.
Setting ``BLOCHENSEMBLE_BACKEND=python`` in the environment forces the
fallback (useful for benchmarking and for debugging kernel equivalence).
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("BLOCHENSEMBLE_BACKEND", "").strip().lower()

if _forced == "python":
    kernel = _kernels_py
    BACKEND = "python"
elif _forced in ("", "compiled", "c"):
    try:
        from . import _kernels as _compiled

        kernel = _compiled
        BACKEND = "compiled"
    except ImportError:
        if _forced:
            raise
        kernel = _kernels_py
        BACKEND = "python"
else:
    raise RuntimeError(
        f"BLOCHENSEMBLE_BACKEND={_forced!r} not recognized (use 'compiled' or 'python')"
    )


def active_backend() -> str:
    """Name of the integration backend in use: 'compiled' or 'python'."""
    return BACKEND
