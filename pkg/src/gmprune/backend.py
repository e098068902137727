"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy implementation is used. GMPRUNE_BACKEND=cython|numpy forces a choice
(useful for benchmarking and for running the test suite against both).
"""

from __future__ import annotations

import os

from . import _kernels_np

_requested = os.environ.get("GMPRUNE_BACKEND", "auto").strip().lower()

if _requested in ("numpy", "np", "python"):
    kernels = _kernels_np
    _name = "numpy"
elif _requested in ("cython", "cy", "ext", "compiled"):
    from . import _kernels_cy as kernels  # type: ignore[no-redef]

    _name = "cython"
elif _requested in ("auto", ""):
    try:
        from . import _kernels_cy as kernels  # type: ignore[no-redef]

        _name = "cython"
    except ImportError:
        kernels = _kernels_np
        _name = "numpy"
else:
    raise RuntimeError(f"GMPRUNE_BACKEND={_requested!r} not recognized (use auto, cython or numpy)")


def backend_name() -> str:
    """Name of the active kernel backend ('cython' or 'numpy')."""
    return _name
