"""Selection of the numerical kernel backend.

The compiled extension (``onseg._kernels``) is preferred when it imported
cleanly; otherwise the pure NumPy fallback is used.  Set ONSEG_BACKEND to
``cython`` or ``python`` to force one; forcing ``cython`` when the extension
is missing raises at import time.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels
except ImportError:
    _kernels = None

_FORCED = os.environ.get("ONSEG_BACKEND", "").strip().lower()

if _FORCED == "python":
    kernels = _kernels_py
elif _FORCED == "cython":
    if _kernels is None:
        raise ImportError(
            "ONSEG_BACKEND=cython but the compiled extension is not available"
        )
    kernels = _kernels
elif _FORCED:
    raise ImportError(f"unknown ONSEG_BACKEND value: {_FORCED!r}")
else:
    kernels = _kernels if _kernels is not None else _kernels_py


def active_backend() -> str:
    """Name of the kernel backend in use: 'cython' or 'python'."""
    return kernels.NAME


def available_backends() -> list[str]:
    """Names of every backend importable in this environment."""
    names = ["python"]
    if _kernels is not None:
        names.insert(0, "cython")
    return names
