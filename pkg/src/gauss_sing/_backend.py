"""Select the compiled kernel loops when available.

Set ``GAUSS_SING_BACKEND=python`` to force the pure-Python implementation.
"""
from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels

try:  # pragma: no cover - depends on the build
    from . import _ckernels as compiled_backend
except ImportError:  # pragma: no cover
    compiled_backend = None

if os.environ.get("GAUSS_SING_BACKEND", "").lower() == "python" or compiled_backend is None:
    active = python_backend
    NAME = "python"
else:
    active = compiled_backend
    NAME = "compiled"


def get(name: str | None = None):
    """Backend module by name (``"compiled"``, ``"python"``) or the active one."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("the compiled extension is not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
