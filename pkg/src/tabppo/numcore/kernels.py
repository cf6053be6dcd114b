"""Kernel backend selection.

Imports the Cython extension when it was built, otherwise falls back to the
numpy implementations. ``TABPPO_PURE_PYTHON=1`` forces the fallback, which the
benchmark and the backend-agreement tests use to exercise both paths.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("TABPPO_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND

softmax_fwd = _impl.softmax_fwd
softmax_bwd = _impl.softmax_bwd
layernorm_fwd = _impl.layernorm_fwd
layernorm_bwd = _impl.layernorm_bwd
scatter_add_rows = _impl.scatter_add_rows


def get_backend(name: str):
    """Return a specific kernel module by name ('compiled' or 'python')."""
    if name == "python":
        return _kernels_py
    from . import _kernels  # raises ImportError if the extension is absent

    return _kernels
