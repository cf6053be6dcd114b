"""Pure-numpy implementations of the hot row-wise kernels.

Used as the fallback when the compiled extension is unavailable (or when
``TABPPO_PURE_PYTHON=1``). All functions take C-contiguous float64 arrays;
row-wise ops expect 2-D inputs of shape (rows, n).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def softmax_fwd(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    y = np.exp(shifted)
    y /= y.sum(axis=1, keepdims=True)
    return y


def softmax_bwd(y: np.ndarray, grad: np.ndarray) -> np.ndarray:
    inner = (grad * y).sum(axis=1, keepdims=True)
    return y * (grad - inner)


def layernorm_fwd(x: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    y = centered * rstd[:, None]
    return y, rstd


def layernorm_bwd(y: np.ndarray, rstd: np.ndarray, grad: np.ndarray) -> np.ndarray:
    gm = grad.mean(axis=1, keepdims=True)
    gym = (grad * y).mean(axis=1, keepdims=True)
    return rstd[:, None] * (grad - gm - y * gym)


def scatter_add_rows(table: np.ndarray, idx: np.ndarray, rows: np.ndarray) -> None:
    # np.add.at handles repeated indices correctly (unlike fancy-index +=),
    # at the cost of being slow; the compiled kernel exists mainly for this.
    np.add.at(table, idx, rows)
