"""Slicing sequences into overlapping windows, and per-feature max-pooling.

A window spec is a (width, shift) pair: windows are ``width`` consecutive
columns, consecutive windows start ``shift`` columns apart, and trailing
columns that do not fill a whole window are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix


@dataclass(frozen=True)
class WindowSpec:
    width: int
    shift: int

    def __post_init__(self):
        if self.width < 1 or self.shift < 1:
            raise ValueError(f"window width and shift must be >= 1, got {self}")


def window_count(length: int, spec: WindowSpec) -> int:
    """Number of full windows in a sequence of ``length`` columns."""
    if length < spec.width:
        return 0
    return (length - spec.width) // spec.shift + 1


def window_starts(length: int, spec: WindowSpec) -> range:
    return range(0, spec.shift * window_count(length, spec), spec.shift)


def make_windows(x: np.ndarray, spec: WindowSpec) -> list[np.ndarray]:
    """Copy out each k-by-width window of a k-by-l sequence."""
    x = as_matrix(x)
    return [x[:, s:s + spec.width].copy() for s in window_starts(x.shape[1], spec)]


def stack_windows(x: np.ndarray, spec: WindowSpec) -> np.ndarray:
    """All windows of a k-by-l sequence as one (width, k, count) array.

    Axis 0 is the frame position inside the window, so windows can be fed
    through a recurrent cell as one batch of short sequences.
    """
    x = as_matrix(x)
    k, length = x.shape
    count = window_count(length, spec)
    out = np.empty((spec.width, k, count))
    for i, s in enumerate(window_starts(length, spec)):
        out[:, :, i] = x[:, s:s + spec.width].T
    return out


def scatter_windows_add(dwindows: np.ndarray, spec: WindowSpec, length: int) -> np.ndarray:
    """Adjoint of ``stack_windows``: sum window gradients back onto the
    source sequence (overlapping windows accumulate)."""
    width, k, count = dwindows.shape
    dx = np.zeros((k, length))
    for i, s in enumerate(window_starts(length, spec)):
        dx[:, s:s + width] += dwindows[:, :, i].T
    return dx


def max_pool_sequence(x: np.ndarray, spec: WindowSpec) -> np.ndarray:
    """Per-feature max over each window of columns."""
    out, _ = max_pool_forward(x, spec)
    return out


def max_pool_forward(x: np.ndarray, spec: WindowSpec) -> tuple[np.ndarray, np.ndarray]:
    """Max-pool columns, also returning the winning source column per cell.

    Ties go to the first (lowest-index) column, which is where the backward
    pass routes the gradient.
    """
    x = as_matrix(x)
    n, length = x.shape
    count = window_count(length, spec)
    out = np.empty((n, count))
    argmax = np.empty((n, count), dtype=np.intp)
    for j, s in enumerate(window_starts(length, spec)):
        block = x[:, s:s + spec.width]
        idx = np.argmax(block, axis=1)
        argmax[:, j] = idx + s
        out[:, j] = block[np.arange(n), idx]
    return out, argmax


def max_pool_backward(argmax: np.ndarray, dout: np.ndarray, length: int) -> np.ndarray:
    """Route pooled gradients to the columns that produced each max."""
    n = dout.shape[0]
    dx = np.zeros((n, length))
    rows = np.repeat(np.arange(n), dout.shape[1])
    np.add.at(dx, (rows, argmax.ravel()), dout.ravel())
    return dx
