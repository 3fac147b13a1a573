"""
Multi-parameter bounded-variation calculus on grids.

Fields are sampled as left limits on their grid nodes and integrands are
evaluated at the lower-left corner of each cell. The supremum over partitions
in the total variation is taken over the working grid itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .utils import ensure_finite


def _axis(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"axis {name} must be a non-empty 1D array")
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"axis {name} must be strictly increasing")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridField2:
    """Values H(s_j, x_i) on a time x level grid."""

    s: np.ndarray
    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s, x = _axis(self.s, "s"), _axis(self.x, "x")
        values = np.array(ensure_finite(self.values, "GridField2"), dtype=float)
        if values.shape != (s.size, x.size):
            raise ValueError(
                f"field values have shape {values.shape}, expected {(s.size, x.size)}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, fn: Callable, s, x) -> "GridField2":
        ss, xx = np.meshgrid(np.asarray(s, float), np.asarray(x, float), indexing="ij")
        return cls(s, x, np.broadcast_to(fn(ss, xx), ss.shape))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class GridField3:
    """Values F(s_j, x_i, y_k) on a time x level x level grid."""

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s, x, y = _axis(self.s, "s"), _axis(self.x, "x"), _axis(self.y, "y")
        values = np.array(ensure_finite(self.values, "GridField3"), dtype=float)
        if values.shape != (s.size, x.size, y.size):
            raise ValueError(
                f"field values have shape {values.shape}, expected {(s.size, x.size, y.size)}"
            )
        values.setflags(write=False)
        for name, arr in (("s", s), ("x", x), ("y", y), ("values", values)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_function(cls, fn: Callable, s, x, y) -> "GridField3":
        ss, xx, yy = np.meshgrid(
            np.asarray(s, float), np.asarray(x, float), np.asarray(y, float), indexing="ij"
        )
        return cls(s, x, y, np.broadcast_to(fn(ss, xx, yy), ss.shape))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape

    def same_grid(self, other: "GridField3") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.s, other.s)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    def restrict_time(self, jmax: int) -> "GridField3":
        """The field on nodes s_0..s_jmax."""
        return GridField3(self.s[: jmax + 1], self.x, self.y, self.values[: jmax + 1])


@dataclass(frozen=True)
class SignedDecomposition3:
    """F's increments written as f1 - f2 with f1, f2 of nonnegative increments."""

    f1: GridField3
    f2: GridField3


def _check_cell(cell: Sequence[int], shape: Sequence[int]) -> None:
    if len(cell) != len(shape):
        raise ValueError(f"cell {tuple(cell)} has the wrong arity for a {len(shape)}D field")
    for c, n in zip(cell, shape):
        if int(c) != c or not 0 <= c < n - 1:
            raise ValueError(f"cell {tuple(cell)} is out of range for field shape {tuple(shape)}")


def rect_increment2(H: GridField2, cell: Tuple[int, int]) -> float:
    """H(s_{j+1}, x_{i+1}) - H(s_j, x_{i+1}) - H(s_{j+1}, x_i) + H(s_j, x_i)."""
    _check_cell(cell, H.shape)
    j, i = cell
    v = H.values
    return float(v[j + 1, i + 1] - v[j, i + 1] - v[j + 1, i] + v[j, i])


def rect_increments2(H: Union[GridField2, np.ndarray]) -> np.ndarray:
    """All cell increments of a 2D field, shape (n_s - 1, n_x - 1)."""
    v = H.values if isinstance(H, GridField2) else np.asarray(H, dtype=float)
    return (v[1:, 1:] - v[:-1, 1:]) - (v[1:, :-1] - v[:-1, :-1])


def rect_increment3(F: GridField3, cell: Tuple[int, int, int]) -> float:
    """The alternating 8-corner sum of F over one cell."""
    _check_cell(cell, F.shape)
    j, i, k = cell
    block = F.values[j : j + 2, i : i + 2, k : k + 2]
    return float(rect_increments3(block)[0, 0, 0])


def rect_increments3(F: Union[GridField3, np.ndarray]) -> np.ndarray:
    """All cell increments of a 3D field, shape (n_s - 1, n_x - 1, n_y - 1)."""
    v = F.values if isinstance(F, GridField3) else np.asarray(F, dtype=float)
    return np.diff(np.diff(np.diff(v, axis=0), axis=1), axis=2)


def total_variation3(
    F: GridField3, region: Optional[Tuple[slice, slice, slice]] = None
) -> float:
    """Sum of |rect_increment3| over the cells in ``region`` (all cells by default)."""
    d = rect_increments3(F)
    if region is not None:
        d = d[region]
    return float(np.sum(np.abs(d)))


def total_variation2(H: Union[GridField2, np.ndarray]) -> float:
    """Sum of |rect_increment2| over all cells."""
    return float(np.sum(np.abs(rect_increments2(H))))


def variation1(values) -> float:
    """Total variation of a sampled function of one variable."""
    return float(np.sum(np.abs(np.diff(np.asarray(values, dtype=float)))))


def _cumulate3(increments: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(n + 1 for n in increments.shape))
    out[1:, 1:, 1:] = increments.cumsum(axis=0).cumsum(axis=1).cumsum(axis=2)
    return out


def jordan_decompose3(F: GridField3) -> SignedDecomposition3:
    """Split F's cell increments into positive and negative parts.

    f1 accumulates the positive increments and f2 the negative ones, both
    vanishing on the lower faces of the grid, so each has nonnegative cell
    increments and f1 - f2 has the same increments as F.
    """
    d = rect_increments3(F)
    f1 = _cumulate3(np.maximum(d, 0.0))
    f2 = _cumulate3(np.maximum(-d, 0.0))
    return SignedDecomposition3(
        f1=GridField3(F.s, F.x, F.y, f1), f2=GridField3(F.s, F.x, F.y, f2)
    )


def stieltjes_sum_levels(g, H) -> float:
    """Sum_k g(a_k) [H(a_{k+1}) - H(a_k)] over matching level grids."""
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    if g.ndim != 1 or g.shape != H.shape:
        raise ValueError(
            f"level values must be 1D arrays of equal length, got {g.shape} and {H.shape}"
        )
    return float(np.sum(g[:-1] * np.diff(H)))


def ls_integral_2d(g, H: GridField2) -> float:
    """Sum over cells of g(lower-left corner) times the rectangle increment of H."""
    gv = _corner_values2(g, H)
    return float(np.sum(gv[:-1, :-1] * rect_increments2(H)))


def ls_integral_3d(g, F: GridField3) -> float:
    """Sum over cells of g(lower-left corner) times the rectangle increment of F.

    ``g`` may be a GridField3 on the same grid, an array of F's shape, or a
    vectorized callable ``g(s, x, y)``.
    """
    if isinstance(g, GridField3):
        if not g.same_grid(F):
            raise ValueError("integrand and field live on different grids")
        gv = g.values
    elif callable(g):
        ss, xx, yy = np.meshgrid(F.s[:-1], F.x[:-1], F.y[:-1], indexing="ij")
        gv = ensure_finite(np.broadcast_to(g(ss, xx, yy), ss.shape), "integrand")
        return float(np.sum(gv * rect_increments3(F)))
    else:
        gv = np.asarray(g, dtype=float)
        if gv.shape != F.shape:
            raise ValueError(f"integrand shape {gv.shape} does not match field {F.shape}")
    return float(np.sum(gv[:-1, :-1, :-1] * rect_increments3(F)))


def _corner_values2(g, H: GridField2) -> np.ndarray:
    if isinstance(g, GridField2):
        if g.shape != H.shape:
            raise ValueError("integrand and field live on different grids")
        return g.values
    if callable(g):
        ss, xx = np.meshgrid(H.s, H.x, indexing="ij")
        return ensure_finite(np.broadcast_to(g(ss, xx), ss.shape), "integrand")
    gv = np.asarray(g, dtype=float)
    if gv.shape != H.shape:
        raise ValueError(f"integrand shape {gv.shape} does not match field {H.shape}")
    return gv
