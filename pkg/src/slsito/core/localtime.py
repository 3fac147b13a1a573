"""
Local-time surfaces of one coordinate of a sample path.

Two estimators are provided: the occupation density, with bands
[a, a + eps) weighted by the analytic d<M_i>/(2 eps), and the Tanaka
formula (X - a)^+ - (X_0 - a)^+ - sum 1[X > a] dX, whose negative values are
kept as a discretization diagnostic.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Literal, Optional, Tuple, Union

import numpy as np

from ..cpu import kernels
from .simulate import SamplePath2D, TimeGrid, _row
from .utils import ensure_finite

logger = logging.getLogger(__name__)

Estimator = Literal["occupation", "tanaka"]


@dataclass(frozen=True)
class LevelGrid:
    """Strictly increasing level nodes a_0 < ... < a_M."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1)
        if nodes.size < 1 or not np.all(np.isfinite(nodes)):
            raise ValueError("a level grid needs at least one finite node")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("level nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, lo: float, hi: float, da: float, anchor: float = 0.0) -> "LevelGrid":
        """Nodes anchor + k da covering [lo, hi]."""
        if not da > 0:
            raise ValueError(f"level spacing must be positive, got {da}")
        if hi < lo:
            raise ValueError(f"empty level range [{lo}, {hi}]")
        k_lo = int(np.floor((lo - anchor) / da))
        k_hi = int(np.ceil((hi - anchor) / da))
        return cls(anchor + np.arange(k_lo, k_hi + 1) * da)

    @classmethod
    def single(cls, a: float) -> "LevelGrid":
        return cls(np.array([a]))

    @classmethod
    def for_path(
        cls,
        path: SamplePath2D,
        i: int,
        da: float,
        margin: Optional[float] = None,
        anchor: float = 0.0,
    ) -> "LevelGrid":
        """Uniform grid over the path range of coordinate i plus a margin.

        The default margin is 4 sqrt(T) max sigma_i, with sigma read off the
        analytic quadratic variation.
        """
        if margin is None:
            margin = default_margin(path)
        xi = path.coordinate(i)
        return cls.uniform(xi.min() - margin, xi.max() + margin, da, anchor=anchor)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def widths(self) -> np.ndarray:
        """Width of the cell [a_k, a_{k+1}) owned by each node.

        The last node reuses the last gap; a single node has width NaN.
        """
        if self.size < 2:
            return np.full(self.size, np.nan)
        gaps = np.diff(self.nodes)
        return np.append(gaps, gaps[-1])

    @property
    def is_uniform(self) -> bool:
        if self.size < 3:
            return True
        gaps = np.diff(self.nodes)
        return bool(np.allclose(gaps, gaps[0], rtol=1e-8, atol=1e-12 * max(1.0, np.abs(self.nodes).max())))

    @property
    def spacing(self) -> float:
        """Common node spacing (NaN for a single node).

        Raises ValueError on a non-uniform grid; level sums use ``widths``.
        """
        if self.size < 2:
            return np.nan
        if not self.is_uniform:
            raise ValueError("level grid is not uniform; use the per-cell widths")
        return float(self.nodes[1] - self.nodes[0])

    def index_at_or_below(self, a) -> np.ndarray:
        """Index of the nearest node at or below each ``a`` (clipped to the grid)."""
        idx = np.searchsorted(self.nodes, np.asarray(a, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.size - 1)

    def active_columns(self, values: np.ndarray, eps: float) -> slice:
        """Columns that can carry local time for a path taking ``values``.

        Outside [min - eps, max] both estimators vanish (the Tanaka estimator up
        to rounding), so sums restricted to these columns lose nothing.
        """
        lo = np.searchsorted(self.nodes, values.min() - eps, side="left") - 1
        hi = np.searchsorted(self.nodes, values.max(), side="right") + 1
        return slice(max(int(lo), 0), min(int(hi), self.size))

    def sub(self, cols: slice) -> "LevelGrid":
        return LevelGrid(self.nodes[cols])


def default_margin(path: SamplePath2D) -> float:
    """4 sqrt(T) max_i sigma_i from the analytic variation laws."""
    dt = path.grid.dt
    sigma = np.sqrt(np.max(path.dqv / dt[None, :]))
    return float(4.0 * np.sqrt(path.grid.horizon) * sigma)


def default_eps(grid: TimeGrid) -> float:
    """The eps = sqrt(dt) coupling."""
    return float(np.sqrt(np.max(grid.dt)))


@dataclass(frozen=True)
class LocalTimeSurface:
    """L(t_j, a_k) on a time x level grid.

    ``eps`` is the band width for the occupation estimator and ``None`` for
    the Tanaka estimator.
    """

    grid: TimeGrid
    levels: LevelGrid
    values: np.ndarray
    method: Estimator
    eps: Optional[float] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.steps + 1, self.levels.size):
            raise ValueError(
                f"surface shape {values.shape} does not match the grids "
                f"{(self.grid.steps + 1, self.levels.size)}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def increments(self) -> np.ndarray:
        """Time increments L(t_{j+1}, a_k) - L(t_j, a_k), shape (N, M)."""
        return np.diff(self.values, axis=0)

    def column(self, a: float) -> np.ndarray:
        """L(., a) for a level that is a node of the grid."""
        k = int(np.argmin(np.abs(self.levels.nodes - a)))
        if not np.isclose(self.levels.nodes[k], a, rtol=0, atol=1e-9):
            raise ValueError(f"level {a} is not a node of the level grid")
        return self.values[:, k]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def monotonicity_violation(self) -> float:
        """Largest decrease in time over all levels (0 for a nondecreasing surface)."""
        d = self.increments()
        return float(max(0.0, -d.min())) if d.size else 0.0

    def to_csv(self, path: Union[str, Path]) -> None:
        """Header row ``t`` then the levels; one row per time node."""
        with open(path, "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(["t"] + [repr(float(a)) for a in self.levels.nodes])
            for t, row in zip(self.grid.nodes, self.values):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def _check_eps(eps: float) -> float:
    if not (np.isfinite(eps) and eps > 0):
        raise ValueError(f"band width eps must be positive, got {eps}")
    return float(eps)


def iter_local_time_blocks(
    path: SamplePath2D,
    i: int,
    levels: LevelGrid,
    method: Estimator = "occupation",
    eps: Optional[float] = None,
    block: int = 4096,
) -> Iterator[Tuple[int, np.ndarray]]:
    """Stream the surface in row blocks.

    Yields ``(j0, values)`` where ``values`` holds rows j0 .. j0 + B (both
    inclusive) so that consecutive blocks share their boundary row.
    """
    r = _row(i)
    x = np.ascontiguousarray(path.x[r])
    nodes = np.ascontiguousarray(levels.nodes)
    n = path.steps
    if method == "occupation":
        eps = _check_eps(eps)
        dqv = np.ascontiguousarray(path.dqv[r])
        state = np.zeros(levels.size)
    elif method == "tanaka":
        dx = np.ascontiguousarray(path.dm[r] + path.dv[r])
        state = np.zeros(levels.size)
    else:
        raise ValueError(f"unknown local-time estimator: {method}")

    j0 = 0
    while j0 < n:
        b = min(block, n - j0)
        out = np.empty((b + 1, levels.size))
        if method == "occupation":
            kernels.occupation_block(x, dqv, nodes, eps, j0, state, out)
            state = out[-1].copy()
        else:
            kernels.tanaka_block(x, dx, nodes, j0, state, out)
        yield j0, out
        j0 += b


def _full_surface(path, i, levels, method, eps) -> np.ndarray:
    values = np.empty((path.steps + 1, levels.size))
    for j0, block in iter_local_time_blocks(path, i, levels, method, eps, block=path.steps):
        values[j0 : j0 + block.shape[0]] = block
    return values


def local_time_occupation(
    path: SamplePath2D, i: int, levels: LevelGrid, eps: float
) -> LocalTimeSurface:
    """L(t_j, a_k) = (1/2eps) sum_{m<j} 1[a_k <= X_i(t_m) < a_k + eps] d<M_i>(m)."""
    eps = _check_eps(eps)
    values = _full_surface(path, i, levels, "occupation", eps)
    return LocalTimeSurface(path.grid, levels, values, method="occupation", eps=eps)


def local_time_tanaka(path: SamplePath2D, i: int, levels: LevelGrid) -> LocalTimeSurface:
    """L(t_j, a_k) = (X_i(t_j) - a_k)^+ - (X_i(0) - a_k)^+ - sum_{m<j} 1[X_i(t_m) > a_k] dX_i(m).

    Negative values are retained.
    """
    values = _full_surface(path, i, levels, "tanaka", None)
    return LocalTimeSurface(path.grid, levels, values, method="tanaka")


def occupation_identity_residual(
    path: SamplePath2D,
    i: int,
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    surface: LocalTimeSurface,
) -> float:
    """|sum_j g(t_j, X_i(t_j)) d<M_i>_j - 2 sum_k sum_j g(t_j, a_k) d_t L(t_j, a_k) da_k|."""
    r = _row(i)
    t = path.grid.nodes[:-1]
    lhs_g = ensure_finite(np.broadcast_to(g(t, path.x[r, :-1]), t.shape), "g")
    lhs = np.sum(lhs_g * path.dqv[r])

    if surface.levels.size < 2:
        raise ValueError("the occupation identity needs at least two levels")
    tt, aa = np.meshgrid(t, surface.levels.nodes, indexing="ij")
    rhs_g = ensure_finite(np.broadcast_to(g(tt, aa), tt.shape), "g")
    rhs = 2.0 * np.sum(rhs_g * surface.increments() * surface.levels.widths[None, :])
    return float(abs(lhs - rhs))


def support_bounds(surface: LocalTimeSurface) -> Optional[Tuple[float, float]]:
    """Smallest [a_lo, a_hi] containing every column with a nonzero entry.

    Returns ``None`` for an all-zero surface.
    """
    nonzero = np.flatnonzero(np.any(surface.values != 0.0, axis=0))
    if nonzero.size == 0:
        return None
    nodes = surface.levels.nodes
    return float(nodes[nonzero[0]]), float(nodes[nonzero[-1]])


def band_exclusion_sum(path: SamplePath2D, i: int, surface: LocalTimeSurface, k: int) -> float:
    """sum_j 1[X_i(t_j) not in [a_k, a_k + eps)] d_t L(t_j, a_k).

    Zero for the occupation estimator: its local time only grows while the
    path sits in the band.
    """
    eps = surface.eps if surface.eps is not None else surface.levels.widths[k]
    a = surface.levels.nodes[k]
    x = path.x[_row(i), :-1]
    outside = ~((a <= x) & (x < a + eps))
    return float(np.sum(surface.increments()[:, k] * outside))


def local_time_parts_residual(
    surface: LocalTimeSurface,
    k: int,
    phi: Callable[[np.ndarray], np.ndarray],
    dphi: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Integration by parts in time of a smooth phi against L(., a_k).

    |sum phi(t_j) d_t L(t_j) - [phi(T) L(T) - sum phi'(t_j) L(t_j) dt]|.
    """
    t = surface.grid.nodes
    col = surface.values[:, k]
    lhs = np.sum(phi(t[:-1]) * np.diff(col))
    rhs = phi(t[-1]) * col[-1] - np.sum(dphi(t[:-1]) * col[:-1] * surface.grid.dt)
    return float(abs(lhs - rhs))


def moving_level_increments(
    path: SamplePath2D, i: int, levels: LevelGrid, eps: float, targets: np.ndarray
) -> np.ndarray:
    """Occupation increments d_t L(t_j, a_{k(j)}) along a moving level.

    ``targets`` gives the level at each t_j (j < N); the column used is the
    nearest node at or below it.
    """
    eps = _check_eps(eps)
    r = _row(i)
    cols = levels.index_at_or_below(targets)
    a = levels.nodes[cols]
    x = path.x[r, :-1]
    inband = (a <= x) & (x < a + eps)
    return inband * path.dqv[r] * (0.5 / eps)


def occupation_increments_at(path: SamplePath2D, i: int, a: float, eps: float) -> np.ndarray:
    """d_t L(t_j, a) for one fixed level."""
    targets = np.full(path.steps, a, dtype=float)
    return moving_level_increments(path, i, LevelGrid.single(a), eps, targets)
