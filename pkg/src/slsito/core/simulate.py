"""
Discretized two-dimensional continuous semimartingales.

Paths carry their martingale and bounded-variation increments separately, and
the analytic laws of their variation processes as per-step increments, so
downstream estimators never reconstruct them by differencing X.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .exceptions import EvaluationError
from .functions import Curve
from .utils import path_rng

logger = logging.getLogger(__name__)

PATH_COLUMNS = ("t", "X1", "X2", "dM1", "dM2", "dV1", "dV2")


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = t_0 < ... < t_N = T."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a time grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("time grids start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("time grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> int:
        return self.nodes.size - 1

    @property
    def dt(self) -> np.ndarray:
        """Step lengths, shape (N,)."""
        return np.diff(self.nodes)

    def index_of(self, t: Optional[float]) -> int:
        """Index of node ``t`` (``None`` means the horizon)."""
        if t is None:
            return self.steps
        j = int(np.searchsorted(self.nodes, t))
        if j <= self.steps and np.isclose(self.nodes[j], t, rtol=0, atol=1e-12 * max(1.0, self.horizon)):
            return j
        if j > 0 and np.isclose(self.nodes[j - 1], t, rtol=0, atol=1e-12 * max(1.0, self.horizon)):
            return j - 1
        raise ValueError(f"time {t} is not a node of the grid")


@dataclass(frozen=True)
class DiffusionSpec:
    """Correlated Brownian motion with drift in two dimensions.

    ``path_id`` selects the stream of an ensemble member; see
    :func:`slsito.core.utils.path_rng`.
    """

    start: Tuple[float, float] = (0.0, 0.0)
    drift: Tuple[float, float] = (0.0, 0.0)
    vol: Tuple[float, float] = (1.0, 1.0)
    rho: float = 0.0
    seed: int = 0
    path_id: int = 0

    def __post_init__(self):
        if len(self.start) != 2 or len(self.drift) != 2 or len(self.vol) != 2:
            raise ValueError("start, drift and vol must have two components")
        if not all(np.isfinite(v) for v in (*self.start, *self.drift, *self.vol, self.rho)):
            raise ValueError("diffusion parameters must be finite")
        if min(self.vol) <= 0:
            raise ValueError(f"volatilities must be positive, got {self.vol}")
        if abs(self.rho) > 1:
            raise ValueError(f"correlation must lie in [-1, 1], got {self.rho}")

    def for_path(self, path_id: int) -> "DiffusionSpec":
        return DiffusionSpec(
            start=self.start, drift=self.drift, vol=self.vol, rho=self.rho,
            seed=self.seed, path_id=path_id,
        )


@dataclass(frozen=True)
class BVPath:
    """A function of bounded variation sampled on a time grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("BVPath values must match the grid")
        object.__setattr__(self, "values", values)

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))

    @property
    def final(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class SamplePath2D:
    """One sample of X_i = X_i(0) + M_i + V_i, i = 1, 2.

    Attributes
    ----------
    grid : TimeGrid
    x : np.ndarray
        Values, shape (2, N+1).
    dm, dv : np.ndarray
        Martingale and bounded-variation increments, shape (2, N).
    dqv : np.ndarray
        Analytic increments of <M_i>, shape (2, N).
    dcov : np.ndarray
        Analytic increments of <M_1, M_2>, shape (N,).
    """

    grid: TimeGrid
    x: np.ndarray
    dm: np.ndarray
    dv: np.ndarray
    dqv: np.ndarray
    dcov: np.ndarray

    def __post_init__(self):
        n = self.grid.steps
        for name, shape in (
            ("x", (2, n + 1)),
            ("dm", (2, n)),
            ("dv", (2, n)),
            ("dqv", (2, n)),
            ("dcov", (n,)),
        ):
            arr = _frozen(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        if np.any(self.dqv < 0):
            raise ValueError("quadratic variation increments must be nonnegative")

    @property
    def steps(self) -> int:
        return self.grid.steps

    def coordinate(self, i: int) -> np.ndarray:
        return self.x[_row(i)]

    def dx(self, i: int) -> np.ndarray:
        r = _row(i)
        return self.dm[r] + self.dv[r]

    def quadratic_variation(self, i: int) -> BVPath:
        """Analytic <M_i> on the grid."""
        return BVPath(self.grid, _cumulative(self.dqv[_row(i)]))

    def cross_variation(self) -> BVPath:
        """Analytic <M_1, M_2> on the grid."""
        return BVPath(self.grid, _cumulative(self.dcov))

    def to_csv(self, path: Union[str, Path]) -> None:
        """Dump the path with columns t, X1, X2, dM1, dM2, dV1, dV2.

        Increment columns hold the increment over [t_j, t_{j+1}]; the last row
        carries zeros.
        """
        n = self.steps
        pad = lambda a: np.concatenate([a, [0.0]])  # noqa: E731
        cols = [
            self.grid.nodes, self.x[0], self.x[1],
            pad(self.dm[0]), pad(self.dm[1]), pad(self.dv[0]), pad(self.dv[1]),
        ]
        with open(path, "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(PATH_COLUMNS)
            for j in range(n + 1):
                writer.writerow([repr(float(c[j])) for c in cols])


def _row(i: int) -> int:
    if i not in (1, 2):
        raise ValueError(f"coordinate must be 1 or 2, got {i}")
    return i - 1


def _cumulative(increments: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(increments)])


def make_time_grid(T: float, N: int) -> TimeGrid:
    """Uniform grid t_j = jT/N on [0, T]."""
    if not (np.isfinite(T) and T > 0):
        raise ValueError(f"horizon must be positive, got {T}")
    if int(N) != N or N < 1:
        raise ValueError(f"step count must be a positive integer, got {N}")
    return TimeGrid(np.linspace(0.0, T, int(N) + 1))


def simulate_diffusion(spec: DiffusionSpec, grid: TimeGrid) -> SamplePath2D:
    """Simulate correlated Brownian motion with drift on ``grid``.

    Increments are dM_i = sigma_i sqrt(dt) xi_i with (xi_1, xi_2) standard
    normal with correlation rho (lower-triangular factor of the correlation
    matrix), and dV_i = mu_i dt. The same spec and grid give the same bytes.
    """
    rng = path_rng(spec.seed, spec.path_id)
    dt = grid.dt
    xi = rng.standard_normal((2, grid.steps))

    z1 = xi[0]
    z2 = spec.rho * xi[0] + np.sqrt(1.0 - spec.rho**2) * xi[1]
    sq = np.sqrt(dt)
    s1, s2 = spec.vol

    dm = np.stack([s1 * sq * z1, s2 * sq * z2])
    dv = np.stack([spec.drift[0] * dt, spec.drift[1] * dt])
    x = np.asarray(spec.start, dtype=float)[:, None] + np.concatenate(
        [np.zeros((2, 1)), np.cumsum(dm + dv, axis=1)], axis=1
    )
    dqv = np.stack([s1**2 * dt, s2**2 * dt])
    dcov = spec.rho * s1 * s2 * dt
    return SamplePath2D(grid=grid, x=x, dm=dm, dv=dv, dqv=dqv, dcov=dcov)


def realized_quadratic_variation(path: SamplePath2D, i: int) -> BVPath:
    """F(t_j) = sum_{k<j} dM_i(k)^2."""
    return BVPath(path.grid, _cumulative(path.dm[_row(i)] ** 2))


def realized_cross_variation(path: SamplePath2D) -> BVPath:
    """F(t_j) = sum_{k<j} dM_1(k) dM_2(k)."""
    return BVPath(path.grid, _cumulative(path.dm[0] * path.dm[1]))


def transform_by_curve(path: SamplePath2D, b: Curve) -> SamplePath2D:
    """Return the path of (X_1, X_2*) with X_2* = X_2 - b(X_1).

    The martingale part of X_2* is dM_2 - b'(X_1) dM_1. The bounded-variation
    part absorbs the rest of the increment, dV_2 - [b(X_1(t_{j+1})) - b(X_1(t_j))]
    + b'(X_1(t_j)) dM_1, which is dV_2 - b' dV_1 - b''/2 d<M_1> up to the
    third-order remainder of the smooth Ito expansion. Analytic laws become
    d<M_2*> = d<M_2> - 2 b' d<M_1,M_2> + b'^2 d<M_1> and
    d<M_1,M_2*> = d<M_1,M_2> - b' d<M_1>.
    """
    if not b.is_c2:
        raise ValueError(
            f"curve '{b.name}' must be twice differentiable (b, b', b'' callbacks)"
        )
    x1 = path.x[0]
    bx = b.value(x1)
    slope = b.slope(x1[:-1])

    x2s = path.x[1] - bx
    dm2s = path.dm[1] - slope * path.dm[0]
    dv2s = path.dv[1] - np.diff(bx) + slope * path.dm[0]
    if not (np.all(np.isfinite(x2s)) and np.all(np.isfinite(dv2s))):
        raise EvaluationError(f"transform by curve '{b.name}' produced non-finite values")

    dqv2s = path.dqv[1] - 2.0 * slope * path.dcov + slope**2 * path.dqv[0]
    dcovs = path.dcov - slope * path.dqv[0]
    logger.debug(f"Transformed path by curve {b.name}")
    return SamplePath2D(
        grid=path.grid,
        x=np.stack([path.x[0], x2s]),
        dm=np.stack([path.dm[0], dm2s]),
        dv=np.stack([path.dv[0], dv2s]),
        dqv=np.stack([path.dqv[0], np.maximum(dqv2s, 0.0)]),
        dcov=dcovs,
    )
