"""
The stochastic Lebesgue-Stieltjes integral of an adapted field g against a
martingale field h(s, a).

For a simple field the integral is the sum of e(t_j, x_i) times the rectangle
increments of h. General integrands are sampled at the lower-left corner of
every cell of h's grid, optionally after truncation and causal mollification.
The mean-square limit is represented by the value on the finest grid; the
harness studies refinement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal

from ..cpu import kernels
from .bvmeasure import GridField2, GridField3, rect_increments3, total_variation3
from .exceptions import EvaluationError
from .funcatalog import mollifier_value
from .functions import TestFunction
from .localtime import LevelGrid
from .simulate import SamplePath2D, _row
from .utils import ensemble_stats, ensure_finite, z_score

logger = logging.getLogger(__name__)

ISOMETRY_COLUMNS = ("n_paths", "lhs", "se_lhs", "rhs", "se_rhs", "z")

# g(s, levels, past) -> values on the levels; past holds h on [0, s]
AdaptedCallback = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SimpleField:
    """Piecewise-constant e on (t_j, t_{j+1}] x (x_i, x_{i+1}].

    ``coef`` has shape (len(t) - 1, len(x) - 1); zero outside the level
    partition.
    """

    t: np.ndarray
    x: np.ndarray
    coef: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        x = np.array(self.x, dtype=float)
        coef = np.array(self.coef, dtype=float)
        if t.ndim != 1 or x.ndim != 1 or t.size < 2 or x.size < 2:
            raise ValueError("simple fields need at least two time and two level nodes")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(x) <= 0):
            raise ValueError("partitions must be strictly increasing")
        if coef.shape != (t.size - 1, x.size - 1):
            raise ValueError(f"coefficients have shape {coef.shape}, expected {(t.size - 1, x.size - 1)}")
        ensure_finite(coef, "simple field coefficients")
        for name, arr in (("t", t), ("x", x), ("coef", coef)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def scaled(self, alpha: float) -> "SimpleField":
        return SimpleField(self.t, self.x, alpha * self.coef)

    def __add__(self, other: "SimpleField") -> "SimpleField":
        if not (np.array_equal(self.t, other.t) and np.array_equal(self.x, other.x)):
            raise ValueError("simple fields on different partitions cannot be added")
        return SimpleField(self.t, self.x, self.coef + other.coef)


@dataclass(frozen=True)
class MartingaleField:
    """h(s_j, a_i) for one path, with its cross-variation field F_s(a, b)."""

    h: GridField2
    F: Optional[GridField3] = None

    def __post_init__(self):
        if self.F is not None:
            if self.F.shape != (self.h.shape[0], self.h.shape[1], self.h.shape[1]):
                raise ValueError("cross-variation field does not match the martingale field grid")

    @property
    def times(self) -> np.ndarray:
        return self.h.s

    @property
    def levels(self) -> np.ndarray:
        return self.h.x

    def index_of(self, t: Optional[float]) -> int:
        if t is None:
            return self.h.shape[0] - 1
        s = self.h.s
        j = int(np.argmin(np.abs(s - t)))
        if not np.isclose(s[j], t, rtol=0, atol=1e-12 * max(1.0, s[-1])):
            raise ValueError(f"time {t} is not a node of the field's time grid")
        return j

    def cross_field(self) -> GridField3:
        return self.F if self.F is not None else realized_cross_field(self.h)


@dataclass(frozen=True)
class IsometryReport:
    n_paths: int
    lhs: float
    se_lhs: float
    rhs: float
    se_rhs: float
    z: float

    def as_row(self) -> list:
        return [self.n_paths, self.lhs, self.se_lhs, self.rhs, self.se_rhs, self.z]


# ---- field builders ----


def separable_field(
    path: SamplePath2D,
    i: int,
    levels: Union[LevelGrid, np.ndarray],
    profile: Callable[[np.ndarray], np.ndarray],
) -> MartingaleField:
    """h(s, a) = profile(a) M_i(s) with the analytic F_s(a, b) = profile(a) profile(b) <M_i>_s."""
    r = _row(i)
    nodes = levels.nodes if isinstance(levels, LevelGrid) else np.asarray(levels, dtype=float)
    p = ensure_finite(np.broadcast_to(profile(nodes), nodes.shape), "profile")
    m = np.concatenate([[0.0], np.cumsum(path.dm[r])])
    qv = np.concatenate([[0.0], np.cumsum(path.dqv[r])])
    s = path.grid.nodes
    h = GridField2(s, nodes, m[:, None] * p[None, :])
    F = GridField3(s, nodes, nodes, qv[:, None, None] * (p[:, None] * p[None, :])[None, :, :])
    return MartingaleField(h=h, F=F)


def realized_cross_field(h: GridField2) -> GridField3:
    """F_s(a, b) = sum_{r<s} dh(r, a) dh(r, b)."""
    d = np.diff(h.values, axis=0)
    prods = d[:, :, None] * d[:, None, :]
    F = np.concatenate([np.zeros((1,) + prods.shape[1:]), np.cumsum(prods, axis=0)])
    return GridField3(h.s, h.x, h.x, F)


def cross_variation_field(f: TestFunction, path: SamplePath2D, levels: LevelGrid) -> GridField3:
    """F_s(a, b) = sum_{r<s} grad12 f(t_r, a, X_2) grad12 f(t_r, b, X_2) d<M_2>_r.

    Memory grows as N M^2; meant for modest level grids.
    """
    f.require("d12")
    t = path.grid.nodes[:-1]
    a = levels.nodes
    d = f.call("d12", t[:, None], a[None, :], path.x[1, :-1, None])
    prods = d[:, :, None] * d[:, None, :] * path.dqv[1][:, None, None]
    F = np.concatenate([np.zeros((1, a.size, a.size)), np.cumsum(prods, axis=0)])
    return GridField3(path.grid.nodes, a, a, F)


def gradient_field(f: TestFunction, path: SamplePath2D, levels: LevelGrid) -> MartingaleField:
    """h(s, a) = grad_1 f(s, a, X_2(s)) - grad_1 f(0, a, X_2(0)).

    Subtracting the initial level profile leaves every rectangle increment
    unchanged. F is taken from :func:`cross_variation_field` when the mixed
    derivative is available.
    """
    f.require("d1")
    t = path.grid.nodes
    a = levels.nodes
    vals = f.call("d1", t[:, None], a[None, :], path.x[1, :, None])
    h = GridField2(t, a, vals - vals[0][None, :])
    F = cross_variation_field(f, path, levels) if f.d12 is not None else None
    return MartingaleField(h=h, F=F)


# ---- approximation stages ----


def truncate(values: np.ndarray, n: float) -> np.ndarray:
    """Clip an integrand to [-n, n]."""
    if not n > 0:
        raise ValueError(f"truncation level must be positive, got {n}")
    return np.clip(values, -n, n)


def _causal_weights(spacing: float, n: int) -> np.ndarray:
    k = np.arange(int(np.ceil(2.0 / (n * spacing))) + 1)
    w = mollifier_value(n, k * spacing) * spacing
    total = w.sum()
    if total <= 0:
        # the grid is coarser than the mollifier support
        return np.array([1.0])
    return w / total


def mollify_grid(values: np.ndarray, s: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    """Smooth grid values with rho_n in time and in level.

    The mollifier lives on (0, 2/n), so each output only sees earlier times
    and lower levels; adaptedness is preserved. Values before the grid are
    treated as zero.
    """
    values = np.asarray(values, dtype=float)
    out = values
    if s.size > 1:
        out = signal.lfilter(_causal_weights(float(np.min(np.diff(s))), n), [1.0], out, axis=0)
    if x.size > 1:
        out = signal.lfilter(_causal_weights(float(np.min(np.diff(x))), n), [1.0], out, axis=1)
    return out


# ---- integrals ----


def _partition_indices(part: np.ndarray, nodes: np.ndarray, what: str) -> np.ndarray:
    idx = np.searchsorted(nodes, part)
    idx = np.clip(idx, 0, nodes.size - 1)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(nodes))))
    lower = np.clip(idx - 1, 0, nodes.size - 1)
    idx = np.where(np.abs(nodes[lower] - part) < np.abs(nodes[idx] - part), lower, idx)
    if np.any(np.abs(nodes[idx] - part) > tol):
        raise ValueError(f"the {what} partition is not a sub-grid of the field's grid")
    return idx


def sls_integral_simple(e: SimpleField, h: MartingaleField, t: Optional[float] = None) -> float:
    """sum_i sum_j e(t_j, x_i) [rectangle increment of h over (t_j ^ t, t_{j+1} ^ t] x (x_i, x_{i+1}]]."""
    jt = h.index_of(t)
    ti = np.minimum(_partition_indices(e.t, h.times, "time"), jt)
    li = _partition_indices(e.x, h.levels, "level")
    sub = h.h.values[np.ix_(ti, li)]
    incr = (sub[1:, 1:] - sub[:-1, 1:]) - (sub[1:, :-1] - sub[:-1, :-1])
    return float(np.sum(e.coef * incr))


def _expand_simple(e: SimpleField, h: MartingaleField) -> np.ndarray:
    """Corner samples of a simple field on h's full grid."""
    ti = _partition_indices(e.t, h.times, "time")
    li = _partition_indices(e.x, h.levels, "level")
    ns, nx = h.h.shape
    G = np.zeros((ns, nx))
    for a in range(ti.size - 1):
        for b in range(li.size - 1):
            G[ti[a] : ti[a + 1], li[b] : li[b + 1]] = e.coef[a, b]
    return G


def sample_integrand(g, h: MartingaleField) -> np.ndarray:
    """Left-point samples g(s_j, a_i) on h's grid, shape (N+1, M).

    ``g`` is a SimpleField, a GridField2/array on h's grid (already adapted,
    e.g. a local-time surface), or a callback ``g(s, levels, past)`` that is
    handed h restricted to [0, s].
    """
    if isinstance(g, SimpleField):
        return _expand_simple(g, h)
    if isinstance(g, GridField2):
        if g.values.shape == h.h.shape and not (
            np.allclose(g.s, h.times, rtol=1e-12, atol=1e-12) and np.allclose(g.x, h.levels, rtol=1e-12, atol=1e-12)
        ):
            raise ValueError("integrand grid does not match the time and level nodes of the field")
        G = g.values
    elif callable(g):
        ns, nx = h.h.shape
        G = np.empty((ns, nx))
        hv = h.h.values
        for j, s in enumerate(h.times):
            G[j] = np.broadcast_to(g(s, h.levels, hv[: j + 1]), (nx,))
    else:
        G = np.asarray(g, dtype=float)
    if G.shape != h.h.shape:
        raise ValueError(f"integrand shape {G.shape} does not match the field {h.h.shape}")
    if not np.all(np.isfinite(G)):
        raise EvaluationError("integrand returned non-finite values")
    return G


def sls_integral(
    g,
    h: MartingaleField,
    t: Optional[float] = None,
    mollify_n: Optional[int] = None,
    truncate_n: Optional[float] = None,
) -> float:
    """I_t(g): left-point sampling of g on h's grid, then the simple-field sum.

    Rough integrands can be truncated at level ``truncate_n`` and then
    mollified at order ``mollify_n`` before summation.
    """
    jt = h.index_of(t)
    G = sample_integrand(g, h)
    if truncate_n is not None:
        G = truncate(G, truncate_n)
    if mollify_n is not None:
        G = mollify_grid(G, h.times, h.levels, mollify_n)
    return float(
        kernels.weighted_rect_sum(
            np.ascontiguousarray(G[: jt + 1]), np.ascontiguousarray(h.h.values[: jt + 1])
        )
    )


def linearity_check(g1, g2, alpha: float, beta: float, h: MartingaleField, t: Optional[float] = None) -> float:
    """|I(alpha g1 + beta g2) - alpha I(g1) - beta I(g2)|."""
    if isinstance(g1, SimpleField) and isinstance(g2, SimpleField):
        combo = g1.scaled(alpha) + g2.scaled(beta)
        i1, i2, ic = (sls_integral_simple(g, h, t) for g in (g1, g2, combo))
    else:
        G1, G2 = sample_integrand(g1, h), sample_integrand(g2, h)
        i1, i2 = sls_integral(G1, h, t), sls_integral(G2, h, t)
        ic = sls_integral(alpha * G1 + beta * G2, h, t)
    return float(abs(ic - alpha * i1 - beta * i2))


def _integrand_for(g, k: int):
    return g[k] if isinstance(g, (list, tuple)) else g


def _quadratic_form(G: np.ndarray, F: GridField3) -> float:
    # sum over cells of g(s, x) g(s, y) times the 3-parameter increment of F
    D = rect_increments3(F)
    Gc = G[:-1, :-1]
    return float(np.einsum("ji,jik,jk->", Gc, D, Gc))


def isometry_terms(g, field: MartingaleField, t: Optional[float] = None) -> Tuple[float, float]:
    """(I_t(g), sum over cells of g(s, x) g(s, y) dF) for one path."""
    jt = field.index_of(t)
    G = sample_integrand(g, field)
    integral = sls_integral(G, field, t)
    return integral, _quadratic_form(G[: jt + 1], field.cross_field().restrict_time(jt))


def isometry_report(integrals, quads) -> IsometryReport:
    """Reduce per-path (I_t, quadratic form) pairs to an IsometryReport."""
    sq = np.asarray(integrals, dtype=float) ** 2
    quad = np.asarray(quads, dtype=float)
    if sq.size < 2:
        raise ValueError(f"an isometry check needs at least two paths, got {sq.size}")
    a, b = ensemble_stats(sq), ensemble_stats(quad)
    return IsometryReport(
        n_paths=int(sq.size),
        lhs=a["mean"],
        se_lhs=a["se"],
        rhs=b["mean"],
        se_rhs=b["se"],
        z=z_score(a["mean"], a["se"], b["mean"], b["se"]),
    )


def isometry_check(g, fields: Sequence[MartingaleField], t: Optional[float] = None) -> IsometryReport:
    """Compare E[I_t(g)^2] with E[sum g g dF] over an ensemble of fields.

    ``g`` is one integrand for every path or a list with one per path.
    """
    n = len(fields)
    if n < 2:
        raise ValueError(f"an isometry check needs at least two paths, got {n}")
    pairs = [isometry_terms(_integrand_for(g, k), field, t) for k, field in enumerate(fields)]
    return isometry_report([p[0] for p in pairs], [p[1] for p in pairs])


def martingale_check(g, fields: Sequence[MartingaleField], t: Optional[float] = None) -> dict:
    """Ensemble mean, SE and z-score (against 0) of I_t(g)."""
    vals = np.array([sls_integral(_integrand_for(g, k), f, t) for k, f in enumerate(fields)])
    st = ensemble_stats(vals)
    return {"mean": st["mean"], "se": st["se"], "z": z_score(st["mean"], st["se"], 0.0, 0.0)}


def integration_by_parts_check(
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grad_g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    h: MartingaleField,
    t: Optional[float] = None,
) -> float:
    """|LHS - RHS| with LHS = -sum_i sum_j grad g(t_j, x_i) [h(t_{j+1}, x_i) - h(t_j, x_i)] dx_i
    and RHS = I_t(g)."""
    jt = h.index_of(t)
    s = h.times[: jt + 1]
    x = h.levels
    ss, xx = np.meshgrid(s, x, indexing="ij")
    dg = ensure_finite(np.broadcast_to(grad_g(ss, xx), ss.shape), "grad g")
    dh = np.diff(h.h.values[: jt + 1], axis=0)
    lhs = -np.sum(dg[:-1, :-1] * dh[:, :-1] * np.diff(x)[None, :])
    G = np.zeros(h.h.shape)
    G[: jt + 1] = ensure_finite(np.broadcast_to(g(ss, xx), ss.shape), "g")
    rhs = sls_integral(G, h, t)
    return float(abs(lhs - rhs))


def class_diagnostics(g, fields: Sequence[MartingaleField], t: Optional[float] = None) -> dict:
    """Finite-grid surrogates for membership of (g, h) in the integrand classes.

    Reports finiteness and level support of g, symmetry and start of F, the
    ensemble mean of total_variation3(F) and of sum |g g| |dF|.
    """
    out = {
        "g_finite": True,
        "g_compact_support": True,
        "F_symmetric": True,
        "F_starts_at_zero": True,
        "F_total_variation": 0.0,
        "gg_dF_moment": 0.0,
    }
    tv, mom = [], []
    for k, field in enumerate(fields):
        jt = field.index_of(t)
        try:
            G = sample_integrand(_integrand_for(g, k), field)[: jt + 1]
        except EvaluationError:
            out["g_finite"] = False
            continue
        if np.any(G[:, 0] != 0) or np.any(G[:, -1] != 0):
            out["g_compact_support"] = False
        F = field.cross_field().restrict_time(jt)
        Fv = F.values
        if not np.allclose(Fv, np.swapaxes(Fv, 1, 2)):
            out["F_symmetric"] = False
        if np.any(Fv[0] != 0):
            out["F_starts_at_zero"] = False
        tv.append(total_variation3(F))
        D = np.abs(rect_increments3(F))
        Gc = np.abs(G[:-1, :-1])
        mom.append(float(np.einsum("ji,jik,jk->", Gc, D, Gc)))
    if tv:
        out["F_total_variation"] = float(np.mean(tv))
        out["gg_dF_moment"] = float(np.mean(mom))
    if not all(out[k] for k in ("g_finite", "F_symmetric", "F_starts_at_zero")):
        logger.warning(f"Integrand class diagnostics flagged a violation: {out}")
    return out
