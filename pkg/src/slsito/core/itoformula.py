"""
Term-by-term evaluation of generalized Ito formulas on sampled paths.

Every formula returns an :class:`ItoReport` with the same named terms; terms a
formula does not have are exact zeros. All sums are left-point: integrands
are evaluated at t_j and multiplied by the increment over (t_j, t_{j+1}].
Local-time terms are streamed in time blocks over the columns a path can
reach, so full surfaces are never held for long paths.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from ..cpu import kernels
from .bvmeasure import GridField2, stieltjes_sum_levels, total_variation2, variation1
from .exceptions import ConfigurationError, EvaluationError
from .functions import Curve, SplitFunction, TestFunction, _coord
from .localtime import (
    Estimator,
    LevelGrid,
    default_eps,
    iter_local_time_blocks,
    local_time_tanaka,
    moving_level_increments,
    occupation_increments_at,
)
from .simulate import SamplePath2D, _row, transform_by_curve

logger = logging.getLogger(__name__)

TERM_NAMES = (
    "term_time",
    "term_dx1",
    "term_dx2",
    "term_lt1",
    "term_sls1",
    "term_lt2",
    "term_sls2",
    "term_cross",
    "term_delta1",
    "term_delta2",
    "term_curve",
)
ITO_COLUMNS = ("path_id", "lhs") + TERM_NAMES + ("residual",)

Levels = Optional[Tuple[Optional[LevelGrid], Optional[LevelGrid]]]


@dataclass(frozen=True)
class ItoReport:
    """Both sides of an Ito-type identity for one path."""

    lhs: float
    term_time: float = 0.0
    term_dx1: float = 0.0
    term_dx2: float = 0.0
    term_lt1: float = 0.0
    term_sls1: float = 0.0
    term_lt2: float = 0.0
    term_sls2: float = 0.0
    term_cross: float = 0.0
    term_delta1: float = 0.0
    term_delta2: float = 0.0
    term_curve: float = 0.0

    def __post_init__(self):
        for fld in fields(self):
            val = float(getattr(self, fld.name))
            if not np.isfinite(val):
                raise EvaluationError(f"Ito report term {fld.name} is not finite")
            object.__setattr__(self, fld.name, val)

    @property
    def terms(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in TERM_NAMES}

    @property
    def residual(self) -> float:
        return float(self.lhs - np.sum([getattr(self, name) for name in TERM_NAMES]))

    def as_dict(self) -> dict[str, float]:
        out = asdict(self)
        out["residual"] = self.residual
        return out

    def as_row(self, path_id: int) -> list:
        return [path_id, self.lhs] + [getattr(self, name) for name in TERM_NAMES] + [self.residual]


def reports_to_csv(reports: Sequence[ItoReport], path: Union[str, Path], path_ids=None) -> None:
    """Write reports with the ``ITO_COLUMNS`` header; floats use ``repr``."""
    if path_ids is None:
        path_ids = range(len(reports))
    with open(path, "w", newline="") as fl:
        writer = csv.writer(fl)
        writer.writerow(ITO_COLUMNS)
        for pid, rep in zip(path_ids, reports):
            row = rep.as_row(int(pid))
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


# ---- shared pieces ----


def _left(path: SamplePath2D):
    """Left endpoints (t_j, X_1(t_j), X_2(t_j)), j < N."""
    return path.grid.nodes[:-1], path.x[0, :-1], path.x[1, :-1]


def _lhs(f: TestFunction, path: SamplePath2D) -> float:
    t = path.grid.nodes
    ends = f.call("f", t[[0, -1]], path.x[0, [0, -1]], path.x[1, [0, -1]])
    return float(ends[1] - ends[0])


def _time_term(f: TestFunction, path: SamplePath2D) -> float:
    if f.time_independent:
        return 0.0
    return float(np.sum(f.call("dt", *_left(path)) * path.grid.dt))


def _dx_term(f: TestFunction, path: SamplePath2D, i: int) -> float:
    return float(np.sum(f.grad(i, *_left(path)) * path.dx(i)))


def _delta_term(f: Optional[TestFunction], path: SamplePath2D, i: int) -> float:
    if f is None:
        return 0.0
    return float(0.5 * np.sum(f.lap(i, *_left(path)) * path.dqv[_row(i)]))


def _cross_term(f: TestFunction, path: SamplePath2D) -> float:
    return float(np.sum(f.call("d12", *_left(path)) * path.dcov))


def _resolve_eps(path: SamplePath2D, eps: Optional[float]) -> float:
    return default_eps(path.grid) if eps is None else float(eps)


def _resolve_levels(path: SamplePath2D, levels: Levels, i: int, eps: float) -> LevelGrid:
    grid = None if levels is None else levels[i - 1]
    if grid is None:
        grid = LevelGrid.for_path(path, i, da=eps)
    return grid


def _field_rows(f: TestFunction, path: SamplePath2D, i: int, grad: int):
    """h(s, a) = grad_{grad} f(s, slot_i = a, other coordinate at s), evaluated on row blocks."""
    t = path.grid.nodes
    other = path.x[1 - _row(i)]

    def rows(idx: np.ndarray, a: np.ndarray) -> np.ndarray:
        s = t[idx][:, None]
        xo = other[idx][:, None]
        aa = a[None, :]
        if i == 1:
            return f.grad(grad, s, aa, xo)
        return f.grad(grad, s, xo, aa)

    return rows


def _local_time_pass(
    path: SamplePath2D,
    i: int,
    levels: LevelGrid,
    method: Estimator,
    eps: float,
    field: Callable[[np.ndarray, np.ndarray], np.ndarray],
    block: int,
):
    """Stream L_i and the field h together.

    Returns the active level grid, L_i(T, .) and h(T, .) on it, and the
    two-parameter sum sum_j sum_k L_i(t_j, a_k) [rectangle increment of h].
    """
    x = path.x[_row(i)]
    band = eps if method == "occupation" else 0.0
    if levels.nodes[0] > x.min() - band or levels.nodes[-1] < x.max():
        logger.warning(
            f"Level grid [{levels.nodes[0]}, {levels.nodes[-1]}] does not cover the range of X_{i}; "
            "local-time support is truncated"
        )
    lv = levels.sub(levels.active_columns(x, band))
    total = 0.0
    L_T = H_T = None
    for j0, L in iter_local_time_blocks(path, i, lv, method, eps if method == "occupation" else None, block):
        H = field(np.arange(j0, j0 + L.shape[0]), lv.nodes)
        total += kernels.weighted_rect_sum(L, np.ascontiguousarray(H))
        L_T, H_T = L[-1], H[-1]
    return lv, L_T, H_T, float(total)


def _lt_sls_terms(
    f: TestFunction,
    path: SamplePath2D,
    i: int,
    levels: LevelGrid,
    method: Estimator,
    eps: float,
    block: int,
) -> Tuple[float, float]:
    """(level-Stieltjes term, two-parameter term) for coordinate i."""
    _, L_T, H_T, sls = _local_time_pass(path, i, levels, method, eps, _field_rows(f, path, i, i), block)
    return stieltjes_sum_levels(L_T, H_T), -sls


# ---- formulas ----


def ito_smooth_residual(f: TestFunction, path: SamplePath2D) -> ItoReport:
    """The classical formula with left-point Ito sums.

    Second-order terms use the analytic variation laws: 1/2 sum d_ii f d<M_i>
    and sum d_12 f d<M_1, M_2>.
    """
    f.require("d1", "d2", "d11", "d22", "d12")
    return ItoReport(
        lhs=_lhs(f, path),
        term_time=_time_term(f, path),
        term_dx1=_dx_term(f, path, 1),
        term_dx2=_dx_term(f, path, 2),
        term_delta1=_delta_term(f, path, 1),
        term_delta2=_delta_term(f, path, 2),
        term_cross=_cross_term(f, path),
    )


def ito2d_residual(
    f: TestFunction,
    path: SamplePath2D,
    levels: Levels = None,
    eps: Optional[float] = None,
    method: Estimator = "occupation",
    block: int = 4096,
) -> ItoReport:
    """The two-dimensional formula with local-time terms for both coordinates.

    For each coordinate i the level-Stieltjes term is
    sum_k L_i(T, a_k) [grad_i f(T, a_{k+1}, .) - grad_i f(T, a_k, .)] and the
    two-parameter term is minus the integral of L_i against the field
    h(s, a) = grad_i f(s, a, other coordinate at s). Levels default to a grid
    of spacing eps = sqrt(dt) anchored at 0.

    Parameters
    ----------
    f : TestFunction
        Needs ``d1``, ``d2`` and ``d12``.
    path : SamplePath2D
    levels : tuple of LevelGrid, optional
        Level grids for coordinates 1 and 2; ``None`` entries use the default.
    eps : float, optional
        Occupation band width; defaults to sqrt(dt).
    method : {"occupation", "tanaka"}
        Local-time estimator.
    block : int
        Time rows per streamed block.
    """
    f.require("d1", "d2", "d12")
    eps = _resolve_eps(path, eps)
    lt = {}
    for i in (1, 2):
        lt[i] = _lt_sls_terms(f, path, i, _resolve_levels(path, levels, i, eps), method, eps, block)
    return ItoReport(
        lhs=_lhs(f, path),
        term_time=_time_term(f, path),
        term_dx1=_dx_term(f, path, 1),
        term_dx2=_dx_term(f, path, 2),
        term_lt1=lt[1][0],
        term_sls1=lt[1][1],
        term_lt2=lt[2][0],
        term_sls2=lt[2][1],
        term_cross=_cross_term(f, path),
    )


def ito2d_split_residual(
    split: SplitFunction,
    path: SamplePath2D,
    levels: Levels = None,
    eps: Optional[float] = None,
    method: Estimator = "occupation",
    block: int = 4096,
) -> ItoReport:
    """f = f_h + f_v: second-derivative terms from f_h, local-time terms from f_v.

    The time, dX and cross terms are those of the full function.
    """
    split.f_h.require("d1", "d2", "d11", "d22")
    split.f_v.require("d1", "d2")
    full = split.combined()
    full.require("d12")
    eps = _resolve_eps(path, eps)
    lt = {}
    for i in (1, 2):
        lt[i] = _lt_sls_terms(split.f_v, path, i, _resolve_levels(path, levels, i, eps), method, eps, block)
    return ItoReport(
        lhs=_lhs(full, path),
        term_time=_time_term(full, path),
        term_dx1=_dx_term(full, path, 1),
        term_dx2=_dx_term(full, path, 2),
        term_lt1=lt[1][0],
        term_sls1=lt[1][1],
        term_lt2=lt[2][0],
        term_sls2=lt[2][1],
        term_cross=_cross_term(full, path),
        term_delta1=_delta_term(split.f_h, path, 1),
        term_delta2=_delta_term(split.f_h, path, 2),
    )


def _level_increments(path: SamplePath2D, i: int, a: float, eps: float, method: Estimator) -> np.ndarray:
    if method == "occupation":
        return occupation_increments_at(path, i, a, eps)
    return local_time_tanaka(path, i, LevelGrid.single(a)).increments()[:, 0]


def curve_corollary_residual(
    f: TestFunction,
    b: Curve,
    path: SamplePath2D,
    eps: Optional[float] = None,
    method: Estimator = "occupation",
) -> ItoReport:
    """The formula for f smooth off the curve x2 = b(x1).

    Smooth terms are evaluated off the curve with the one-sided callbacks. The
    curve term is sum_j [jump of grad_2 f at (t_j, X_1(t_j))] times the
    increment of L_2*(., 0), the local time at 0 of X_2* = X_2 - b(X_1). A
    function without a ``d2_jump`` callback has no curve term.
    """
    f.require("d1", "d2", "d11", "d22", "d12")
    curve = 0.0
    if f.d2_jump is not None:
        eps = _resolve_eps(path, eps)
        star = transform_by_curve(path, b)
        t, x1, _ = _left(path)
        dL = _level_increments(star, 2, 0.0, eps, method)
        curve = float(np.sum(f.jump(2, t, x1) * dL))
    return ItoReport(
        lhs=_lhs(f, path),
        term_time=_time_term(f, path),
        term_dx1=_dx_term(f, path, 1),
        term_dx2=_dx_term(f, path, 2),
        term_delta1=_delta_term(f, path, 1),
        term_delta2=_delta_term(f, path, 2),
        term_cross=_cross_term(f, path),
        term_curve=curve,
    )


def _zero(t, x1, x2):
    return 0.0


def corollary_split(f: TestFunction, b: Curve, tol: float = 1e-8) -> SplitFunction:
    """Split f across its kink curve into a C1 part and a bounded-variation part.

    f_v(t, x1, x2) = int_0^{x1} J(t, y) (x2 - b(y))^+ dy with J the jump of
    grad_2 f across the curve, by adaptive quadrature, and f_h = f - f_v. The
    derivatives of f_v are grad_1 f_v = J(x1) (x2 - b(x1))^+,
    grad_2 f_v = int_0^{x1} J(y) 1[x2 > b(y)] dy and
    grad_1 grad_2 f_v = J(x1) 1[x2 > b(x1)]. J is taken at the current time
    and f_v is given no time derivative, so the jump must not depend on t.
    Second derivatives of f_h are not provided.
    """
    if f.d2_jump is None:
        f_v = TestFunction(name=f"{f.name}.v", f=_zero, d1=_zero, d2=_zero, d12=_zero, regularity="bv-only")
        return SplitFunction(name=f.name, f_h=f, f_v=f_v)

    def jump(t, y):
        return float(f.jump(2, t, y))

    def quad(integrand, x1) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(integrand, 0.0, x1, epsabs=tol, epsrel=tol, limit=200)
            except integrate.IntegrationWarning as exc:
                raise EvaluationError(f"corollary split quadrature failed: {exc}") from exc
        if not np.isfinite(val):
            raise EvaluationError("corollary split quadrature returned a non-finite value")
        return val

    def pointwise(kernel):
        def fn(t, x1, x2):
            shape = np.broadcast(t, x1, x2).shape
            tt, aa, bb = (np.broadcast_to(np.asarray(v, dtype=float), shape).reshape(-1) for v in (t, x1, x2))
            out = np.array(
                [quad(lambda y: jump(s, y) * kernel(c - float(b.value(y))), a) for s, a, c in zip(tt, aa, bb)]
            )
            return out.reshape(shape)

        return fn

    fv = pointwise(lambda u: max(u, 0.0))
    dv2 = pointwise(lambda u: 1.0 if u > 0 else 0.0)

    def dv1(t, x1, x2):
        return f.jump(2, t, x1) * np.maximum(x2 - b.value(x1), 0.0)

    def dv12(t, x1, x2):
        return f.jump(2, t, x1) * np.where(x2 - b.value(x1) > 0, 1.0, 0.0)

    f_v = TestFunction(name=f"{f.name}.v", f=fv, d1=dv1, d2=dv2, d12=dv12, regularity="bv-only")

    def minus(name, other):
        base = getattr(f, name)
        if base is None:
            return None
        return lambda t, x1, x2: f.call(name, t, x1, x2) - other(t, x1, x2)

    f_h = TestFunction(
        name=f"{f.name}.h",
        f=minus("f", fv),
        dt=f.dt,
        d1=minus("d1", dv1),
        d2=minus("d2", dv2),
        d12=minus("d12", dv12),
        regularity="split",
    )
    return SplitFunction(name=f.name, f_h=f_h, f_v=f_v)


def _one_dimensional_parts(f: Union[TestFunction, SplitFunction]):
    """(full, C1 part or None, BV part or None) for the one-dimensional formulas."""
    if isinstance(f, SplitFunction):
        return f.combined(), f.f_h, f.f_v
    if f.regularity == "smooth":
        return f, f, None
    return f, None, f


def ito1d_residual(
    f: Union[TestFunction, SplitFunction],
    path: SamplePath2D,
    levels: Optional[LevelGrid] = None,
    eps: Optional[float] = None,
    method: Estimator = "occupation",
    i: int = 2,
    block: int = 4096,
) -> ItoReport:
    """The one-dimensional formula on coordinate i.

    Smooth functions contribute 1/2 sum d_ii f d<X_i>; bounded-variation
    functions contribute the level-Stieltjes and two-parameter terms; a split
    function contributes both from its respective parts. Callbacks see the
    actual other coordinate and must not depend on it.
    """
    i = _coord(i)
    full, f_h, f_v = _one_dimensional_parts(f)
    full.require(f"d{i}")
    if f_h is not None:
        f_h.require(f"d{i}{i}")
    lt = sls = 0.0
    if f_v is not None:
        f_v.require(f"d{i}")
        eps = _resolve_eps(path, eps)
        grid = levels if levels is not None else LevelGrid.for_path(path, i, da=eps)
        lt, sls = _lt_sls_terms(f_v, path, i, grid, method, eps, block)
    terms = {
        "term_time": _time_term(full, path),
        f"term_dx{i}": _dx_term(full, path, i),
        f"term_delta{i}": _delta_term(f_h, path, i),
        f"term_lt{i}": lt,
        f"term_sls{i}": sls,
    }
    return ItoReport(lhs=_lhs(full, path), **terms)


def curve1d_residual(
    f: TestFunction,
    gamma: Curve,
    path: SamplePath2D,
    levels: Optional[LevelGrid] = None,
    eps: Optional[float] = None,
    i: int = 2,
) -> ItoReport:
    """The one-dimensional formula for f smooth off a moving level x = gamma(t).

    The curve term is sum_j [jump of grad f at (t_j, gamma(t_j))] times the
    occupation increment at the level-grid column at or below gamma(t_j).
    """
    i = _coord(i)
    f.require(f"d{i}", f"d{i}{i}")
    curve = 0.0
    if getattr(f, f"d{i}_jump") is not None:
        eps = _resolve_eps(path, eps)
        grid = levels if levels is not None else LevelGrid.for_path(path, i, da=eps)
        t = path.grid.nodes[:-1]
        dL = moving_level_increments(path, i, grid, eps, gamma.value(t))
        other = path.x[1 - _row(i), :-1]
        curve = float(np.sum(f.jump(i, t, other) * dL))
    terms = {
        "term_time": _time_term(f, path),
        f"term_dx{i}": _dx_term(f, path, i),
        f"term_delta{i}": _delta_term(f, path, i),
        "term_curve": curve,
    }
    return ItoReport(lhs=_lhs(f, path), **terms)


def occupation_parts_residual(
    f: TestFunction,
    path: SamplePath2D,
    i: int,
    levels: Optional[LevelGrid] = None,
    eps: Optional[float] = None,
    method: Estimator = "occupation",
    block: int = 4096,
) -> ItoReport:
    """The occupation identity integrated by parts in time, for coordinate i.

    lhs = 1/2 sum d_ii f(t_j, X(t_j)) d<X_i>; the level term is
    sum_k d_ii f(T, a_k, .) L_i(T, a_k) da_k and the two-parameter term is minus
    the integral of L_i against h(s, a) = grad_i f(s, a, other coordinate at s).
    """
    i = _coord(i)
    f.require(f"d{i}", f"d{i}{i}")
    eps = _resolve_eps(path, eps)
    grid = levels if levels is not None else LevelGrid.for_path(path, i, da=eps)
    if grid.size < 2:
        raise ValueError("the occupation identity needs at least two levels")
    lv, L_T, _, sls = _local_time_pass(path, i, grid, method, eps, _field_rows(f, path, i, i), block)
    T = path.grid.horizon
    other = path.x[1 - _row(i), -1]
    if i == 1:
        lap = f.lap(1, T, lv.nodes, other)
    else:
        lap = f.lap(2, T, other, lv.nodes)
    k0 = int(np.searchsorted(grid.nodes, lv.nodes[0]))
    level_term = float(np.sum(lap * L_T * grid.widths[k0 : k0 + lv.size]))
    return ItoReport(
        lhs=_delta_term(f, path, i),
        **{f"term_lt{i}": level_term, f"term_sls{i}": -sls},
    )


# ---- condition diagnostics ----


@dataclass(frozen=True)
class Diagnostic:
    """One advisory check; ``value`` is the measured quantity."""

    name: str
    passed: bool
    value: float
    message: str = ""


Box = Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]

# (callback, function it differentiates, variable index 0=t 1=x1 2=x2)
_FD_PAIRS = (
    ("dt", "f", 0),
    ("d1", "f", 1),
    ("d2", "f", 2),
    ("d12", "d2", 1),
    ("d11", "d1", 1),
    ("d22", "d2", 2),
)


def _shifted(args, k: int, h: float, sign: float):
    out = list(args)
    out[k] = out[k] + sign * h
    return out


def _fd_check(f: TestFunction, pts, step: float, kink_tol: float) -> list[Diagnostic]:
    out = []
    has = f.available()
    for deriv, base, k in _FD_PAIRS:
        if not (has[deriv] and has[base]):
            continue
        hi = f.call(base, *_shifted(pts, k, step, +1.0))
        lo = f.call(base, *_shifted(pts, k, step, -1.0))
        smooth = np.ones(hi.shape, dtype=bool)
        if base != "f":
            # skip points within one step of a jump of the differentiated callback
            smooth &= np.abs(hi - lo) <= kink_tol
        # and points where the callback itself jumps within one step
        dhi = f.call(deriv, *_shifted(pts, k, step, +1.0))
        dlo = f.call(deriv, *_shifted(pts, k, step, -1.0))
        smooth &= np.abs(dhi - dlo) <= kink_tol
        fd = (hi - lo) / (2.0 * step)
        cb = f.call(deriv, *pts)
        err = np.abs(cb - fd)[smooth]
        worst = float(err.max()) if err.size else 0.0
        scale = 1.0 + (float(np.abs(cb[smooth]).max()) if err.size else 0.0)
        ok = worst <= 1e-5 * scale
        out.append(
            Diagnostic(
                name=f"fd:{deriv}",
                passed=ok,
                value=worst,
                message=f"{int(smooth.sum())} smooth points of {smooth.size}",
            )
        )
    return out


def _variation_check(
    f: TestFunction, box: Box, rng: np.random.Generator, i: int, resolutions: Sequence[int], lines: int, growth: float
) -> list[Diagnostic]:
    """Variation of grad_i f along level lines in x_i, and its growth under refinement."""
    name = f"d{i}"
    if not f.available()[name]:
        return []
    (t0, t1), box1, box2 = box
    lo, hi = (box1, box2)[i - 1]
    olo, ohi = (box2, box1)[i - 1]
    ts = rng.uniform(t0, t1, lines)
    others = rng.uniform(olo, ohi, lines)
    per_res = []
    for m in resolutions:
        a = np.linspace(lo, hi, m + 1)
        worst = 0.0
        for s, o in zip(ts, others):
            vals = f.grad(1, s, a, o) if i == 1 else f.grad(2, s, o, a)
            worst = max(worst, variation1(vals))
        per_res.append(worst)
    bounded = per_res[-1] <= growth * max(per_res[0], 1e-300) or per_res[-1] == 0.0
    out = [
        Diagnostic(
            name=f"variation:{name}",
            passed=bounded,
            value=per_res[-1],
            message=f"variation by resolution {dict(zip(resolutions, per_res))}",
        )
    ]
    # two-parameter variation of the field (s, a) -> grad_i f with the other coordinate frozen
    m = resolutions[0]
    s_nodes = np.linspace(t0, t1, m + 1)
    a = np.linspace(lo, hi, m + 1)
    ss, aa = np.meshgrid(s_nodes, a, indexing="ij")
    vals = f.grad(i, ss, aa, others[0]) if i == 1 else f.grad(i, ss, others[0], aa)
    tv = total_variation2(GridField2(s_nodes, a, vals))
    out.append(Diagnostic(name=f"variation2:{name}", passed=np.isfinite(tv), value=tv))
    return out


def condition_check(
    f: TestFunction,
    box: Box,
    samples: int = 100,
    seed: int = 0,
    step: float = 1e-5,
    kink_tol: float = 1e-2,
    resolutions: Sequence[int] = (200, 2000, 20000),
    growth: float = 2.0,
) -> list[Diagnostic]:
    """Advisory checks of the regularity conditions on a box of (t, x1, x2).

    Reports central finite-difference consistency of every callback at random
    points away from kinks, boundedness of f and its callbacks, and the
    variation of grad_i f along level lines, which is flagged when it grows
    by more than ``growth`` from the coarsest to the finest resolution.
    Violations are logged as warnings; nothing is raised.
    """
    rng = np.random.default_rng(seed)
    (t0, t1), (a0, a1), (b0, b1) = box
    pts = [rng.uniform(t0, t1, samples), rng.uniform(a0, a1, samples), rng.uniform(b0, b1, samples)]
    out: list[Diagnostic] = []
    try:
        bound = 0.0
        for name, present in f.available().items():
            if present and not name.endswith("_jump"):
                bound = max(bound, float(np.abs(f.call(name, *pts)).max()))
        out.append(Diagnostic(name="bounded", passed=True, value=bound))
        out.extend(_fd_check(f, pts, step, kink_tol))
        for i in (1, 2):
            out.extend(_variation_check(f, box, rng, i, resolutions, lines=4, growth=growth))
    except (EvaluationError, ConfigurationError) as exc:
        out.append(Diagnostic(name="bounded", passed=False, value=np.inf, message=str(exc)))

    for d in out:
        if not d.passed:
            logger.warning(f"Condition check {d.name} failed for {f.name}: value={d.value} {d.message}")
    return out
