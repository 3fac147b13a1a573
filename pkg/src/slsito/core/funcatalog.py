"""
Catalog of test functions with exact one-sided derivatives, and the mollifier.

The mollifier is rho(x) = c exp(1 / ((x - 1)^2 - 1)) on (0, 2), zero elsewhere,
with c fixed by unit mass; rho_n(x) = n rho(n x).
"""

from __future__ import annotations

import functools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from .exceptions import ConfigurationError, EvaluationError
from .functions import Curve, SplitFunction, TestFunction

logger = logging.getLogger(__name__)

MOLLIFIER_TOL = 1e-8


def _bump(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = x - 1.0
    inside = np.abs(u) < 1.0
    out = np.zeros_like(u)
    ui = u[inside]
    out[inside] = np.exp(1.0 / (ui * ui - 1.0))
    return out


def _dbump(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = x - 1.0
    inside = np.abs(u) < 1.0
    out = np.zeros_like(u)
    ui = u[inside]
    q = ui * ui - 1.0
    out[inside] = np.exp(1.0 / q) * (-2.0 * ui / (q * q))
    return out


@functools.lru_cache(maxsize=None)
def mollifier_constant() -> float:
    """c such that the integral of rho over (0, 2) is 1, by adaptive quadrature."""
    mass, err = integrate.quad(lambda x: float(_bump(x)), 0.0, 2.0, epsabs=1e-14, epsrel=1e-13)
    if not np.isfinite(mass) or err > MOLLIFIER_TOL:
        raise EvaluationError(f"mollifier normalization failed (mass={mass}, err={err})")
    return 1.0 / mass


def rho(x) -> np.ndarray:
    return mollifier_constant() * _bump(x)


def drho(x) -> np.ndarray:
    return mollifier_constant() * _dbump(x)


@dataclass(frozen=True)
class Mollifier:
    """rho_n(x) = n rho(n x), supported on (0, 2/n)."""

    n: int
    c: float = field(default_factory=mollifier_constant)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"mollifier order must be a positive integer, got {self.n}")

    def __call__(self, x) -> np.ndarray:
        return self.n * self.c * _bump(self.n * np.asarray(x, dtype=float))

    def mass(self) -> float:
        val, _ = integrate.quad(lambda x: float(self(x)), 0.0, 2.0 / self.n, epsabs=1e-13, epsrel=1e-12)
        return val


def mollifier_value(n: int, x) -> np.ndarray:
    """n rho(n x)."""
    return Mollifier(n)(x)


# ---- mollification ----

_MOLLIFY_CHUNK = 2_000_000


def _gauss_rule(m: int):
    nodes, weights = np.polynomial.legendre.leggauss(m)
    t = nodes + 1.0
    w = weights * rho(t)
    dw = weights * drho(t)
    # exact unit mass on the discrete rule, so constants are reproduced
    return t, w / w.sum(), dw


def _tensor(a, b, c) -> np.ndarray:
    return (a[:, None, None] * b[None, :, None] * c[None, None, :]).reshape(-1)


class _Smoother:
    """Evaluates integrals of rho(t) rho(y) rho(z) g(|s - t/n|, x1 - y/n, x2 - z/n).

    ``weights`` selects which factor is replaced by n rho' (for derivatives).
    """

    def __init__(self, n: int, rule: Literal["gauss", "adaptive"], m: int):
        if rule not in ("gauss", "adaptive"):
            raise ValueError(f"unknown quadrature rule: {rule}")
        self.n = n
        self.rule = rule
        self.m = m
        if rule == "gauss":
            t, w, dw = _gauss_rule(m)
            self.t = t
            self.w = w
            self.dw = dw

    def _weights(self, which: Optional[str]) -> np.ndarray:
        w, dw, n = self.w, self.dw, self.n
        if which is None:
            return _tensor(w, w, w)
        if which == "y":
            return n * _tensor(w, dw, w)
        if which == "z":
            return n * _tensor(w, w, dw)
        raise ValueError(which)

    def __call__(self, g, s, x1, x2, which: Optional[str] = None, time_sign: bool = False):
        shape = np.broadcast(s, x1, x2).shape
        s, x1, x2 = (np.broadcast_to(np.asarray(v, dtype=float), shape).reshape(-1) for v in (s, x1, x2))
        if self.rule == "adaptive":
            out = np.array(
                [self._adaptive(g, a, b, c, which, time_sign) for a, b, c in zip(s, x1, x2)]
            )
            return out.reshape(shape)

        tt = np.repeat(self.t, self.m * self.m)
        yy = np.tile(np.repeat(self.t, self.m), self.m)
        zz = np.tile(self.t, self.m * self.m)
        weights = self._weights(which)
        out = np.empty(s.size)
        step = max(1, _MOLLIFY_CHUNK // weights.size)
        for lo in range(0, s.size, step):
            hi = min(lo + step, s.size)
            tau = s[lo:hi, None] - tt[None, :] / self.n
            vals = np.asarray(
                g(np.abs(tau), x1[lo:hi, None] - yy[None, :] / self.n, x2[lo:hi, None] - zz[None, :] / self.n),
                dtype=float,
            )
            vals = np.broadcast_to(vals, tau.shape)
            if time_sign:
                vals = vals * np.where(tau >= 0, 1.0, -1.0)
            out[lo:hi] = vals @ weights
        if not np.all(np.isfinite(out)):
            raise EvaluationError("mollification produced non-finite values")
        return out.reshape(shape)

    def _adaptive(self, g, s, x1, x2, which, time_sign) -> float:
        n = self.n
        ft = rho
        fy = (lambda y: n * drho(y)) if which == "y" else rho
        fz = (lambda z: n * drho(z)) if which == "z" else rho

        def integrand(z, y, t):
            tau = s - t / n
            sign = (1.0 if tau >= 0 else -1.0) if time_sign else 1.0
            val = float(np.asarray(g(abs(tau), x1 - y / n, x2 - z / n), dtype=float))
            return float(ft(t) * fy(y) * fz(z)) * sign * val

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.nquad(
                    integrand,
                    [(0.0, 2.0)] * 3,
                    opts={"epsabs": MOLLIFIER_TOL, "epsrel": MOLLIFIER_TOL, "limit": 200},
                )
            except integrate.IntegrationWarning as exc:
                raise EvaluationError(f"mollification quadrature failed: {exc}") from exc
        if not np.isfinite(val):
            raise EvaluationError("mollification quadrature returned a non-finite value")
        return val


def mollify(
    f: TestFunction,
    n: int,
    rule: Literal["gauss", "adaptive"] = "gauss",
    nodes: int = 24,
) -> TestFunction:
    """Smooth f with the product mollifier rho x rho x rho at order n.

    Negative times are reflected, f(-tau, .) = f(tau, .). First derivatives are
    the smoothed left derivatives; second derivatives move one derivative onto
    the mollifier, n rho'. ``rule="gauss"`` uses a vectorized tensor
    Gauss-Legendre rule with ``nodes`` points per axis, ``rule="adaptive"``
    nested adaptive quadrature at tolerance 1e-8 per axis.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"mollifier order must be a positive integer, got {n}")
    sm = _Smoother(int(n), rule, nodes)

    def raw(name):
        return lambda t, x1, x2: f.call(name, t, x1, x2)

    def smoothed(name, which=None, time_sign=False):
        g = raw(name)
        return lambda t, x1, x2: sm(g, t, x1, x2, which=which, time_sign=time_sign)

    has = f.available()
    return TestFunction(
        name=f"{f.name}@n{n}",
        f=smoothed("f"),
        dt=smoothed("dt", time_sign=True) if has["dt"] else None,
        d1=smoothed("d1") if has["d1"] else None,
        d2=smoothed("d2") if has["d2"] else None,
        d12=smoothed("d2", which="y") if has["d2"] else None,
        d11=smoothed("d1", which="y") if has["d1"] else None,
        d22=smoothed("d2", which="z") if has["d2"] else None,
        regularity="smooth",
    )


# ---- catalog ----

Formula = Literal["smooth", "2d", "split", "corollary", "1d", "curve-1d", "parts"]


@dataclass(frozen=True)
class CatalogEntry:
    """A catalog function with the formulas it exercises.

    ``curve`` is b(x1) for the corollary formula or gamma(t) for the
    one-dimensional moving-level formula. One-dimensional formulas act on
    coordinate 2.
    """

    id: str
    function: Union[TestFunction, SplitFunction]
    formulas: Tuple[str, ...]
    reductions: Tuple[str, ...] = ()
    curve: Optional[Curve] = None
    decay_min: float = 1.3
    description: str = ""

    @property
    def test_function(self) -> TestFunction:
        if isinstance(self.function, SplitFunction):
            return self.function.combined()
        return self.function


def _zero(t, x1, x2):
    return 0.0


def _ind(cond) -> np.ndarray:
    return np.where(cond, 1.0, 0.0)


ZERO_CURVE = Curve("zero", b=lambda x: np.zeros_like(x), db=lambda x: np.zeros_like(x), d2b=lambda x: np.zeros_like(x))
SINE_CURVE = Curve("sin", b=np.sin, db=np.cos, d2b=lambda x: -np.sin(x))
GAMMA = 1.0
DIAGONAL = Curve("gamma*t", b=lambda t: GAMMA * np.asarray(t, dtype=float), db=lambda t: np.full_like(t, GAMMA), d2b=lambda t: np.zeros_like(t))


def _side(x1, x2):
    # sign of x2 - sin(x1), taking the left limit in x2 on the curve
    return np.where(x2 - np.sin(x1) > 0, 1.0, -1.0)


SMOOTH_QUAD = TestFunction(
    name="SMOOTH_QUAD",
    f=lambda t, x1, x2: x1**2 + x2**2 + t,
    dt=lambda t, x1, x2: 1.0,
    d1=lambda t, x1, x2: 2.0 * x1,
    d2=lambda t, x1, x2: 2.0 * x2,
    d12=_zero,
    d11=lambda t, x1, x2: 2.0,
    d22=lambda t, x1, x2: 2.0,
)

SMOOTH_1D = TestFunction(
    name="SMOOTH_1D",
    f=lambda t, x1, x2: x2**2 + t,
    dt=lambda t, x1, x2: 1.0,
    d1=_zero,
    d2=lambda t, x1, x2: 2.0 * x2,
    d12=_zero,
    d11=_zero,
    d22=lambda t, x1, x2: 2.0,
)

CROSS = TestFunction(
    name="CROSS",
    f=lambda t, x1, x2: x1 * x2,
    d1=lambda t, x1, x2: x2,
    d2=lambda t, x1, x2: x1,
    d12=lambda t, x1, x2: 1.0,
    d11=_zero,
    d22=_zero,
)

TANAKA2 = TestFunction(
    name="TANAKA2",
    f=lambda t, x1, x2: np.maximum(x2, 0.0),
    d1=_zero,
    d2=lambda t, x1, x2: _ind(x2 > 0),
    d12=_zero,
    d11=_zero,
    d22=_zero,
    d2_jump=lambda t, x1: 1.0,
    regularity="bv-only",
)

ABS2 = TestFunction(
    name="ABS2",
    f=lambda t, x1, x2: np.abs(x2),
    d1=_zero,
    d2=lambda t, x1, x2: np.where(x2 > 0, 1.0, -1.0),
    d12=_zero,
    d11=_zero,
    d22=_zero,
    d2_jump=lambda t, x1: 2.0,
    regularity="bv-only",
)

ABS_CURVE = TestFunction(
    name="ABS_CURVE",
    f=lambda t, x1, x2: np.abs(x2 - np.sin(x1)),
    d1=lambda t, x1, x2: -_side(x1, x2) * np.cos(x1),
    d2=lambda t, x1, x2: _side(x1, x2),
    d12=_zero,
    d11=lambda t, x1, x2: _side(x1, x2) * np.sin(x1),
    d22=_zero,
    d2_jump=lambda t, x1: 2.0,
    regularity="bv-only",
)

RAMP_CURVE = TestFunction(
    name="RAMP_CURVE",
    f=lambda t, x1, x2: np.maximum(x2 - np.sin(x1), 0.0),
    d1=lambda t, x1, x2: -np.cos(x1) * _ind(x2 > np.sin(x1)),
    d2=lambda t, x1, x2: _ind(x2 > np.sin(x1)),
    # left x1-derivative of 1[x2 > sin x1]: zero off the curve
    d12=_zero,
    d11=lambda t, x1, x2: np.sin(x1) * _ind(x2 > np.sin(x1)),
    d22=_zero,
    d2_jump=lambda t, x1: 1.0,
    regularity="bv-only",
)

MOVING_KINK = TestFunction(
    name="MOVING_KINK",
    f=lambda t, x1, x2: np.maximum(x2 - GAMMA * t, 0.0),
    dt=lambda t, x1, x2: -GAMMA * _ind(x2 >= GAMMA * t),
    d1=_zero,
    d2=lambda t, x1, x2: _ind(x2 > GAMMA * t),
    d12=_zero,
    d11=_zero,
    d22=_zero,
    d2_jump=lambda t, x1: 1.0,
    regularity="bv-only",
)

SPLIT_QUAD_RAMP = SplitFunction(
    name="SPLIT_QUAD_RAMP",
    f_h=TestFunction(
        name="SPLIT_QUAD_RAMP.h",
        f=lambda t, x1, x2: x2**2,
        d1=_zero,
        d2=lambda t, x1, x2: 2.0 * x2,
        d12=_zero,
        d11=_zero,
        d22=lambda t, x1, x2: 2.0,
    ),
    f_v=TestFunction(
        name="SPLIT_QUAD_RAMP.v",
        f=lambda t, x1, x2: np.maximum(x2, 0.0),
        d1=_zero,
        d2=lambda t, x1, x2: _ind(x2 > 0),
        d12=_zero,
        regularity="bv-only",
    ),
)


_CATALOG: Tuple[CatalogEntry, ...] = (
    CatalogEntry(
        "SMOOTH_QUAD", SMOOTH_QUAD, ("smooth", "2d", "parts"),
        reductions=("classical Ito",), description="x1^2 + x2^2 + t",
    ),
    CatalogEntry(
        "CROSS", CROSS, ("smooth", "2d"),
        reductions=("classical Ito", "cross-variation"), description="x1 x2",
    ),
    CatalogEntry(
        "SMOOTH_1D", SMOOTH_1D, ("smooth", "1d", "curve-1d"),
        reductions=("classical Ito",), curve=ZERO_CURVE, description="x2^2 + t",
    ),
    CatalogEntry(
        "TANAKA2", TANAKA2, ("2d", "1d", "curve-1d", "corollary"),
        reductions=("Tanaka",), curve=ZERO_CURVE, description="(x2)^+",
    ),
    CatalogEntry(
        "ABS2", ABS2, ("2d", "1d", "curve-1d", "corollary"),
        reductions=("Tanaka",), curve=ZERO_CURVE, description="|x2|",
    ),
    CatalogEntry(
        "ABS_CURVE", ABS_CURVE, ("corollary",),
        curve=SINE_CURVE, decay_min=1.1, description="|x2 - sin x1|",
    ),
    CatalogEntry(
        "RAMP_CURVE", RAMP_CURVE, ("corollary",),
        curve=SINE_CURVE, decay_min=1.1, description="(x2 - sin x1)^+",
    ),
    CatalogEntry(
        "MOVING_KINK", MOVING_KINK, ("2d", "1d", "curve-1d"),
        curve=DIAGONAL, decay_min=1.1, description="(x2 - t)^+",
    ),
    CatalogEntry(
        "SPLIT_QUAD_RAMP", SPLIT_QUAD_RAMP, ("split", "2d"),
        description="x2^2 + (x2)^+ split as C1 + BV",
    ),
)


def catalog() -> list[CatalogEntry]:
    """All catalog entries."""
    return list(_CATALOG)


def get_entry(entry_id: str) -> CatalogEntry:
    for entry in _CATALOG:
        if entry.id == entry_id:
            return entry
    raise ConfigurationError(
        f"unknown catalog function '{entry_id}'; known: {', '.join(e.id for e in _CATALOG)}"
    )
