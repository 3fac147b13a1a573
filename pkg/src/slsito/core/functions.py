"""
Test functions, split functions and curves.

A :class:`TestFunction` carries f(t, x1, x2) together with its one-sided
derivatives as user-supplied callbacks. Every callback is vectorized: it takes
broadcastable arrays ``(t, x1, x2)`` and returns an array of the broadcast
shape (scalars are broadcast automatically).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .exceptions import ConfigurationError
from .utils import ensure_finite

Callback = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Regularity = Literal["smooth", "split", "bv-only"]

_CALLBACKS = ("f", "dt", "d1", "d2", "d12", "d11", "d22", "d1_jump", "d2_jump")


@dataclass(frozen=True)
class TestFunction:
    """A function f(t, x1, x2) with its left derivatives.

    Parameters
    ----------
    name : str
        Identifier used in logs and reports.
    f : callable
        The function itself.
    dt : callable, optional
        Left time derivative. ``None`` means f does not depend on time, in
        which case the time term of every formula is exactly zero.
    d1, d2 : callable, optional
        Left space derivatives in x1 and x2.
    d12 : callable, optional
        The mixed left derivative, x1 applied to the x2 derivative.
    d11, d22 : callable, optional
        Left second derivatives (of the C1 part, for split functions).
    d1_jump, d2_jump : callable, optional
        Jump of the derivative across a kink curve, as a function of
        ``(t, x_other)``: ``d2_jump(t, x1)`` is
        grad_2 f(t, x1, b(x1)+) - grad_2 f(t, x1, b(x1)-), and for one-dimensional
        use with a moving level gamma(t) it is the jump at x2 = gamma(t).
    regularity : {"smooth", "split", "bv-only"}
        Regularity class of f.
    """

    __test__ = False  # not a pytest class

    name: str
    f: Callback
    dt: Optional[Callback] = None
    d1: Optional[Callback] = None
    d2: Optional[Callback] = None
    d12: Optional[Callback] = None
    d11: Optional[Callback] = None
    d22: Optional[Callback] = None
    d1_jump: Optional[Callable] = None
    d2_jump: Optional[Callable] = None
    regularity: Regularity = "smooth"

    @property
    def time_independent(self) -> bool:
        return self.dt is None

    def available(self) -> dict[str, bool]:
        """Which callbacks are present."""
        return {name: getattr(self, name) is not None for name in _CALLBACKS}

    def require(self, *names: str) -> None:
        """Raise ConfigurationError unless every named callback is present."""
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigurationError(
                f"test function '{self.name}' is missing callbacks: {', '.join(missing)}"
            )

    def call(self, name: str, t, x1, x2) -> np.ndarray:
        """Evaluate callback ``name`` with broadcasting and a finiteness check.

        A missing ``dt`` evaluates to zero.
        """
        shape = np.broadcast(t, x1, x2).shape
        fn = getattr(self, name)
        if fn is None:
            if name == "dt":
                return np.zeros(shape)
            raise ConfigurationError(
                f"test function '{self.name}' has no '{name}' callback"
            )
        out = np.broadcast_to(np.asarray(fn(t, x1, x2), dtype=float), shape)
        return ensure_finite(out, f"{self.name}.{name}")

    def grad(self, i: int, t, x1, x2) -> np.ndarray:
        return self.call(f"d{_coord(i)}", t, x1, x2)

    def lap(self, i: int, t, x1, x2) -> np.ndarray:
        i = _coord(i)
        return self.call(f"d{i}{i}", t, x1, x2)

    def jump(self, i: int, t, x_other) -> np.ndarray:
        """Jump of grad_i f across the kink curve, evaluated at ``(t, x_other)``."""
        name = f"d{_coord(i)}_jump"
        fn = getattr(self, name)
        if fn is None:
            raise ConfigurationError(
                f"test function '{self.name}' has no '{name}' callback"
            )
        shape = np.broadcast(t, x_other).shape
        out = np.broadcast_to(np.asarray(fn(t, x_other), dtype=float), shape)
        return ensure_finite(out, f"{self.name}.{name}")


@dataclass(frozen=True)
class SplitFunction:
    """f = f_h + f_v with f_h of class C1 in space and grad f_v of bounded variation."""

    name: str
    f_h: TestFunction
    f_v: TestFunction

    def combined(self) -> TestFunction:
        """The unsplit function, with callbacks summed where both parts have them."""
        kwargs = {}
        for name in ("f", "dt", "d1", "d2", "d12"):
            kwargs[name] = _sum_callbacks(
                getattr(self.f_h, name), getattr(self.f_v, name), zero_if_missing=name == "dt"
            )
        return TestFunction(name=self.name, regularity="split", **kwargs)


@dataclass(frozen=True)
class Curve:
    """A kink curve x2 = b(x1) (or a moving level x = gamma(t) in one dimension).

    ``db`` and ``d2b`` are the first two derivatives; the path transform
    needs both.
    """

    name: str
    b: Callable[[np.ndarray], np.ndarray]
    db: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2b: Optional[Callable[[np.ndarray], np.ndarray]] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def is_c2(self) -> bool:
        return self.db is not None and self.d2b is not None

    def value(self, x) -> np.ndarray:
        return _eval_curve(self.b, x, f"curve {self.name}")

    def slope(self, x) -> np.ndarray:
        if self.db is None:
            raise ConfigurationError(f"curve '{self.name}' has no derivative callback")
        return _eval_curve(self.db, x, f"curve {self.name}'")

    def curvature(self, x) -> np.ndarray:
        if self.d2b is None:
            raise ConfigurationError(f"curve '{self.name}' has no second derivative callback")
        return _eval_curve(self.d2b, x, f"curve {self.name}''")


def _coord(i: int) -> int:
    if i not in (1, 2):
        raise ValueError(f"coordinate must be 1 or 2, got {i}")
    return i


def _eval_curve(fn, x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)
    return ensure_finite(out, what)


def _sum_callbacks(a, b, zero_if_missing: bool = False):
    if zero_if_missing:
        if a is None and b is None:
            return None
        if a is None:
            return b
        if b is None:
            return a
    elif a is None or b is None:
        return None

    def summed(t, x1, x2):
        return np.add(a(t, x1, x2), b(t, x1, x2))

    return summed
