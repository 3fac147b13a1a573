"""Compiled kernels for local-time surfaces and two-parameter Stieltjes sums.

Block kernels fill rows ``start .. start + B`` of a surface, given the state at
row ``start``, so that long paths can be streamed through in pieces.
"""

import numba as nb
import numpy as np


@nb.jit(nopython=True)
def occupation_block(
    x: np.ndarray,
    dqv: np.ndarray,
    levels: np.ndarray,
    eps: float,
    start: int,
    init: np.ndarray,
    out: np.ndarray,
):  # pragma: no cover
    """Occupation-density local time on rows start..start+B.

    ``out`` has shape (B+1, M); row r holds L(t_{start+r}, a_k) and row 0 is
    copied from ``init``. Step m adds d<M>(m) / (2 eps) to every level with
    a_k <= x_m < a_k + eps.
    """
    nrows, nlev = out.shape
    scale = 0.5 / eps

    for k in range(nlev):
        out[0, k] = init[k]

    for r in range(nrows - 1):
        m = start + r
        for k in range(nlev):
            out[r + 1, k] = out[r, k]

        # levels with x - eps < a_k <= x, widened by one node for rounding
        xm = x[m]
        klo = np.searchsorted(levels, xm - eps, side="right") - 1
        khi = np.searchsorted(levels, xm, side="right")
        if klo < 0:
            klo = 0
        if khi > nlev - 1:
            khi = nlev - 1
        for k in range(klo, khi + 1):
            if levels[k] <= xm and xm < levels[k] + eps:
                out[r + 1, k] += dqv[m] * scale


@nb.jit(nopython=True)
def tanaka_block(
    x: np.ndarray,
    dx: np.ndarray,
    levels: np.ndarray,
    start: int,
    state: np.ndarray,
    out: np.ndarray,
):  # pragma: no cover
    """Tanaka-formula local time on rows start..start+B.

    ``state[k]`` enters as sum_{m<start} 1[x_m > a_k] dx_m and leaves as the
    same sum up to start+B.
    """
    nrows, nlev = out.shape
    x0 = x[0]
    for r in range(nrows):
        j = start + r
        xj = x[j]
        for k in range(nlev):
            a = levels[k]
            up = xj - a if xj > a else 0.0
            up0 = x0 - a if x0 > a else 0.0
            out[r, k] = up - up0 - state[k]
        if r < nrows - 1:
            for k in range(nlev):
                if xj > levels[k]:
                    state[k] += dx[j]


@nb.jit(nopython=True)
def weighted_rect_sum(g: np.ndarray, h: np.ndarray) -> float:  # pragma: no cover
    """Sum over cells of g(lower-left corner) times the rectangle increment of h."""
    ns, nx = h.shape
    total = 0.0
    for j in range(ns - 1):
        for i in range(nx - 1):
            total += g[j, i] * (h[j + 1, i + 1] - h[j, i + 1] - h[j + 1, i] + h[j, i])
    return total
