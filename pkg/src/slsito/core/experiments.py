"""
Per-path evaluators for every experiment kind.

An :class:`Experiment` turns one simulated path into a row of named scalars
and, once the ensemble of a refinement level is in, derives the level's
checks from the ensemble statistics. Workers rebuild the per-level context
from the config, so only the config crosses process boundaries.
"""

from __future__ import annotations

import csv
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import itoformula, localtime, slsintegral
from .config import ExperimentConfig, resolve_decay_min
from .exceptions import ConfigurationError, EvaluationError
from .funcatalog import CatalogEntry, get_entry
from .functions import SplitFunction
from .simulate import (
    SamplePath2D,
    make_time_grid,
    realized_cross_variation,
    realized_quadratic_variation,
    simulate_diffusion,
)
from .utils import decay_factors, z_score

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    """A pass/fail criterion evaluated on one refinement level."""

    name: str
    value: float
    threshold: float
    passed: bool


def _abs_check(name: str, value: float, threshold: float) -> Check:
    return Check(name, float(value), float(threshold), bool(abs(value) <= threshold))


@dataclass(frozen=True)
class Refinement:
    """A column whose ensemble size must shrink by ``factor`` from level to level.

    ``stat`` is ``"median"`` (median absolute value) or ``"rms"``. Sizes at or
    below ``floor`` count as zero, so a pair of vanishing levels is not
    applicable.
    """

    column: str
    factor: float
    stat: str = "median"
    floor: float = 0.0

    def __post_init__(self):
        if self.stat not in ("median", "rms"):
            raise ValueError(f"unknown refinement statistic '{self.stat}'")

    @property
    def name(self) -> str:
        return f"decay:{self.stat}_{self.column}"

    def size(self, level_stats: dict) -> float:
        if self.stat == "median":
            st = level_stats.get(f"abs_{self.column}")
            return float(st["median"]) if st else float("nan")
        st = level_stats.get(f"sq_{self.column}")
        return float(np.sqrt(st["mean"])) if st else float("nan")

    def factors(self, sizes: Sequence[float]) -> list[float]:
        s = np.asarray(sizes, dtype=float)
        return decay_factors(np.where(s <= self.floor, 0.0, s))

    def ok(self, factor: float) -> bool:
        return bool(np.isnan(factor) or factor >= self.factor)


class Experiment(ABC):
    """One experiment kind.

    Subclasses define the row ``columns`` and :meth:`evaluate`. ``residual``
    names the column whose median absolute value is tracked under refinement
    (``None`` for experiments without one); :meth:`refinements` adds further
    columns that must shrink across the schedule.
    """

    kind: str = ""
    columns: tuple = ()
    residual: Optional[str] = "residual"
    check_decay: bool = True

    def schedule(self, cfg: ExperimentConfig) -> list[int]:
        """Refinement values, coarse to fine (time steps by default)."""
        return list(cfg.levels)

    def steps_for(self, cfg: ExperimentConfig, level: int) -> int:
        return level

    def setup(self, cfg: ExperimentConfig, level: int) -> dict:
        """Shared, read-only context for all paths of one level."""
        grid = make_time_grid(cfg.horizon, self.steps_for(cfg, level))
        return {"grid": grid, "eps": cfg.eps_for(grid), "level": level}

    def decay_min(self, cfg: ExperimentConfig) -> float:
        return resolve_decay_min(cfg)

    def refinements(self, cfg: ExperimentConfig) -> list[Refinement]:
        return []

    @abstractmethod
    def evaluate(self, path: SamplePath2D, cfg: ExperimentConfig, ctx: dict) -> dict:
        """Named scalars for one path."""

    def checks(self, cfg: ExperimentConfig, ctx: dict, level_stats: dict, rows: np.ndarray, finest: bool) -> list[Check]:
        return []

    def write_level(self, out: Path, level: int, path_ids: Sequence[int], rows: np.ndarray) -> None:
        """Per-path rows of one level as ``paths_N<level>.csv``."""
        with open(out / f"paths_N{level}.csv", "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(("path_id",) + tuple(self.columns))
            for pid, row in zip(path_ids, rows):
                writer.writerow([int(pid)] + [repr(float(v)) for v in row])


def evaluate_path(experiment: Experiment, cfg: ExperimentConfig, ctx: dict, path_id: int) -> Optional[np.ndarray]:
    """Simulate path ``path_id`` and evaluate it; ``None`` marks an excluded path."""
    path = simulate_diffusion(cfg.diffusion().for_path(path_id), ctx["grid"])
    try:
        values = experiment.evaluate(path, cfg, ctx)
        row = np.array([values[c] for c in experiment.columns], dtype=float)
    except EvaluationError as exc:
        logger.warning(f"Path {path_id} excluded: {exc}")
        return None
    if not np.all(np.isfinite(row)):
        logger.warning(f"Path {path_id} excluded: non-finite values")
        return None
    return row


# ---- simulate ----


def variation_rms_bounds(cfg: ExperimentConfig, dt: float) -> dict:
    """Root mean square of the realized-minus-analytic variations for Brownian coordinates.

    A sum of N squared Gaussian increments has variance 2 sigma^4 dt T; the
    cross sum has sigma_1^2 sigma_2^2 (1 + rho^2) dt T.
    """
    T = cfg.horizon
    return {
        "err_qv1": np.sqrt(2.0 * dt * T) * cfg.sigma1**2,
        "err_qv2": np.sqrt(2.0 * dt * T) * cfg.sigma2**2,
        "err_cov": np.sqrt(dt * T * (1.0 + cfg.rho**2)) * cfg.sigma1 * cfg.sigma2,
    }


class SimulateExperiment(Experiment):
    """Terminal values and realized variations against the analytic laws.

    The realized-minus-analytic variations are tracked by their ensemble RMS,
    which must stay under the Brownian bound at every level and shrink under
    refinement.
    """

    kind = "simulate"
    columns = ("x1_T", "x2_T", "qv1", "qv2", "cov", "err_qv1", "err_qv2", "err_cov")
    residual = "err_qv1"

    def evaluate(self, path, cfg, ctx):
        T = path.grid.horizon
        qv1 = realized_quadratic_variation(path, 1).final
        qv2 = realized_quadratic_variation(path, 2).final
        cov = realized_cross_variation(path).final
        return {
            "x1_T": path.x[0, -1],
            "x2_T": path.x[1, -1],
            "qv1": qv1,
            "qv2": qv2,
            "cov": cov,
            "err_qv1": qv1 - cfg.sigma1**2 * T,
            "err_qv2": qv2 - cfg.sigma2**2 * T,
            "err_cov": cov - cfg.rho * cfg.sigma1 * cfg.sigma2 * T,
        }

    def refinements(self, cfg):
        return [Refinement(name, self.decay_min(cfg), stat="rms") for name in ("err_qv1", "err_qv2", "err_cov")]

    def checks(self, cfg, ctx, level_stats, rows, finest):
        T = cfg.horizon
        expected = {
            "x1_T": cfg.x1 + cfg.mu1 * T,
            "x2_T": cfg.x2 + cfg.mu2 * T,
            "qv1": cfg.sigma1**2 * T,
            "qv2": cfg.sigma2**2 * T,
            "cov": cfg.rho * cfg.sigma1 * cfg.sigma2 * T,
        }
        out = [
            _abs_check(f"z:{name}", z_score(level_stats[name]["mean"], level_stats[name]["se"], value, 0.0), cfg.z_max)
            for name, value in expected.items()
        ]
        # sampling error of an RMS over n paths is about 1 / sqrt(2 n) relative
        tol = cfg.z_max / np.sqrt(2.0 * rows.shape[0])
        for name, bound in variation_rms_bounds(cfg, T / ctx["grid"].steps).items():
            rms = float(np.sqrt(np.mean(rows[:, self.columns.index(name)] ** 2)))
            limit = float(bound * (1.0 + tol))
            out.append(Check(f"rms:{name}", rms, limit, rms <= limit))
        return out


# ---- local time ----


def tanaka_oracle(cfg: ExperimentConfig, a: float = 0.0) -> float:
    """E[(X_2(T) - a)^+] - (x_2 - a)^+ for a driftless coordinate 2."""
    sd = cfg.sigma2 * np.sqrt(cfg.horizon)
    d = (cfg.x2 - a) / sd
    expected = (cfg.x2 - a) * stats.norm.cdf(d) + sd * stats.norm.pdf(d)
    return float(expected - max(cfg.x2 - a, 0.0))


class LocalTimeExperiment(Experiment):
    """Both estimators of L_2(T, 0), their largest discrepancy and the occupation identity.

    ``tanaka_violation`` is the largest decrease in time of the Tanaka surface;
    it and ``occupation_rel`` must shrink across the schedule.
    """

    kind = "localtime"
    columns = ("lt_occupation", "lt_tanaka", "discrepancy", "occupation_rel", "tanaka_violation", "residual")

    def evaluate(self, path, cfg, ctx):
        eps = ctx["eps"]
        x = path.x[1]
        grid = localtime.LevelGrid.for_path(path, 2, da=eps)
        cols = grid.active_columns(x, eps)
        lv = grid.sub(cols)
        occ = localtime.iter_local_time_blocks(path, 2, lv, "occupation", eps)
        tan = localtime.iter_local_time_blocks(path, 2, lv, "tanaka")
        disc = 0.0
        violation = 0.0
        for (_, lo), (_, lt) in zip(occ, tan):
            disc = max(disc, float(np.max(np.abs(lo - lt))))
            violation = max(violation, -float(np.min(np.diff(lt, axis=0))))
        final_occ, final_tan = lo[-1], lt[-1]

        at0 = np.flatnonzero(np.isclose(lv.nodes, 0.0, rtol=0, atol=1e-9))
        l_occ = float(final_occ[at0[0]]) if at0.size else 0.0
        l_tan = float(final_tan[at0[0]]) if at0.size else 0.0
        qv = float(np.sum(path.dqv[1]))
        rel = abs(qv - 2.0 * np.sum(final_tan * grid.widths[cols])) / qv
        return {
            "lt_occupation": l_occ,
            "lt_tanaka": l_tan,
            "discrepancy": disc,
            "occupation_rel": rel,
            "tanaka_violation": violation,
            "residual": disc,
        }

    def refinements(self, cfg):
        # violations at rounding level count as none
        return [
            Refinement("tanaka_violation", self.decay_min(cfg), floor=1e-10),
            Refinement("occupation_rel", 1.0),
        ]

    def checks(self, cfg, ctx, level_stats, rows, finest):
        out = []
        if cfg.mu2 == 0.0:
            oracle = tanaka_oracle(cfg)
            for name in ("lt_occupation", "lt_tanaka"):
                st = level_stats[name]
                out.append(_abs_check(f"z:{name}", z_score(st["mean"], st["se"], oracle, 0.0), cfg.z_max))
        if finest:
            out.append(
                Check("median:occupation_rel", level_stats["occupation_rel"]["median"], 0.05,
                      level_stats["occupation_rel"]["median"] < 0.05)
            )
        return out


# ---- two-parameter integral ----


def _identity_profile(a):
    return a


def _square_profile(a):
    return a**2


def _unit_integrand(field):
    return np.ones(field.h.shape)


def _level_integrand(field):
    return np.broadcast_to(1.0 + field.levels**2, field.h.shape)


def _adapted_integrand(field):
    # row j is h(s_j, .), the left end of every cell in [s_j, s_{j+1})
    return np.cos(field.h.values)


# (label, column, integrand of the field, coordinate, level profile);
# I_t(g) against h(s, a) = profile(a) M_i(s)
MARTINGALE_PAIRS = (
    ("unit", "integral", _unit_integrand, 1, _identity_profile),
    ("level", "martingale_level", _level_integrand, 2, _square_profile),
    ("adapted", "martingale_adapted", _adapted_integrand, 1, _identity_profile),
)


class IsometryExperiment(Experiment):
    """g = 1 against h(s, a) = a M_1(s) on a in [0, 1]: E[I^2] = sigma_1^2 T.

    The integral of every pair in :data:`MARTINGALE_PAIRS` must have zero mean.
    """

    kind = "isometry"
    columns = ("integral", "integral_sq", "rhs", "residual", "martingale_level", "martingale_adapted")
    check_decay = False

    def setup(self, cfg, level):
        ctx = super().setup(cfg, level)
        ctx["levels"] = localtime.LevelGrid.uniform(0.0, 1.0, 0.25)
        return ctx

    def evaluate(self, path, cfg, ctx):
        field = slsintegral.separable_field(path, 1, ctx["levels"], _identity_profile)
        integral, quad = slsintegral.isometry_terms(_unit_integrand(field), field)
        out = {"integral": integral, "integral_sq": integral**2, "rhs": quad, "residual": integral**2 - quad}
        for _, name, integrand, i, profile in MARTINGALE_PAIRS[1:]:
            h = slsintegral.separable_field(path, i, ctx["levels"], profile)
            out[name] = slsintegral.sls_integral(integrand(h), h)
        return out

    def report(self, rows: np.ndarray) -> slsintegral.IsometryReport:
        return slsintegral.isometry_report(rows[:, 0], rows[:, 2])

    def checks(self, cfg, ctx, level_stats, rows, finest):
        rep = self.report(rows)
        closed = cfg.sigma1**2 * cfg.horizon
        out = [
            _abs_check("z:isometry", rep.z, cfg.z_max),
            _abs_check("z:closed_form", z_score(rep.lhs, rep.se_lhs, closed, 0.0), cfg.z_max),
        ]
        for label, name, *_ in MARTINGALE_PAIRS:
            st = level_stats[name]
            out.append(_abs_check(f"z:martingale_{label}", z_score(st["mean"], st["se"], 0.0, 0.0), cfg.z_max))
        return out

    def write_level(self, out, level, path_ids, rows):
        super().write_level(out, level, path_ids, rows)
        rep = self.report(rows)
        with open(out / f"isometry_N{level}.csv", "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(slsintegral.ISOMETRY_COLUMNS)
            writer.writerow([rep.n_paths] + [repr(float(v)) for v in rep.as_row()[1:]])


def parts_bump(x):
    """64 (x (1 - x))^3 on [0, 1], zero elsewhere; C2 with compact support."""
    x = np.asarray(x, dtype=float)
    u = np.clip(x * (1.0 - x), 0.0, None)
    return np.where((x > 0) & (x < 1), 64.0 * u**3, 0.0)


def parts_bump_derivative(x):
    x = np.asarray(x, dtype=float)
    u = x * (1.0 - x)
    return np.where((x > 0) & (x < 1), 192.0 * u**2 * (1.0 - 2.0 * x), 0.0)


class PartsExperiment(Experiment):
    """Integration by parts for g(s, x) = bump(x), h(s, x) = x M_1(s), refined in levels.

    The refinement values are the level counts; time uses the coarsest step
    count.
    """

    kind = "parts"
    columns = ("residual",)

    def schedule(self, cfg):
        return list(cfg.level_counts)

    def steps_for(self, cfg, level):
        return cfg.levels[0]

    def setup(self, cfg, level):
        ctx = super().setup(cfg, level)
        ctx["levels"] = localtime.LevelGrid.uniform(0.0, 1.0, 1.0 / level)
        return ctx

    def evaluate(self, path, cfg, ctx):
        field = slsintegral.separable_field(path, 1, ctx["levels"], _identity_profile)
        res = slsintegral.integration_by_parts_check(
            lambda s, x: parts_bump(x), lambda s, x: parts_bump_derivative(x), field
        )
        return {"residual": res}


# ---- Ito formulas ----

_FORMULA_OF_KIND = {
    "ito-smooth": "smooth",
    "ito-2d": "2d",
    "ito-split": "split",
    "corollary": "corollary",
    "ito-1d": "1d",
    "curve-1d": "curve-1d",
    "ito-parts": "parts",
}


class ItoExperiment(Experiment):
    """One Ito-type identity for a catalog function; rows follow the report schema."""

    columns = ("lhs",) + itoformula.TERM_NAMES + ("residual",)

    def __init__(self, kind: str):
        self.kind = kind
        self.formula = _FORMULA_OF_KIND[kind]

    def entry(self, cfg: ExperimentConfig) -> CatalogEntry:
        entry = get_entry(cfg.function)
        if self.formula not in entry.formulas:
            raise ConfigurationError(
                f"catalog function '{entry.id}' does not support formula '{self.formula}' "
                f"(supports: {', '.join(entry.formulas)})"
            )
        if self.formula == "split" and not isinstance(entry.function, SplitFunction):
            raise ConfigurationError(f"catalog function '{entry.id}' is not a split function")
        if self.formula in ("corollary", "curve-1d") and entry.curve is None:
            raise ConfigurationError(f"catalog function '{entry.id}' has no curve")
        return entry

    def setup(self, cfg, level):
        ctx = super().setup(cfg, level)
        ctx["entry"] = self.entry(cfg)
        return ctx

    def decay_min(self, cfg):
        return resolve_decay_min(cfg, self.entry(cfg).decay_min)

    def evaluate(self, path, cfg, ctx):
        entry: CatalogEntry = ctx["entry"]
        eps = ctx["eps"]
        f = entry.test_function
        if self.formula == "smooth":
            rep = itoformula.ito_smooth_residual(f, path)
        elif self.formula == "2d":
            rep = itoformula.ito2d_residual(f, path, eps=eps)
        elif self.formula == "split":
            rep = itoformula.ito2d_split_residual(entry.function, path, eps=eps)
        elif self.formula == "corollary":
            rep = itoformula.curve_corollary_residual(f, entry.curve, path, eps=eps)
        elif self.formula == "1d":
            rep = itoformula.ito1d_residual(entry.function, path, eps=eps)
        elif self.formula == "curve-1d":
            rep = itoformula.curve1d_residual(f, entry.curve, path, eps=eps)
        else:
            rep = itoformula.occupation_parts_residual(f, path, 2, eps=eps)
        return rep.as_dict()

    def write_level(self, out, level, path_ids, rows):
        with open(out / f"report_N{level}.csv", "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(itoformula.ITO_COLUMNS)
            for pid, row in zip(path_ids, rows):
                writer.writerow([int(pid)] + [repr(float(v)) for v in row])


_EXPERIMENTS = {
    "simulate": SimulateExperiment,
    "localtime": LocalTimeExperiment,
    "isometry": IsometryExperiment,
    "parts": PartsExperiment,
}


def get_experiment(kind: str) -> Experiment:
    if kind in _EXPERIMENTS:
        return _EXPERIMENTS[kind]()
    if kind in _FORMULA_OF_KIND:
        return ItoExperiment(kind)
    raise ConfigurationError(f"unknown experiment kind '{kind}'")
