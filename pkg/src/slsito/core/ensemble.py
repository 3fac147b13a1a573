"""
Core ensemble functionality for slsito.

This module defines the base class for ensemble engines, which evaluate an
experiment over many independent paths, and the summaries that reduce the
per-path rows of each refinement level.
"""

from __future__ import annotations

import csv
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .config import ExperimentConfig
from .experiments import Check, Experiment
from .utils import decay_factors, ensemble_stats

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("level", "quantity", "n", "mean", "se", "median", "mad")
CHECK_COLUMNS = ("level", "check", "value", "threshold", "passed")
CONVERGENCE_COLUMNS = ("level", "median_residual", "decay")


class EnsembleEngine(ABC):
    """Base class for ensemble engines."""

    @abstractmethod
    def run(
        self,
        experiment: Experiment,
        cfg: ExperimentConfig,
        level: int,
        npaths: int,
        nprocesses: int = 1,
        nthreads: Optional[int] = None,
        force_use_ray: bool = False,
        trace_mem: bool = False,
    ) -> list[Optional[np.ndarray]]:
        """
        Evaluate ``experiment`` on paths 0 .. npaths - 1 of one refinement level.

        Parameters
        ----------
        experiment : Experiment
            The experiment whose per-path evaluator is run.
        cfg : ExperimentConfig
            The run configuration; it is the only state shared with workers.
        level : int
            The refinement value (time steps, or level count for ``parts``).
        npaths : int
            Ensemble size.
        nprocesses : int
            Number of worker processes. Paths are split into contiguous chunks.
        nthreads : int, optional
            Total BLAS threads, split across processes. Defaults to the CPU count.
        force_use_ray : bool
            Use ray even for a single process.
        trace_mem : bool
            Record memory allocations of each chunk with memray.

        Returns
        -------
        list
            One row per path in path order; ``None`` for excluded paths.
        """
        pass

    @abstractmethod
    def _evaluate_path_chunk(
        self,
        experiment_kind: str,
        cfg: ExperimentConfig,
        level: int,
        path_idx: slice,
        n_threads: int = 1,
        trace_mem: bool = False,
    ) -> list[Optional[np.ndarray]]:
        """Evaluate one contiguous chunk of path ids."""
        pass


@dataclass(frozen=True)
class LevelSummary:
    """Ensemble statistics of one refinement level."""

    level: int
    n_paths: int
    n_excluded: int
    stats: dict
    median_abs_residual: float
    checks: tuple = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class EnsembleSummary:
    """Per-level statistics, refinement decay and the overall verdict."""

    kind: str
    function: str
    levels: list = field(default_factory=list)
    decay_min: float = 1.3
    check_decay: bool = True
    refinements: tuple = ()

    @property
    def medians(self) -> list[float]:
        return [lv.median_abs_residual for lv in self.levels]

    @property
    def decay(self) -> list[float]:
        return decay_factors(self.medians)

    @property
    def decay_ok(self) -> bool:
        """Every applicable decay factor reaches ``decay_min``."""
        if not self.check_decay:
            return True
        return all(np.isnan(d) or d >= self.decay_min for d in self.decay)

    def refinement_factors(self) -> dict[str, list[float]]:
        """Level-to-level decay of every tracked column, keyed by check name."""
        return {r.name: r.factors([r.size(lv.stats) for lv in self.levels]) for r in self.refinements}

    @property
    def refinements_ok(self) -> bool:
        factors = self.refinement_factors()
        return all(r.ok(d) for r in self.refinements for d in factors[r.name])

    @property
    def passed(self) -> bool:
        return bool(self.levels) and all(lv.passed for lv in self.levels) and self.decay_ok and self.refinements_ok

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(SUMMARY_COLUMNS)
            for lv in self.levels:
                for name, st in lv.stats.items():
                    writer.writerow(
                        [lv.level, name, st["n"]] + [repr(float(st[k])) for k in ("mean", "se", "median", "mad")]
                    )

    def checks_to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fl:
            writer = csv.writer(fl)
            writer.writerow(CHECK_COLUMNS)
            for lv in self.levels:
                for c in lv.checks:
                    writer.writerow([lv.level, c.name, repr(float(c.value)), repr(float(c.threshold)), int(c.passed)])
            if self.check_decay:
                for lv, d in zip(self.levels, self.decay):
                    ok = bool(np.isnan(d) or d >= self.decay_min)
                    writer.writerow([lv.level, "decay", repr(float(d)), repr(float(self.decay_min)), int(ok)])
            factors = self.refinement_factors()
            for r in self.refinements:
                for lv, d in zip(self.levels, factors[r.name]):
                    writer.writerow([lv.level, r.name, repr(float(d)), repr(float(r.factor)), int(r.ok(d))])


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    median_residual: float
    decay: float

    @property
    def applicable(self) -> bool:
        return not np.isnan(self.decay)


def convergence_table(summary: EnsembleSummary) -> list[ConvergenceRow]:
    """(level, median |residual|, decay to the next level); the finest level has no decay."""
    decay = summary.decay + [np.nan]
    return [ConvergenceRow(lv.level, lv.median_abs_residual, d) for lv, d in zip(summary.levels, decay)]


def convergence_to_csv(rows: Sequence[ConvergenceRow], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fl:
        writer = csv.writer(fl)
        writer.writerow(CONVERGENCE_COLUMNS)
        for row in rows:
            writer.writerow([row.level, repr(float(row.median_residual)), repr(float(row.decay))])


def summarize_level(
    experiment: Experiment,
    cfg: ExperimentConfig,
    ctx: dict,
    level: int,
    rows: Sequence[Optional[np.ndarray]],
    finest: bool,
) -> tuple[LevelSummary, np.ndarray, np.ndarray]:
    """Reduce the rows of one level.

    Returns the summary, the ids of the kept paths and their rows. More than
    ``cfg.max_exclusion`` excluded paths fails the level.
    """
    kept = [(pid, r) for pid, r in enumerate(rows) if r is not None]
    n_excluded = len(rows) - len(kept)
    ids = np.array([pid for pid, _ in kept], dtype=int)
    data = np.array([r for _, r in kept], dtype=float).reshape(len(kept), len(experiment.columns))

    level_stats = {name: ensemble_stats(data[:, k]) for k, name in enumerate(experiment.columns)}
    if experiment.residual is not None and len(kept):
        col = experiment.columns.index(experiment.residual)
        median_abs = float(np.median(np.abs(data[:, col])))
        level_stats["abs_residual"] = ensemble_stats(np.abs(data[:, col]))
    else:
        median_abs = float("nan")
    for r in experiment.refinements(cfg):
        col = data[:, experiment.columns.index(r.column)]
        level_stats[f"abs_{r.column}"] = ensemble_stats(np.abs(col))
        level_stats[f"sq_{r.column}"] = ensemble_stats(col**2)

    frac = n_excluded / max(len(rows), 1)
    checks = [Check("excluded_fraction", frac, cfg.max_exclusion, frac <= cfg.max_exclusion)]
    if frac > cfg.max_exclusion:
        logger.error(f"Level {level}: {n_excluded} of {len(rows)} paths excluded, above {cfg.max_exclusion:.1%}")
    elif n_excluded:
        logger.warning(f"Level {level}: {n_excluded} of {len(rows)} paths excluded")
    if len(kept) >= 2:
        checks.extend(experiment.checks(cfg, ctx, level_stats, data, finest))
    else:
        checks.append(Check("ensemble_size", len(kept), 2, False))

    for c in checks:
        if not c.passed:
            logger.warning(f"Level {level}: check {c.name} failed (value={c.value}, threshold={c.threshold})")
    summary = LevelSummary(
        level=level,
        n_paths=len(kept),
        n_excluded=n_excluded,
        stats=level_stats,
        median_abs_residual=median_abs,
        checks=tuple(checks),
    )
    return summary, ids, data
