import logging
from pathlib import Path
from typing import Literal

from . import __version__
from .core.config import ExperimentConfig, write_manifest
from .core.ensemble import (
    ConvergenceRow,
    EnsembleEngine,
    EnsembleSummary,
    convergence_table,
    convergence_to_csv,
    summarize_level,
)
from .core.experiments import get_experiment
from .core.utils import RNG_ALGORITHM
from .cpu.cpu_ensemble import CPUEnsembleEngine

logger = logging.getLogger(__name__)


def create_ensemble_engine(backend: Literal["cpu", "gpu"] = "cpu", **kwargs) -> EnsembleEngine:
    """Create an ensemble engine for the specified backend.

    Parameters
    ----------
    backend
        The backend to use for the ensemble.
        Currently supported: "cpu".
        "gpu" is defined but not yet implemented.
    **kwargs
        Additional keyword arguments to pass to the engine constructor.

    Returns
    -------
    EnsembleEngine
        An ensemble engine instance for the specified backend.

    Raises
    ------
    ValueError
        If the specified backend is not supported.
    """
    if backend == "cpu":
        return CPUEnsembleEngine(**kwargs)
    elif backend == "gpu":
        raise NotImplementedError("GPU backend not yet implemented")
    else:
        raise ValueError(f"Unsupported backend: {backend}")


def _output_dir(cfg: ExperimentConfig):
    if cfg.out is None:
        return None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _flush(summary: EnsembleSummary, cfg: ExperimentConfig, out) -> None:
    if out is None:
        return
    summary.to_csv(out / "summary.csv")
    summary.checks_to_csv(out / "checks.csv")
    write_manifest(
        cfg,
        out / "manifest.txt",
        extra={
            "slsito_version": __version__,
            "rng": RNG_ALGORITHM,
            "seed_split": "SeedSequence(seed, spawn_key=(path_id,))",
            "levels_completed": ",".join(str(lv.level) for lv in summary.levels),
        },
    )


def run_experiment(cfg: ExperimentConfig) -> EnsembleSummary:
    """Run the configured experiment at every refinement level.

    The same config and seed give byte-identical CSV files. A convergence
    study runs its target experiment and also writes ``convergence.csv``.

    Parameters
    ----------
    cfg : ExperimentConfig
        The resolved configuration. When ``cfg.out`` is set, ``summary.csv``,
        ``checks.csv``, per-level reports and ``manifest.txt`` are written there.

    Returns
    -------
    EnsembleSummary

    Raises
    ------
    ConfigurationError
        For an unknown experiment kind or catalog function.
    MemoryError
        Re-raised after the completed levels have been written.
    """
    kind = cfg.effective_kind
    experiment = get_experiment(kind)
    engine = create_ensemble_engine(backend=cfg.backend)
    out = _output_dir(cfg)
    schedule = experiment.schedule(cfg)
    npaths = cfg.n_paths

    summary = EnsembleSummary(
        kind=kind,
        function=cfg.function,
        decay_min=experiment.decay_min(cfg),
        check_decay=experiment.check_decay and len(schedule) > 1,
        refinements=tuple(experiment.refinements(cfg)) if len(schedule) > 1 else (),
    )
    logger.info(f"Running {kind} for {cfg.function} over levels {schedule} with {npaths} paths")
    try:
        for k, level in enumerate(schedule):
            # validates the level before any work is distributed
            ctx = experiment.setup(cfg, level)
            rows = engine.run(
                experiment,
                cfg,
                level,
                npaths,
                nprocesses=cfg.nprocesses,
                force_use_ray=cfg.force_use_ray,
                trace_mem=cfg.trace_mem,
            )
            level_summary, ids, data = summarize_level(
                experiment, cfg, ctx, level, rows, finest=k == len(schedule) - 1
            )
            summary.levels.append(level_summary)
            if out is not None:
                experiment.write_level(out, level, ids, data)
            logger.info(
                f"Level {level}: median |residual| {level_summary.median_abs_residual:.4g}, "
                f"{'passed' if level_summary.passed else 'FAILED'}"
            )
    except MemoryError:
        logger.error(f"Out of memory after {len(summary.levels)} levels; writing partial results")
        _flush(summary, cfg, out)
        raise

    _flush(summary, cfg, out)
    if cfg.kind == "convergence" and out is not None:
        convergence_to_csv(convergence_table(summary), out / "convergence.csv")
    if not summary.decay_ok:
        logger.warning(f"Refinement decay {summary.decay} below {summary.decay_min}")
    for name, factors in summary.refinement_factors().items():
        logger.info(f"Refinement {name}: {factors}")
    if not summary.refinements_ok:
        logger.warning("Tracked columns did not shrink across the schedule")
    return summary


def convergence_study(cfg: ExperimentConfig) -> list[ConvergenceRow]:
    """Run the target experiment at each level and tabulate the residual decay.

    The decay factor of level k is median(level k) / median(level k+1);
    factors that are not applicable (both medians zero, or the finest level)
    are NaN.
    """
    if cfg.kind != "convergence":
        cfg = cfg.replace(kind="convergence", target=cfg.kind)
    return convergence_table(run_experiment(cfg))
