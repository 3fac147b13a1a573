import logging
import time
from pathlib import Path
from typing import Annotated, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.rule import Rule
from rich.table import Table

from .core.config import FORMULA_KINDS, ExperimentConfig, parse_levels
from .core.ensemble import EnsembleSummary, convergence_table
from .core.exceptions import ConfigurationError
from .core.funcatalog import catalog as catalog_entries
from .wrapper import run_experiment

cns = Console()

logger = logging.getLogger("slsito")

app = typer.Typer(help="Monte Carlo checks of generalized Ito formulas.")

ConfigOpt = Annotated[Optional[Path], typer.Option("--config", help="key = value config file.")]
SeedOpt = Annotated[Optional[int], typer.Option(help="Ensemble seed.")]
PathsOpt = Annotated[Optional[int], typer.Option(help="Ensemble size.")]
StepsOpt = Annotated[Optional[int], typer.Option(help="Single refinement level (time steps).")]
LevelsOpt = Annotated[Optional[str], typer.Option(help="Comma separated refinement levels.")]
FunctionOpt = Annotated[Optional[str], typer.Option(help="Catalog function id.")]
OutOpt = Annotated[Optional[Path], typer.Option(help="Output directory for CSV reports.")]
LogLevelOpt = Annotated[str, typer.Option(help="Logging level.")]
NprocOpt = Annotated[Optional[int], typer.Option(help="Number of worker processes.")]
RayOpt = Annotated[bool, typer.Option("--force-use-ray", help="Use ray for one process too.")]
TraceOpt = Annotated[bool, typer.Option("--trace-mem", help="Trace worker memory with memray.")]


def _setup_logging(log_level: str) -> None:
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=cns, show_path=False))
    logger.setLevel(log_level.upper())


def _build_config(config: Optional[Path], **overrides) -> ExperimentConfig:
    levels = overrides.pop("levels")
    if levels is not None:
        try:
            overrides["levels"] = parse_levels(levels)
        except ValueError:
            raise ConfigurationError(f"bad value for --levels: '{levels}'") from None
    if overrides.get("out") is not None:
        overrides["out"] = str(overrides["out"])
    # unset flags leave the config file value alone
    for flag in ("force_use_ray", "trace_mem"):
        if not overrides.get(flag):
            overrides[flag] = None
    if config is not None:
        return ExperimentConfig.from_file(config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _print_header(cfg: ExperimentConfig) -> None:
    cns.print(Rule(f"Running slsito {cfg.kind}"))
    if cfg.kind == "convergence":
        cns.print(f"  TARGET:     {cfg.target:>12}")
    cns.print(f"  KIND:       {cfg.effective_kind:>12}")
    cns.print(f"  FUNCTION:   {cfg.function:>12}")
    cns.print(f"  SEED:       {cfg.seed:>12}")
    cns.print(f"  NPATHS:     {cfg.n_paths:>12}")
    cns.print(f"  LEVELS:     {','.join(str(n) for n in cfg.levels):>12}")
    cns.print(f"  EPS RULE:   {cfg.eps_rule:>12}")
    cns.print(f"  HORIZON:    {cfg.horizon:>12}")
    cns.print(f"  NPROCESSES: {cfg.nprocesses:>12}")
    cns.print(f"  BACKEND:    {cfg.backend:>12}")
    if cfg.out is not None:
        cns.print(f"  OUT:        {cfg.out:>12}")
    cns.print(Rule())


def _print_summary(summary: EnsembleSummary, show_convergence: bool) -> None:
    table = Table(title=f"{summary.kind} / {summary.function}")
    for col in ("level", "paths", "excluded", "median |residual|", "checks"):
        table.add_column(col, justify="right")
    for lv in summary.levels:
        table.add_row(
            str(lv.level),
            str(lv.n_paths),
            str(lv.n_excluded),
            f"{lv.median_abs_residual:.4g}",
            "[green]pass[/green]" if lv.passed else "[red]FAIL[/red]",
        )
    cns.print(table)

    for lv in summary.levels:
        for c in lv.checks:
            if not c.passed:
                cns.print(f"  [red]{lv.level}: {c.name} = {c.value:.4g} (threshold {c.threshold:.4g})[/red]")

    if show_convergence:
        conv = Table(title="refinement decay")
        for col in ("level", "median residual", "decay"):
            conv.add_column(col, justify="right")
        for row in convergence_table(summary):
            conv.add_row(
                str(row.level), f"{row.median_residual:.4g}", f"{row.decay:.3f}" if row.applicable else "n/a"
            )
        cns.print(conv)
        if summary.check_decay:
            cns.print(f"  DECAY MIN:  {summary.decay_min:>12}")

    factors = summary.refinement_factors()
    for r in summary.refinements:
        for lv, d in zip(summary.levels, factors[r.name]):
            if not r.ok(d):
                cns.print(f"  [red]{lv.level}: {r.name} = {d:.4g} (threshold {r.factor:.4g})[/red]")


def _run(kind: str, config: Optional[Path], log_level: str, **overrides) -> None:
    _setup_logging(log_level)
    try:
        cfg = _build_config(config, **overrides)
        cfg = cfg.replace(kind=kind) if cfg.kind != kind else cfg
    except ConfigurationError as exc:
        cns.print(f"[red]Configuration error:[/red] {exc}")
        raise typer.Exit(2) from None

    _print_header(cfg)
    init_time = time.time()
    try:
        summary = run_experiment(cfg)
    except ConfigurationError as exc:
        cns.print(f"[red]Configuration error:[/red] {exc}")
        raise typer.Exit(2) from None

    _print_summary(summary, show_convergence=cfg.kind == "convergence" or len(summary.levels) > 1)
    cns.print(Rule())
    cns.print(f"TOTAL TIME: {time.time() - init_time:.2f} s")
    if not summary.passed:
        cns.print("[red]FAILED[/red]")
        raise typer.Exit(1)
    cns.print("[green]PASSED[/green]")


@app.command()
def simulate(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    levels: LevelsOpt = None,
    function: FunctionOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = "INFO",
    nprocesses: NprocOpt = None,
    force_use_ray: RayOpt = False,
    trace_mem: TraceOpt = False,
):
    """Simulate the diffusion and check terminal moments and realized variations."""
    _run(
        "simulate", config, log_level, seed=seed, paths=paths, steps=steps, levels=levels,
        function=function, out=out, nprocesses=nprocesses, force_use_ray=force_use_ray, trace_mem=trace_mem,
    )


@app.command()
def localtime(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    levels: LevelsOpt = None,
    function: FunctionOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = "INFO",
    nprocesses: NprocOpt = None,
    force_use_ray: RayOpt = False,
    trace_mem: TraceOpt = False,
):
    """Compare the occupation and Tanaka local-time estimators."""
    _run(
        "localtime", config, log_level, seed=seed, paths=paths, steps=steps, levels=levels,
        function=function, out=out, nprocesses=nprocesses, force_use_ray=force_use_ray, trace_mem=trace_mem,
    )


@app.command()
def isometry(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    levels: LevelsOpt = None,
    function: FunctionOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = "INFO",
    nprocesses: NprocOpt = None,
    force_use_ray: RayOpt = False,
    trace_mem: TraceOpt = False,
):
    """Check the isometry and martingale property of the two-parameter integral."""
    _run(
        "isometry", config, log_level, seed=seed, paths=paths, steps=steps, levels=levels,
        function=function, out=out, nprocesses=nprocesses, force_use_ray=force_use_ray, trace_mem=trace_mem,
    )


@app.command()
def parts(
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    levels: LevelsOpt = None,
    function: FunctionOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = "INFO",
    nprocesses: NprocOpt = None,
    force_use_ray: RayOpt = False,
    trace_mem: TraceOpt = False,
):
    """Integration by parts for the two-parameter integral, refined in levels."""
    _run(
        "parts", config, log_level, seed=seed, paths=paths, steps=steps, levels=levels,
        function=function, out=out, nprocesses=nprocesses, force_use_ray=force_use_ray, trace_mem=trace_mem,
    )


@app.command()
def ito(
    formula: Annotated[str, typer.Option(help=f"One of: {', '.join(FORMULA_KINDS)}.")] = "2d",
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    levels: LevelsOpt = None,
    function: FunctionOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = "INFO",
    nprocesses: NprocOpt = None,
    force_use_ray: RayOpt = False,
    trace_mem: TraceOpt = False,
):
    """Evaluate an Ito-type formula for a catalog function and report every term."""
    if formula not in FORMULA_KINDS:
        cns.print(f"[red]Unknown formula '{formula}'[/red]; known: {', '.join(FORMULA_KINDS)}")
        raise typer.Exit(2)
    _run(
        FORMULA_KINDS[formula], config, log_level, seed=seed, paths=paths, steps=steps, levels=levels,
        function=function, out=out, nprocesses=nprocesses, force_use_ray=force_use_ray, trace_mem=trace_mem,
    )


@app.command()
def convergence(
    target: Annotated[Optional[str], typer.Option(help="Experiment kind to refine.")] = None,
    config: ConfigOpt = None,
    seed: SeedOpt = None,
    paths: PathsOpt = None,
    steps: StepsOpt = None,
    levels: LevelsOpt = None,
    function: FunctionOpt = None,
    out: OutOpt = None,
    log_level: LogLevelOpt = "INFO",
    nprocesses: NprocOpt = None,
    force_use_ray: RayOpt = False,
    trace_mem: TraceOpt = False,
):
    """Run a target experiment over the refinement levels and tabulate the decay."""
    _run(
        "convergence", config, log_level, target=target, seed=seed, paths=paths, steps=steps,
        levels=levels, function=function, out=out, nprocesses=nprocesses, force_use_ray=force_use_ray,
        trace_mem=trace_mem,
    )


@app.command()
def catalog():
    """List the catalog functions and the formulas they exercise."""
    table = Table(title="slsito function catalog")
    for col in ("id", "f", "formulas", "reductions", "curve", "decay min", "callbacks"):
        table.add_column(col)
    for entry in catalog_entries():
        f = entry.test_function
        have = [name for name in ("dt", "d1", "d2", "d12", "d11", "d22", "d1_jump", "d2_jump") if getattr(f, name) is not None]
        table.add_row(
            entry.id,
            entry.description,
            ", ".join(entry.formulas),
            ", ".join(entry.reductions) or "-",
            entry.curve.name if entry.curve is not None else "-",
            f"{entry.decay_min:g}",
            " ".join(have),
        )
    cns.print(table)


if __name__ == "__main__":
    app()
