"""
Experiment configuration.

Config files are flat ``key = value`` text; ``#`` starts a comment, blank
lines are ignored and list values are comma separated. Command-line flags
override file values.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

from .exceptions import ConfigurationError
from .localtime import default_eps
from .simulate import DiffusionSpec, TimeGrid

logger = logging.getLogger(__name__)

KINDS = (
    "simulate",
    "localtime",
    "isometry",
    "parts",
    "ito-smooth",
    "ito-2d",
    "ito-split",
    "corollary",
    "ito-1d",
    "curve-1d",
    "ito-parts",
    "convergence",
)
SCALAR_KINDS = ("simulate", "localtime", "isometry")

# value of ``ito --formula`` -> experiment kind
FORMULA_KINDS = {
    "smooth": "ito-smooth",
    "2d": "ito-2d",
    "split": "ito-split",
    "corollary": "corollary",
    "1d": "ito-1d",
    "curve-1d": "curve-1d",
    "parts": "ito-parts",
}

DEFAULT_LEVELS = (1000, 10000, 100000)
DEFAULT_DECAY_MIN = 1.3


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run; identical configs give identical outputs.

    ``paths`` and ``decay_min`` left at ``None`` resolve to the defaults for
    the experiment kind (and catalog entry). ``steps`` is a single-level
    shortcut that replaces ``levels``.
    """

    kind: str = "ito-2d"
    function: str = "SMOOTH_QUAD"
    seed: int = 0
    paths: Optional[int] = None
    steps: Optional[int] = None
    levels: Tuple[int, ...] = DEFAULT_LEVELS
    horizon: float = 1.0
    x1: float = 0.0
    x2: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.0
    eps_rule: str = "sqrt"
    level_counts: Tuple[int, ...] = (16, 32, 64)
    z_max: float = 3.0
    decay_min: Optional[float] = None
    max_exclusion: float = 0.01
    nprocesses: int = 1
    force_use_ray: bool = False
    backend: str = "cpu"
    target: str = "ito-2d"
    out: Optional[str] = None
    trace_mem: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind '{self.kind}'; known: {', '.join(KINDS)}")
        if self.target not in KINDS or self.target == "convergence":
            raise ConfigurationError(f"convergence target must be an experiment kind, got '{self.target}'")
        if self.steps is not None:
            object.__setattr__(self, "levels", (int(self.steps),))
        levels = tuple(int(n) for n in self.levels)
        if not levels or any(n < 1 for n in levels) or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError(f"refinement levels must be strictly increasing positive counts, got {levels}")
        object.__setattr__(self, "levels", levels)
        counts = tuple(int(n) for n in self.level_counts)
        if not counts or any(n < 1 for n in counts) or any(b <= a for a, b in zip(counts, counts[1:])):
            raise ConfigurationError(f"level counts must be strictly increasing positive counts, got {counts}")
        object.__setattr__(self, "level_counts", counts)
        if self.paths is not None and self.paths < 2:
            raise ConfigurationError(f"an ensemble needs at least two paths, got {self.paths}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        if self.nprocesses < 1:
            raise ConfigurationError(f"nprocesses must be at least 1, got {self.nprocesses}")
        if not 0 <= self.max_exclusion < 1:
            raise ConfigurationError(f"max_exclusion must lie in [0, 1), got {self.max_exclusion}")
        if self.eps_rule != "sqrt":
            try:
                eps = float(self.eps_rule)
            except ValueError:
                raise ConfigurationError(
                    f"eps_rule must be 'sqrt' or a positive number, got '{self.eps_rule}'"
                ) from None
            if not eps > 0:
                raise ConfigurationError(f"eps_rule must be positive, got {eps}")
        try:
            self.diffusion()
        except ValueError as exc:
            raise ConfigurationError(f"invalid diffusion parameters: {exc}") from exc
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")

    # ---- derived values ----

    @property
    def effective_kind(self) -> str:
        """The experiment actually run (the target for a convergence study)."""
        return self.target if self.kind == "convergence" else self.kind

    @property
    def n_paths(self) -> int:
        if self.paths is not None:
            return int(self.paths)
        return 10_000 if self.effective_kind in SCALAR_KINDS else 1000

    def diffusion(self) -> DiffusionSpec:
        return DiffusionSpec(
            start=(self.x1, self.x2),
            drift=(self.mu1, self.mu2),
            vol=(self.sigma1, self.sigma2),
            rho=self.rho,
            seed=self.seed,
        )

    def eps_for(self, grid: TimeGrid) -> float:
        if self.eps_rule == "sqrt":
            return default_eps(grid)
        return float(self.eps_rule)

    def replace(self, **changes) -> "ExperimentConfig":
        """A copy with ``changes`` applied; ``None`` values are ignored."""
        changes = {k: v for k, v in changes.items() if v is not None}
        unknown = set(changes) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        current = {fld.name: getattr(self, fld.name) for fld in dataclasses.fields(self)}
        if "levels" in changes and "steps" not in changes:
            current["steps"] = None
        current.update(changes)
        return ExperimentConfig(**current)

    # ---- serialization ----

    def to_lines(self) -> list[str]:
        """``key = value`` lines that load back to an equal config."""
        lines = []
        for fld in dataclasses.fields(self):
            if fld.name == "steps":
                continue
            val = getattr(self, fld.name)
            if val is None:
                continue
            if isinstance(val, tuple):
                val = ",".join(str(v) for v in val)
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{fld.name} = {val}")
        return lines

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides) -> "ExperimentConfig":
        values = load_config(path)
        unknown = set(overrides) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        if overrides.get("levels") is not None and overrides.get("steps") is None:
            values.pop("steps", None)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


_FIELD_TYPES = {fld.name: fld.type for fld in dataclasses.fields(ExperimentConfig)}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{text}'")


def parse_levels(text: str) -> Tuple[int, ...]:
    """'1000, 10000' -> (1000, 10000)."""
    return tuple(int(v) for v in text.split(",") if v.strip())


def _coerce(key: str, text: str):
    kind = str(_FIELD_TYPES[key])
    if "Tuple" in kind:
        return parse_levels(text)
    if "bool" in kind:
        return _parse_bool(text)
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def load_config(path: Union[str, Path]) -> dict:
    """Parse a ``key = value`` file into typed values."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, text = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"{path}:{lineno}: unknown configuration key '{key}'")
        try:
            values[key] = _coerce(key, text)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    logger.debug(f"Loaded {len(values)} configuration keys from {path}")
    return values


def resolve_decay_min(cfg: ExperimentConfig, entry_decay_min: Optional[float] = None) -> float:
    if cfg.decay_min is not None:
        return float(cfg.decay_min)
    if entry_decay_min is not None:
        return float(entry_decay_min)
    return DEFAULT_DECAY_MIN


def write_manifest(cfg: ExperimentConfig, path: Union[str, Path], extra: Optional[dict] = None) -> None:
    """The resolved config plus run facts, in the config file format."""
    lines = ["# resolved configuration"] + cfg.to_lines()
    lines.append(f"# n_paths = {cfg.n_paths}")
    for key, val in (extra or {}).items():
        lines.append(f"# {key} = {val}")
    Path(path).write_text("\n".join(lines) + "\n")
