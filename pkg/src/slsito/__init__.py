"""Monte Carlo verification of generalized Ito formulas for two-dimensional semimartingales."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("slsito")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "unknown"

# Import path simulation and local times
from .core.simulate import DiffusionSpec, SamplePath2D, make_time_grid, simulate_diffusion
from .core.localtime import LevelGrid, LocalTimeSurface, local_time_occupation, local_time_tanaka

# Import the two-parameter integral and the formulas
from .core.slsintegral import MartingaleField, SimpleField, sls_integral, isometry_check
from .core.functions import Curve, SplitFunction, TestFunction
from .core.itoformula import ItoReport, ito2d_residual, ito_smooth_residual
from .core.funcatalog import catalog, get_entry

# Import ensemble functionality
from .core.config import ExperimentConfig
from .core.ensemble import EnsembleEngine, EnsembleSummary
from .cpu.cpu_ensemble import CPUEnsembleEngine
from .wrapper import convergence_study, create_ensemble_engine, run_experiment

# Import utility modules
from . import utils, logutils

__all__ = [
    # Paths and local times
    "DiffusionSpec",
    "SamplePath2D",
    "make_time_grid",
    "simulate_diffusion",
    "LevelGrid",
    "LocalTimeSurface",
    "local_time_occupation",
    "local_time_tanaka",
    # Integrals and formulas
    "MartingaleField",
    "SimpleField",
    "sls_integral",
    "isometry_check",
    "Curve",
    "SplitFunction",
    "TestFunction",
    "ItoReport",
    "ito2d_residual",
    "ito_smooth_residual",
    "catalog",
    "get_entry",
    # Ensembles
    "ExperimentConfig",
    "EnsembleEngine",
    "EnsembleSummary",
    "CPUEnsembleEngine",
    "create_ensemble_engine",
    "run_experiment",
    "convergence_study",
]
