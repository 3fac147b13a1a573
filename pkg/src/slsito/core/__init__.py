"""Core functionality for slsito."""

from .exceptions import ConfigurationError, EvaluationError
from .ensemble import EnsembleEngine, EnsembleSummary
