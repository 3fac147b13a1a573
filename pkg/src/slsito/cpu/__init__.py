"""Compiled kernels and the process-pool ensemble engine.

The engine lives in :mod:`slsito.cpu.cpu_ensemble`; it is imported from there
so that core modules can use the kernels without pulling in ray.
"""

from . import kernels
