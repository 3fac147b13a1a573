"""
CPU-specific ensemble implementation for slsito.

This module provides a concrete implementation of the ensemble engine for CPU.
"""

from multiprocessing import cpu_count
import ray
from threadpoolctl import threadpool_limits
import os
import memray
import time
import psutil
import logging
from typing import Optional

from ..core.config import ExperimentConfig
from ..core.ensemble import EnsembleEngine
from ..core.experiments import Experiment, evaluate_path, get_experiment
from ..core import utils
from .. import logutils

logger = logging.getLogger(__name__)


# Define a standalone function for Ray to use with remote
@ray.remote
def _evaluate_path_chunk_remote(
    experiment_kind: str,
    cfg: ExperimentConfig,
    level: int,
    path_idx: slice,
    n_threads: int = 1,
    trace_mem: bool = False,
):
    """Ray-compatible remote version of _evaluate_path_chunk."""
    engine = CPUEnsembleEngine()  # pragma: no cover
    return engine._evaluate_path_chunk(  # pragma: no cover
        experiment_kind=experiment_kind,
        cfg=cfg,
        level=level,
        path_idx=path_idx,
        n_threads=n_threads,
        trace_mem=trace_mem,
    )


class CPUEnsembleEngine(EnsembleEngine):
    """CPU implementation of the ensemble engine."""

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
    ) -> list:
        """
        Evaluate an experiment over the ensemble on the CPU.

        See base class for parameter descriptions.
        """
        nprocesses, path_chunks, npc = utils.get_task_chunks(nprocesses, npaths)
        use_ray = nprocesses > 1 or force_use_ray

        if use_ray:  # pragma: no cover
            if not ray.is_initialized():
                if trace_mem:
                    # Record which lines of code assign to shared memory, for debugging.
                    os.environ["RAY_record_ref_creation_sites"] = "1"
                try:
                    ray.init(num_cpus=nprocesses, include_dashboard=False)
                except ValueError:
                    # If there is a ray cluster already running, just connect to it.
                    ray.init()
            # Only the config is shared; workers rebuild the level context from it.
            cfg = ray.put(cfg)

        ncpus = nthreads or cpu_count()
        nthreads_per_proc = [
            max(1, ncpus // nprocesses + (i < ncpus % nprocesses)) for i in range(nprocesses)
        ]
        logger.info(
            f"Splitting {npaths} paths at level {level} into {nprocesses} processes with "
            f"{nthreads_per_proc[0]} threads per-process. Each process will evaluate up to "
            f"{npc} paths."
        )

        if use_ray:  # pragma: no cover
            fnc = _evaluate_path_chunk_remote.remote
        else:
            fnc = self._evaluate_path_chunk

        futures = []
        init_time = time.time()
        for nthi, pc in zip(nthreads_per_proc, path_chunks):
            futures.append(
                fnc(
                    experiment_kind=experiment.kind,
                    cfg=cfg,
                    level=level,
                    path_idx=pc,
                    n_threads=nthi,
                    trace_mem=use_ray and trace_mem,
                )
            )

        if use_ray:  # pragma: no cover
            futures = ray.get(futures)

        logger.info(f"Main loop evaluation time: {time.time() - init_time:.2f} s")

        # Chunks are contiguous and in order, so rows come back in path order.
        rows = []
        for chunk in futures:
            rows.extend(chunk)
        return rows

    def _evaluate_path_chunk(
        self,
        experiment_kind: str,
        cfg: ExperimentConfig,
        level: int,
        path_idx: slice,
        n_threads: int = 1,
        trace_mem: bool = False,
    ) -> list:
        """
        Evaluate a chunk of paths on the CPU.

        See base class for parameter descriptions.
        """
        pid = os.getpid()
        pr = psutil.Process(pid)

        if trace_mem:
            memray.Tracker(f"memray-{time.time()}_{pid}.bin").__enter__()

        experiment = get_experiment(experiment_kind)
        ctx = experiment.setup(cfg, level)
        ids = range(path_idx.start, path_idx.stop)
        npaths = len(ids)
        report_chunk = max(1, npaths // 10)

        rows = []
        start_time = time.time()
        prev_time = start_time
        last_mem = logutils.memory_usage(pr)
        with threadpool_limits(limits=n_threads, user_api="blas"):
            for k, path_id in enumerate(ids, start=1):
                rows.append(evaluate_path(experiment, cfg, ctx, path_id))
                if k % report_chunk == 0 or k == npaths:
                    prev_time, last_mem = logutils.log_progress(
                        start_time, prev_time, k, npaths, pr, last_mem
                    )
        return rows
