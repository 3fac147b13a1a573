import numpy as np

from .exceptions import EvaluationError

# Philox4x64-10 as shipped by numpy
RNG_ALGORITHM = "philox4x64-10"


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    """Return the random generator for one path of an ensemble.

    Per-path streams are derived by the documented splitting rule
    ``SeedSequence(seed, spawn_key=(path_id,))``, which is what
    ``SeedSequence(seed).spawn(n)[path_id]`` would produce, fed to a Philox
    bit generator. Distinct path ids never share a stream.

    Parameters
    ----------
    seed : int
        Ensemble seed (any non-negative integer up to 64 bits).
    path_id : int
        Index of the path within the ensemble.

    Returns
    -------
    np.random.Generator
    """
    if seed < 0 or path_id < 0:
        raise ValueError("seed and path_id must be non-negative")
    ss = np.random.SeedSequence(seed, spawn_key=(path_id,))
    return np.random.Generator(np.random.Philox(ss))


def get_task_chunks(
    nprocesses: int, npaths: int
) -> tuple[int, list[slice], int]:
    """Split an ensemble of paths into contiguous chunks, one per process.

    Parameters
    ----------
    nprocesses : int
        The number of processes that can be used.
    npaths : int
        The number of paths in the ensemble.

    Returns
    -------
    nprocesses : int
        The number of processes to actually use (reduced to 1 when there are
        fewer than two paths per process).
    path_chunks : list of slices
        A length-nprocesses list of slices of path ids.
    npc : int
        The (maximum) number of paths per chunk.
    """
    if npaths < 2 * nprocesses:
        return 1, [slice(0, npaths)], npaths

    npc = int(np.ceil(npaths / nprocesses))
    path_chunks = [
        slice(npc * i, min(npaths, (i + 1) * npc)) for i in range(nprocesses)
    ]
    path_chunks = [c for c in path_chunks if c.start < c.stop]
    return len(path_chunks), path_chunks, npc


def ensure_finite(values, what: str) -> np.ndarray:
    """Return ``values`` as an array, raising EvaluationError on NaN/inf."""
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{what} returned non-finite values")
    return arr


def ensemble_stats(values) -> dict[str, float]:
    """Mean, standard error, median and median-absolute-deviation of a sample.

    ``np.sum`` reduces contiguous float arrays pairwise, so the result does not
    depend on how the sample was produced as long as the order is fixed.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0:
        return {"n": 0, "mean": np.nan, "se": np.nan, "median": np.nan, "mad": np.nan}

    mean = np.sum(x) / n
    se = np.std(x, ddof=1) / np.sqrt(n) if n > 1 else 0.0
    median = np.median(x)
    mad = np.median(np.abs(x - median))
    return {
        "n": n,
        "mean": float(mean),
        "se": float(se),
        "median": float(median),
        "mad": float(mad),
    }


def decay_factors(medians) -> list[float]:
    """Successive ratios ``median[k] / median[k+1]``.

    Pairs where both medians vanish are not applicable and come back as NaN;
    a vanishing finer median below a nonzero coarser one is an infinite decay.
    """
    m = np.asarray(medians, dtype=float)
    out = []
    for coarse, fine in zip(m[:-1], m[1:]):
        if fine == 0.0:
            out.append(np.nan if coarse == 0.0 else np.inf)
        else:
            out.append(float(coarse / fine))
    return out


def z_score(mean_a: float, se_a: float, mean_b: float, se_b: float) -> float:
    """z-score of the difference of two independent estimates.

    When both standard errors vanish the estimates are deterministic: equal
    means score 0 and any difference is an infinite score of its sign.
    """
    denom = np.sqrt(se_a**2 + se_b**2)
    if denom == 0.0:
        if mean_a == mean_b:
            return 0.0
        return float(np.copysign(np.inf, mean_a - mean_b))
    return float((mean_a - mean_b) / denom)
