import pytest
import numpy as np

from slsito.core.exceptions import EvaluationError
from slsito.core.experiments import _abs_check
from slsito.core.utils import (
    RNG_ALGORITHM,
    decay_factors,
    ensemble_stats,
    ensure_finite,
    get_task_chunks,
    path_rng,
    z_score,
)
import slsito.utils


def test_get_task_chunks():
    """Test that get_task_chunks correctly splits up an ensemble."""
    nprocs, chunks, npc = get_task_chunks(3, 30)
    # Number of chunks should match number of processes
    assert len(chunks) == nprocs == 3
    # Chunks cover every path exactly once, in order
    ids = [i for chunk in chunks for i in range(*chunk.indices(30))]
    assert ids == list(range(30))
    assert npc == 10

    # Uneven split keeps contiguous chunks and drops nothing
    nprocs, chunks, npc = get_task_chunks(4, 10)
    assert [i for c in chunks for i in range(c.start, c.stop)] == list(range(10))
    assert npc == 3

    # Test with nprocs > paths
    nprocs, chunks, npc = get_task_chunks(10, 5)
    assert nprocs == 1
    assert chunks == [slice(0, 5)]
    assert npc == 5


def test_path_rng_is_reproducible():
    """The same (seed, path_id) gives the same stream; other ids do not."""
    a = path_rng(7, 3).standard_normal(16)
    b = path_rng(7, 3).standard_normal(16)
    c = path_rng(7, 4).standard_normal(16)
    d = path_rng(8, 3).standard_normal(16)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


def test_path_rng_matches_spawn():
    """The per-path stream is the one SeedSequence.spawn would give."""
    spawned = np.random.SeedSequence(11).spawn(3)[2]
    expected = np.random.Generator(np.random.Philox(spawned)).standard_normal(8)
    np.testing.assert_array_equal(path_rng(11, 2).standard_normal(8), expected)
    assert RNG_ALGORITHM == "philox4x64-10"


def test_path_rng_rejects_negative():
    with pytest.raises(ValueError):
        path_rng(-1, 0)
    with pytest.raises(ValueError):
        path_rng(0, -1)


def test_ensemble_stats():
    """Mean, SE, median and MAD of a small sample."""
    st = ensemble_stats([1.0, 2.0, 3.0, 4.0])
    assert st["n"] == 4
    assert st["mean"] == 2.5
    assert st["median"] == 2.5
    assert st["mad"] == 1.0
    np.testing.assert_allclose(st["se"], np.std([1, 2, 3, 4], ddof=1) / 2)
    assert st["se"] >= 0


def test_ensemble_stats_edge_cases():
    empty = ensemble_stats([])
    assert empty["n"] == 0
    assert np.isnan(empty["mean"])

    single = ensemble_stats([5.0])
    assert single["se"] == 0.0
    assert single["mean"] == 5.0


@pytest.mark.parametrize(
    "medians, expected",
    [
        ([4.0, 2.0, 1.0], [2.0, 2.0]),
        ([0.0, 0.0], [np.nan]),
        ([1.0, 0.0], [np.inf]),
        ([1.0], []),
    ],
)
def test_decay_factors(medians, expected):
    np.testing.assert_array_equal(decay_factors(medians), expected)


def test_z_score():
    assert z_score(3.0, 1.0, 0.0, 0.0) == 3.0
    np.testing.assert_allclose(z_score(1.0, 0.3, 0.0, 0.4), 2.0)
    # deterministic estimates
    assert z_score(2.0, 0.0, 2.0, 0.0) == 0.0
    assert z_score(1.0, 0.0, 2.0, 0.0) == -np.inf
    assert z_score(1.5, 0.0, 1.0, 0.0) == np.inf


def test_deterministic_mismatch_fails_z_check():
    assert not _abs_check("z:x", z_score(1.0, 0.0, 1.1, 0.0), 3.0).passed
    assert _abs_check("z:x", z_score(1.0, 0.0, 1.0, 0.0), 3.0).passed


def test_ensure_finite():
    np.testing.assert_array_equal(ensure_finite([1, 2], "x"), [1.0, 2.0])
    with pytest.raises(EvaluationError, match="g returned non-finite"):
        ensure_finite([1.0, np.nan], "g")


def test_utils_module_imports():
    """Test that the slsito.utils module re-exports the core utilities."""
    for name in ["RNG_ALGORITHM", "decay_factors", "ensemble_stats", "get_task_chunks", "path_rng", "z_score"]:
        assert hasattr(slsito.utils, name)
