import csv

import pytest
import numpy as np

from slsito.core.functions import Curve
from slsito.core.funcatalog import SINE_CURVE, ZERO_CURVE
from slsito.core.simulate import (
    PATH_COLUMNS,
    BVPath,
    DiffusionSpec,
    SamplePath2D,
    TimeGrid,
    make_time_grid,
    realized_cross_variation,
    realized_quadratic_variation,
    simulate_diffusion,
    transform_by_curve,
)


@pytest.fixture
def spec():
    return DiffusionSpec(start=(0.5, -0.25), drift=(0.3, -0.2), vol=(1.5, 0.7), rho=0.4, seed=42)


def test_make_time_grid():
    grid = make_time_grid(1.0, 4)
    np.testing.assert_allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.steps == 4
    assert grid.horizon == 1.0
    np.testing.assert_allclose(grid.dt, 0.25)
    assert grid.index_of(0.5) == 2
    assert grid.index_of(None) == 4
    with pytest.raises(ValueError):
        grid.index_of(0.3)


@pytest.mark.parametrize("T, N", [(0.0, 10), (-1.0, 10), (1.0, 0), (1.0, 2.5)])
def test_make_time_grid_invalid(T, N):
    with pytest.raises(ValueError):
        make_time_grid(T, N)


@pytest.mark.parametrize("nodes", [[0.0], [0.1, 0.5], [0.0, 0.5, 0.5]])
def test_time_grid_invalid(nodes):
    with pytest.raises(ValueError):
        TimeGrid(np.array(nodes))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"vol": (0.0, 1.0)},
        {"vol": (1.0, -1.0)},
        {"rho": 1.5},
        {"start": (0.0, np.nan)},
        {"drift": (1.0,)},
    ],
)
def test_diffusion_spec_invalid(kwargs):
    with pytest.raises(ValueError):
        DiffusionSpec(**kwargs)


def test_simulate_is_deterministic(spec):
    """The same spec and grid give byte-identical paths."""
    grid = make_time_grid(1.0, 500)
    a = simulate_diffusion(spec, grid)
    b = simulate_diffusion(spec, grid)
    c = simulate_diffusion(spec.for_path(1), grid)
    assert a.x.tobytes() == b.x.tobytes()
    assert not np.allclose(a.x, c.x)


def test_simulate_structure(spec):
    """Shapes, start values, increments and analytic variation laws."""
    grid = make_time_grid(2.0, 400)
    path = simulate_diffusion(spec, grid)

    assert path.x.shape == (2, 401)
    assert path.dm.shape == path.dv.shape == path.dqv.shape == (2, 400)
    assert path.dcov.shape == (400,)
    np.testing.assert_array_equal(path.x[:, 0], spec.start)
    np.testing.assert_allclose(np.diff(path.x, axis=1), path.dm + path.dv, atol=1e-12)

    np.testing.assert_allclose(path.dv[0], 0.3 * grid.dt)
    np.testing.assert_allclose(path.dqv[0], 1.5**2 * grid.dt)
    np.testing.assert_allclose(path.dqv[1], 0.7**2 * grid.dt)
    np.testing.assert_allclose(path.dcov, 0.4 * 1.5 * 0.7 * grid.dt)
    np.testing.assert_allclose(path.quadratic_variation(1).final, 1.5**2 * 2.0)
    np.testing.assert_allclose(path.cross_variation().final, 0.4 * 1.5 * 0.7 * 2.0)


def test_simulate_perfect_correlation():
    spec = DiffusionSpec(vol=(2.0, 0.5), rho=1.0, seed=3)
    path = simulate_diffusion(spec, make_time_grid(1.0, 100))
    np.testing.assert_allclose(path.dm[0] / 2.0, path.dm[1] / 0.5, atol=1e-12)


def test_paths_are_immutable(spec):
    path = simulate_diffusion(spec, make_time_grid(1.0, 10))
    with pytest.raises(ValueError):
        path.x[0, 0] = 1.0


def test_sample_path_rejects_bad_shapes():
    grid = make_time_grid(1.0, 4)
    with pytest.raises(ValueError, match="dm has shape"):
        SamplePath2D(
            grid=grid, x=np.zeros((2, 5)), dm=np.zeros((2, 3)), dv=np.zeros((2, 4)),
            dqv=np.zeros((2, 4)), dcov=np.zeros(4),
        )
    with pytest.raises(ValueError, match="nonnegative"):
        SamplePath2D(
            grid=grid, x=np.zeros((2, 5)), dm=np.zeros((2, 4)), dv=np.zeros((2, 4)),
            dqv=-np.ones((2, 4)), dcov=np.zeros(4),
        )


def test_realized_variations_converge():
    """Realized quadratic and cross variation approach sigma^2 T and rho s1 s2 T."""
    spec = DiffusionSpec(vol=(1.0, 2.0), rho=-0.5, seed=5)
    path = simulate_diffusion(spec, make_time_grid(1.0, 100_000))
    np.testing.assert_allclose(realized_quadratic_variation(path, 1).final, 1.0, atol=0.03)
    np.testing.assert_allclose(realized_quadratic_variation(path, 2).final, 4.0, atol=0.12)
    np.testing.assert_allclose(realized_cross_variation(path).final, -1.0, atol=0.06)


def test_bv_path_total_variation():
    grid = make_time_grid(1.0, 4)
    bv = BVPath(grid, np.array([0.0, 1.0, 0.5, 0.5, 2.0]))
    assert bv.total_variation() == 3.0
    assert bv.final == 2.0
    with pytest.raises(ValueError):
        BVPath(grid, np.zeros(3))


def test_transform_by_zero_curve_is_identity(spec):
    path = simulate_diffusion(spec, make_time_grid(1.0, 200))
    star = transform_by_curve(path, ZERO_CURVE)
    np.testing.assert_allclose(star.x, path.x)
    np.testing.assert_allclose(star.dm, path.dm)
    np.testing.assert_allclose(star.dqv, path.dqv)


def test_transform_by_curve(spec):
    """X2* = X2 - b(X1), increments still add up, variation laws transform."""
    path = simulate_diffusion(spec, make_time_grid(1.0, 300))
    star = transform_by_curve(path, SINE_CURVE)
    np.testing.assert_allclose(star.x[1], path.x[1] - np.sin(path.x[0]))
    np.testing.assert_allclose(np.diff(star.x[1]), star.dm[1] + star.dv[1], atol=1e-12)

    slope = np.cos(path.x[0, :-1])
    expected = path.dqv[1] - 2 * slope * path.dcov + slope**2 * path.dqv[0]
    np.testing.assert_allclose(star.dqv[1], expected)
    assert np.all(star.dqv >= 0)


def test_transform_requires_c2_curve(spec):
    path = simulate_diffusion(spec, make_time_grid(1.0, 10))
    with pytest.raises(ValueError, match="twice differentiable"):
        transform_by_curve(path, Curve("rough", b=np.abs))
    with pytest.raises(ValueError, match="twice differentiable"):
        transform_by_curve(path, Curve("no_curvature", b=np.sin, db=np.cos))


def test_transform_does_not_evaluate_curvature(spec):
    path = simulate_diffusion(spec, make_time_grid(1.0, 10))
    calls = []

    def d2b(x):
        calls.append(x)
        return -np.sin(x)

    star = transform_by_curve(path, Curve("sine", b=np.sin, db=np.cos, d2b=d2b))
    assert calls == []
    np.testing.assert_allclose(star.x[1], path.x[1] - np.sin(path.x[0]))


def test_path_to_csv(spec, tmp_path):
    path = simulate_diffusion(spec, make_time_grid(1.0, 20))
    out = tmp_path / "path.csv"
    path.to_csv(out)
    with open(out) as fl:
        rows = list(csv.reader(fl))
    assert tuple(rows[0]) == PATH_COLUMNS
    assert len(rows) == 22
    assert float(rows[-1][1]) == path.x[0, -1]
