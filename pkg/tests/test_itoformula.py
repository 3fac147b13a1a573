import csv

import pytest
import numpy as np

from slsito.core.exceptions import ConfigurationError, EvaluationError
from slsito.core.funcatalog import (
    ABS2,
    ABS_CURVE,
    RAMP_CURVE,
    CROSS,
    MOVING_KINK,
    SINE_CURVE,
    SMOOTH_1D,
    SMOOTH_QUAD,
    SPLIT_QUAD_RAMP,
    TANAKA2,
    ZERO_CURVE,
    DIAGONAL,
    catalog,
)
from slsito.core.functions import TestFunction
from slsito.core.itoformula import (
    ITO_COLUMNS,
    TERM_NAMES,
    ItoReport,
    condition_check,
    corollary_split,
    curve1d_residual,
    curve_corollary_residual,
    ito1d_residual,
    ito2d_residual,
    ito2d_split_residual,
    ito_smooth_residual,
    occupation_parts_residual,
    reports_to_csv,
)
from slsito.core.localtime import (
    LevelGrid,
    default_eps,
    local_time_occupation,
    local_time_tanaka,
    occupation_increments_at,
)
from slsito.core.simulate import (
    DiffusionSpec,
    SamplePath2D,
    make_time_grid,
    simulate_diffusion,
    transform_by_curve,
)
from slsito.core.utils import decay_factors

BOX = ((0.0, 1.0), (-2.0, 2.0), (-2.0, 2.0))


def _path(n=1000, seed=0, path_id=0, **kwargs):
    spec = DiffusionSpec(seed=seed, **kwargs).for_path(path_id)
    return simulate_diffusion(spec, make_time_grid(1.0, n))


@pytest.fixture(scope="module")
def path():
    return _path(n=2000, seed=12, vol=(1.0, 0.8), rho=0.3)


def test_report_residual_and_row():
    rep = ItoReport(lhs=3.0, term_dx2=1.0, term_lt2=0.5, term_curve=0.25)
    assert rep.residual == 1.25
    assert rep.terms["term_lt2"] == 0.5
    assert set(rep.terms) == set(TERM_NAMES)
    assert rep.as_dict()["residual"] == 1.25
    row = rep.as_row(7)
    assert len(row) == len(ITO_COLUMNS)
    assert row[0] == 7 and row[-1] == 1.25


def test_report_rejects_non_finite():
    with pytest.raises(EvaluationError):
        ItoReport(lhs=np.nan)
    with pytest.raises(EvaluationError):
        ItoReport(lhs=0.0, term_sls1=np.inf)


def test_reports_to_csv(tmp_path):
    out = tmp_path / "report.csv"
    reports = [ItoReport(lhs=1.0, term_dx1=0.5), ItoReport(lhs=0.1 + 0.2)]
    reports_to_csv(reports, out, path_ids=[4, 9])
    with open(out) as fl:
        rows = list(csv.reader(fl))
    assert tuple(rows[0]) == ITO_COLUMNS
    assert [r[0] for r in rows[1:]] == ["4", "9"]
    # floats are written without loss
    assert float(rows[2][1]) == 0.1 + 0.2
    assert float(rows[1][-1]) == 0.5


def test_smooth_formula_requires_callbacks(path):
    with pytest.raises(ConfigurationError, match="missing callbacks"):
        ito_smooth_residual(TestFunction(name="bare", f=lambda t, x1, x2: x1, d1=lambda t, x1, x2: 1.0), path)


@pytest.mark.parametrize("f", [SMOOTH_QUAD, CROSS, SMOOTH_1D])
def test_smooth_formula_residual_is_small(f):
    """Left-point Ito sums against the analytic brackets leave a mean-zero error of order sqrt(dt)."""
    p = _path(n=20_000, seed=2, vol=(1.0, 0.8), rho=0.3)
    rep = ito_smooth_residual(f, p)
    assert abs(rep.residual) < 0.1
    assert rep.term_lt1 == rep.term_lt2 == rep.term_sls1 == rep.term_sls2 == 0.0


def test_smooth_quad_time_and_cross_terms(path):
    rep = ito_smooth_residual(SMOOTH_QUAD, path)
    np.testing.assert_allclose(rep.term_time, 1.0)
    assert rep.term_cross == 0.0
    np.testing.assert_allclose(rep.term_delta2, np.sum(path.dqv[1]))

    rep = ito_smooth_residual(CROSS, path)
    np.testing.assert_allclose(rep.term_cross, 0.3 * 0.8)
    assert rep.term_time == 0.0


def test_2d_formula_reduces_to_smooth_formula(path):
    """For C2 functions the local-time terms reproduce the second-order terms on a band grid."""
    smooth = ito_smooth_residual(SMOOTH_QUAD, path)
    rep = ito2d_residual(SMOOTH_QUAD, path)
    np.testing.assert_allclose(rep.term_lt1, smooth.term_delta1, rtol=1e-8)
    np.testing.assert_allclose(rep.term_lt2, smooth.term_delta2, rtol=1e-8)
    # grad_i f does not depend on time, so its field has no rectangle mass
    assert abs(rep.term_sls1) < 1e-12
    assert abs(rep.term_sls2) < 1e-12
    np.testing.assert_allclose(rep.residual, smooth.residual, atol=1e-8)


@pytest.mark.parametrize("method", ["occupation", "tanaka"])
def test_2d_formula_for_tanaka_function(path, method):
    """For (x2)^+ the level term is the local time at 0 and the field term vanishes."""
    eps = default_eps(path.grid)
    rep = ito2d_residual(TANAKA2, path, method=method)
    if method == "occupation":
        L0 = local_time_occupation(path, 2, LevelGrid.single(0.0), eps).final[0]
    else:
        L0 = local_time_tanaka(path, 2, LevelGrid.single(0.0)).final[0]
    np.testing.assert_allclose(rep.term_lt2, L0, atol=1e-12)
    assert rep.term_sls2 == 0.0
    assert rep.term_lt1 == rep.term_sls1 == 0.0
    np.testing.assert_allclose(rep.term_dx2, np.sum(np.where(path.x[1, :-1] > 0, 1.0, 0.0) * path.dx(2)))
    if method == "tanaka":
        # the Tanaka estimator closes the identity up to rounding
        assert abs(rep.residual) < 1e-10


def test_2d_formula_with_explicit_levels(path):
    eps = default_eps(path.grid)
    levels = (LevelGrid.for_path(path, 1, da=eps), LevelGrid.for_path(path, 2, da=eps))
    a = ito2d_residual(ABS2, path, levels=levels)
    b = ito2d_residual(ABS2, path, levels=(None, levels[1]))
    np.testing.assert_allclose(a.as_row(0), b.as_row(0))


def test_streamed_blocks_do_not_change_the_report(path):
    a = ito2d_residual(MOVING_KINK, path, block=4096)
    b = ito2d_residual(MOVING_KINK, path, block=97)
    np.testing.assert_allclose(a.as_row(0), b.as_row(0), atol=1e-10)


def test_split_formula_matches_combined_function(path):
    """x2^2 + (x2)^+: the C1 part's bracket term plus the BV part's level term."""
    split = ito2d_split_residual(SPLIT_QUAD_RAMP, path)
    combined = ito2d_residual(SPLIT_QUAD_RAMP.combined(), path)
    np.testing.assert_allclose(split.term_delta2 + split.term_lt2, combined.term_lt2, rtol=1e-8)
    np.testing.assert_allclose(split.residual, combined.residual, atol=1e-8)
    np.testing.assert_allclose(split.term_dx2, combined.term_dx2)


def test_corollary_curve_term(path):
    eps = default_eps(path.grid)
    rep = curve_corollary_residual(ABS2, ZERO_CURVE, path, eps=eps)
    np.testing.assert_allclose(rep.term_curve, 2.0 * np.sum(occupation_increments_at(path, 2, 0.0, eps)))
    assert rep.term_lt2 == rep.term_sls2 == 0.0


def test_corollary_without_jump_is_the_smooth_formula(path):
    rep = curve_corollary_residual(SMOOTH_QUAD, SINE_CURVE, path)
    assert rep.term_curve == 0.0
    np.testing.assert_allclose(rep.as_row(0), ito_smooth_residual(SMOOTH_QUAD, path).as_row(0))


def test_corollary_curve_term_for_sine_curve(path):
    """The curve term is the jump times the local time at 0 of X2 - sin(X1)."""
    eps = default_eps(path.grid)
    star = transform_by_curve(path, SINE_CURVE)
    L0 = np.sum(occupation_increments_at(star, 2, 0.0, eps))
    absolute = curve_corollary_residual(ABS_CURVE, SINE_CURVE, path, eps=eps)
    ramp = curve_corollary_residual(RAMP_CURVE, SINE_CURVE, path, eps=eps)
    # X2* starts on the curve, inside the band at 0
    assert L0 > 0
    np.testing.assert_allclose(ramp.term_curve, L0)
    np.testing.assert_allclose(absolute.term_curve, 2.0 * L0)
    assert absolute.term_lt2 == absolute.term_sls2 == ramp.term_lt2 == ramp.term_sls2 == 0.0


def test_corollary_curve_terms_cancel_in_smooth_combination(path):
    """|y| - 2 y^+ = -y for y = x2 - sin(x1) is smooth, so the kinks drop out."""
    smooth = TestFunction(
        name="SINE_OFFSET",
        f=lambda t, x1, x2: np.sin(x1) - x2,
        d1=lambda t, x1, x2: np.cos(x1),
        d2=lambda t, x1, x2: -1.0,
        d12=lambda t, x1, x2: 0.0,
        d11=lambda t, x1, x2: -np.sin(x1),
        d22=lambda t, x1, x2: 0.0,
    )
    absolute = curve_corollary_residual(ABS_CURVE, SINE_CURVE, path)
    ramp = curve_corollary_residual(RAMP_CURVE, SINE_CURVE, path)
    expected = ito_smooth_residual(smooth, path)
    np.testing.assert_allclose(absolute.residual - 2.0 * ramp.residual, expected.residual, atol=1e-9)
    np.testing.assert_allclose(absolute.term_dx1 - 2.0 * ramp.term_dx1, expected.term_dx1, atol=1e-9)


def test_corollary_split():
    split = corollary_split(TANAKA2, ZERO_CURVE)
    # f_v = x1 (x2)^+ for a unit jump across x2 = 0
    np.testing.assert_allclose(split.f_v.f(0.0, 2.0, 0.5), 1.0, atol=1e-8)
    np.testing.assert_allclose(split.f_v.d2(0.0, 2.0, 0.5), 2.0, atol=1e-8)
    np.testing.assert_allclose(split.f_v.d1(0.0, 2.0, 0.5), 0.5)
    np.testing.assert_allclose(split.f_v.d12(0.0, 2.0, 0.5), 1.0)
    np.testing.assert_allclose(split.f_h.f(0.0, 2.0, 0.5), -0.5, atol=1e-8)
    # the C1 part has no jump in grad_2 across the curve
    below = split.f_h.d2(0.0, 1.0, -1e-9)
    above = split.f_h.d2(0.0, 1.0, 1e-9)
    np.testing.assert_allclose(above, below, atol=1e-6)
    # vectorized evaluation
    vals = split.f_v.f(0.0, np.array([1.0, 2.0]), np.array([1.0, -1.0]))
    np.testing.assert_allclose(vals, [1.0, 0.0], atol=1e-8)


def test_corollary_split_without_jump():
    split = corollary_split(CROSS, ZERO_CURVE)
    assert split.f_h is CROSS
    assert split.f_v.f(0.0, 1.0, 1.0) == 0.0


def test_1d_formula_for_smooth_function(path):
    rep = ito1d_residual(SMOOTH_1D, path)
    np.testing.assert_allclose(rep.residual, ito_smooth_residual(SMOOTH_1D, path).residual, atol=1e-12)
    assert rep.term_lt2 == 0.0


def test_1d_formula_matches_2d_when_x1_is_inert(path):
    """MOVING_KINK does not depend on x1, so both formulas agree term by term."""
    a = ito1d_residual(MOVING_KINK, path)
    b = ito2d_residual(MOVING_KINK, path)
    np.testing.assert_allclose(a.term_lt2, b.term_lt2)
    np.testing.assert_allclose(a.term_sls2, b.term_sls2)
    np.testing.assert_allclose(a.residual, b.residual, atol=1e-12)


def test_1d_formula_for_split_function(path):
    rep = ito1d_residual(SPLIT_QUAD_RAMP, path)
    np.testing.assert_allclose(rep.term_delta2, np.sum(path.dqv[1]))
    assert rep.term_lt2 > 0


def test_1d_formula_rejects_bad_coordinate(path):
    with pytest.raises(ValueError):
        ito1d_residual(SMOOTH_1D, path, i=3)


def test_curve1d_with_constant_level(path):
    """With gamma = 0 the moving-level term is the local time at 0."""
    eps = default_eps(path.grid)
    flat = curve1d_residual(TANAKA2, ZERO_CURVE, path, eps=eps)
    fixed = ito1d_residual(TANAKA2, path, eps=eps)
    np.testing.assert_allclose(flat.term_curve, fixed.term_lt2)
    np.testing.assert_allclose(flat.residual, fixed.residual, atol=1e-12)


def test_curve1d_moving_kink_residual_is_small():
    """The moving-level formula closes up to a small discretization error on average."""
    residuals = [
        curve1d_residual(MOVING_KINK, DIAGONAL, _path(n=4000, seed=21, path_id=k)).residual for k in range(100)
    ]
    assert abs(np.mean(residuals)) < 0.05


def test_occupation_parts_residual(path):
    rep = occupation_parts_residual(SMOOTH_QUAD, path, 2)
    np.testing.assert_allclose(rep.lhs, np.sum(path.dqv[1]))
    assert abs(rep.residual) < 1e-8 * rep.lhs
    with pytest.raises(ValueError):
        occupation_parts_residual(SMOOTH_QUAD, path, 2, levels=LevelGrid.single(0.0))


@pytest.mark.parametrize("entry", catalog(), ids=lambda e: e.id)
def test_condition_check_passes_for_catalog(entry):
    diags = condition_check(entry.test_function, BOX, samples=50, resolutions=(200, 2000))
    failed = [d.name for d in diags if not d.passed]
    assert not failed
    assert any(d.name.startswith("fd:") for d in diags)


def _rough_d2(t, x1, x2):
    safe = np.where(x2 == 0, 1.0, x2)
    return np.where(x2 == 0, 0.0, 2 * safe * np.sin(1 / safe) - np.cos(1 / safe))


def test_condition_check_flags_unbounded_variation():
    """grad_2 of x2^2 sin(1/x2) oscillates without bound near 0."""
    f = TestFunction(
        name="rough",
        f=lambda t, x1, x2: np.where(x2 == 0, 0.0, x2**2 * np.sin(1 / np.where(x2 == 0, 1.0, x2))),
        d1=lambda t, x1, x2: 0.0,
        d2=_rough_d2,
    )
    diags = {d.name: d for d in condition_check(f, BOX, samples=20, resolutions=(200, 20000))}
    assert not diags["variation:d2"].passed
    assert diags["variation:d1"].passed


def test_condition_check_reports_bad_callbacks():
    f = TestFunction(name="nan", f=lambda t, x1, x2: np.full(np.broadcast(t, x1, x2).shape, np.nan))
    diags = condition_check(f, BOX, samples=5)
    assert [d.name for d in diags] == ["bounded"]
    assert not diags[0].passed


REFINEMENT = (50, 800, 12800)


def _coarsen(path, n):
    """The same sample path observed on n steps."""
    k = path.steps // n
    return SamplePath2D(
        grid=make_time_grid(path.grid.horizon, n),
        x=path.x[:, ::k],
        dm=path.dm.reshape(2, n, k).sum(axis=2),
        dv=path.dv.reshape(2, n, k).sum(axis=2),
        dqv=path.dqv.reshape(2, n, k).sum(axis=2),
        dcov=path.dcov.reshape(n, k).sum(axis=1),
    )


@pytest.fixture(scope="module")
def refined_paths():
    """Per path, the same Brownian sample on every grid of REFINEMENT."""
    fine = [_path(n=REFINEMENT[-1], seed=31, path_id=k, rho=0.5) for k in range(100)]
    return [[_coarsen(p, n) for n in REFINEMENT] for p in fine]


def _median_residuals(formula, paths):
    res = np.array([[formula(p).residual for p in levels] for levels in paths])
    return np.median(np.abs(res), axis=0)


def test_coarsened_path_is_consistent(refined_paths):
    fine = refined_paths[0][-1]
    coarse = refined_paths[0][0]
    assert coarse.steps == REFINEMENT[0]
    np.testing.assert_allclose(coarse.x[:, -1], fine.x[:, -1])
    np.testing.assert_allclose(np.diff(coarse.x, axis=1), coarse.dm + coarse.dv, atol=1e-12)
    np.testing.assert_allclose(coarse.dqv.sum(axis=1), fine.dqv.sum(axis=1))


@pytest.mark.parametrize("f", [TANAKA2, ABS2, CROSS], ids=lambda f: f.name)
def test_2d_formula_residual_shrinks_under_refinement(f, refined_paths):
    meds = _median_residuals(lambda p: ito2d_residual(f, p), refined_paths)
    assert all(d >= 1.3 for d in decay_factors(meds)), meds


def test_tanaka_reduction_under_refinement(refined_paths):
    """For (x2)^+ the level term tracks the local time at 0 at every refinement."""
    for p in refined_paths[0]:
        eps = default_eps(p.grid)
        rep = ito2d_residual(TANAKA2, p)
        L0 = local_time_occupation(p, 2, LevelGrid.single(0.0), eps).final[0]
        np.testing.assert_allclose(rep.term_lt2, L0, atol=1e-12)
        assert rep.term_sls2 == 0.0


def test_cross_residual_rms_shrinks_under_refinement(refined_paths):
    reps = [[ito2d_residual(CROSS, p) for p in levels] for levels in refined_paths]
    rms = np.sqrt(np.mean([[r.residual**2 for r in levels] for levels in reps], axis=0))
    assert all(d >= 1.3 for d in decay_factors(rms)), rms
    # the cross term is the analytic bracket rho sigma_1 sigma_2 t
    np.testing.assert_allclose([r.term_cross for levels in reps for r in levels], 0.5)


def test_corollary_ramp_residual_shrinks_under_refinement(refined_paths):
    meds = _median_residuals(lambda p: curve_corollary_residual(RAMP_CURVE, SINE_CURVE, p), refined_paths)
    assert all(d >= 1.1 for d in decay_factors(meds)), meds
