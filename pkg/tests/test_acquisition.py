import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpbo.acquisition import (
    AcquisitionKind,
    AcquisitionSpec,
    MaximizerBudget,
    UcbMode,
    acquisition_value,
    acquisition_values,
    expected_improvement,
    maximize_acquisition,
    nelder_mead_batch,
    std_normal_pdf_cdf,
    ucb_gamma,
)
from warpbo.gp import Dataset, KernelParams, fit
from warpbo.warp import PriorSpec, WarpMap

# Evaluated with mpmath at 30 digits.
UCB_SIMPLIFIED_D1_N1 = 5.60057079092958
UCB_PAPER_D1_N1_ABR1 = 9.18124255277937
NORMAL_CDF_196 = 0.975002104851780
INV_SQRT_2PI = 0.398942280401433

EI = AcquisitionSpec(AcquisitionKind.EI)
UCB = AcquisitionSpec(AcquisitionKind.UCB)


def test_std_normal_examples():
    pdf, cdf = std_normal_pdf_cdf(0.0)
    assert pdf == pytest.approx(INV_SQRT_2PI, abs=1e-15) and cdf == 0.5
    assert std_normal_pdf_cdf(1.96)[1] == pytest.approx(NORMAL_CDF_196, abs=1e-12)
    z = np.linspace(-8, 8, 321)
    _, c = std_normal_pdf_cdf(z)
    _, c_neg = std_normal_pdf_cdf(-z)
    np.testing.assert_allclose(c, 1.0 - c_neg, atol=1e-12)


def test_ei_examples():
    assert expected_improvement(5.0, 0.0, 1.0) == 0.0
    assert expected_improvement(-5.0, 0.0, 1.0) == 0.0
    assert expected_improvement(2.0, 1.0, 2.0) == pytest.approx(INV_SQRT_2PI, abs=1e-15)
    assert expected_improvement(-10.0, 1.0, 0.0) <= 1e-20


@given(st.floats(-50, 50), st.floats(0, 20), st.floats(-50, 50))
def test_ei_non_negative(mean, sd, incumbent):
    assert expected_improvement(mean, sd, incumbent) >= 0.0


def test_ei_non_decreasing_in_sd():
    sd = np.linspace(0.0, 5.0, 501)
    for gap in (0.0, -0.3, -2.0, -7.0):
        ei = expected_improvement(np.full_like(sd, gap), sd, 0.0)
        assert np.all(np.diff(ei) >= -1e-15)


def test_ei_matches_monte_carlo():
    rng = np.random.default_rng(5)
    for _ in range(10):
        mean, sd, inc = rng.normal(), rng.uniform(0.1, 2.0), rng.normal()
        draws = np.maximum(rng.normal(mean, sd, 1_000_000) - inc, 0.0)
        se = draws.std() / math.sqrt(draws.size)
        assert abs(expected_improvement(mean, sd, inc) - draws.mean()) <= 3 * se + 1e-12


def test_ucb_gamma_examples():
    assert ucb_gamma(1, 1, AcquisitionSpec(AcquisitionKind.UCB, delta=0.1)) == pytest.approx(
        UCB_SIMPLIFIED_D1_N1, abs=1e-12)
    full = AcquisitionSpec(AcquisitionKind.UCB, delta=0.1, ucb_mode=UcbMode.PAPER_FORMULA, r=1.0)
    assert ucb_gamma(1, 1, full) == pytest.approx(UCB_PAPER_D1_N1_ABR1, abs=1e-12)


@pytest.mark.parametrize("mode", list(UcbMode))
def test_ucb_gamma_increasing(mode):
    spec = AcquisitionSpec(AcquisitionKind.UCB, ucb_mode=mode, r=4.0)
    values = [ucb_gamma(n, 3, spec) for n in range(1, 102)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_ucb_gamma_full_formula_needs_r():
    spec = AcquisitionSpec(AcquisitionKind.UCB, ucb_mode="paper_formula")
    with pytest.raises(ValueError):
        ucb_gamma(1, 1, spec)
    assert spec.for_box([[0, 2], [0, 7]]).r == 7.0
    with pytest.raises(ValueError):
        ucb_gamma(0, 1, UCB)


@pytest.mark.parametrize("kwargs", [dict(delta=0.0), dict(delta=1.0), dict(a=-1.0), dict(r=0.0)])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        AcquisitionSpec(**kwargs)


@pytest.fixture
def model():
    rng = np.random.default_rng(3)
    x = rng.uniform(-2, 2, (12, 2))
    y = np.sin(x[:, 0]) + np.cos(1.5 * x[:, 1])
    warp = WarpMap((PriorSpec.truncated_normal(0.3, 1.0, -2, 2), PriorSpec.uniform(-2, 2)))
    return fit(Dataset(x, y), warp, KernelParams(lengthscale=0.3, noise_var=1e-10)), x, y


def test_ucb_is_mean_plus_scaled_sd(model):
    gp, _, _ = model
    pts = np.random.default_rng(0).uniform(-2, 2, (500, 2))
    mean, var = gp.predict(pts)
    gamma = ucb_gamma(7, 2, UCB)
    values = acquisition_values(gp, pts, UCB, incumbent=0.0, n=7)
    np.testing.assert_allclose(values, mean + math.sqrt(gamma) * np.sqrt(var), rtol=1e-12)
    assert np.all(values >= mean)


def test_ei_at_incumbent_training_point(model):
    _, x, y = model
    gp = fit(Dataset(x, y), None, KernelParams(lengthscale=0.5, noise_var=0.0))
    i = int(np.argmax(y))
    assert acquisition_value(gp, x[i], EI, incumbent=float(y[i]), n=12) <= 1e-8
    pts = np.random.default_rng(1).uniform(-2, 2, (10_000, 2))
    assert np.all(acquisition_values(gp, pts, EI, float(y.max()), 12) >= 0.0)


def test_nelder_mead_finds_quadratic_minimum():
    centre = np.array([0.3, -0.7, 1.1])

    def f(p):
        return np.sum((p - centre) ** 2, axis=1)

    starts = np.array([[1.5, 1.5, -1.5], [-1.0, 0.0, 0.0]])
    lo, hi = np.full(3, -2.0), np.full(3, 2.0)
    xs, fs = nelder_mead_batch(f, starts, lo, hi, iterations=500, simplex_fraction=0.1)
    np.testing.assert_allclose(xs, np.tile(centre, (2, 1)), atol=1e-4)
    assert np.all(fs < 1e-8)


def test_nelder_mead_respects_box():
    def f(p):
        return np.sum(p, axis=1)

    lo, hi = np.zeros(2), np.ones(2)
    xs, fs = nelder_mead_batch(f, np.array([[0.9, 0.9], [1.0, 1.0]]), lo, hi)
    assert np.all((xs >= lo) & (xs <= hi))
    np.testing.assert_allclose(xs, 0.0, atol=1e-5)


def _grid_argmax(gp, spec, incumbent, n, cells=801):
    g = np.linspace(0.0, 1.0, cells)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    values = acquisition_values(gp, pts, spec, incumbent, n)
    return pts[int(np.argmax(values))], float(values.max())


def test_maximizer_finds_single_bump():
    centre = np.array([0.62, 0.37])
    rng = np.random.default_rng(8)
    x = np.vstack([centre, rng.random((20, 2))])
    y = np.exp(-np.sum((x - centre) ** 2, axis=1) / 0.05)
    gp = fit(Dataset(x, y), None, KernelParams(lengthscale=0.15, noise_var=1e-8))
    spec = AcquisitionSpec(AcquisitionKind.UCB).for_box([[0, 1], [0, 1]])
    grid_x, grid_v = _grid_argmax(gp, spec, 0.0, 21)
    prop = maximize_acquisition(gp, [[0, 1], [0, 1]], spec, 0.0, 21, MaximizerBudget(),
                                np.random.default_rng(0))
    assert np.linalg.norm(prop.point - grid_x) <= 1e-2
    assert prop.acq_value >= grid_v - 1e-9
    assert prop.restarts_used == 10


def test_maximizer_symmetric_peaks():
    x = np.array([[0.25], [0.75], [0.0], [0.5], [1.0]])
    y = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    gp = fit(Dataset(x, y), None, KernelParams(lengthscale=0.1, noise_var=1e-8))
    g = np.linspace(0, 1, 100_001)[:, None]
    values = acquisition_values(gp, g, UCB, 1.0, 5)
    left = g[np.argmax(np.where(g[:, 0] < 0.5, values, -np.inf)), 0]
    right = g[np.argmax(np.where(g[:, 0] > 0.5, values, -np.inf)), 0]
    prop = maximize_acquisition(gp, [[0, 1]], UCB, 1.0, 5, MaximizerBudget(), np.random.default_rng(2))
    assert min(abs(prop.point[0] - left), abs(prop.point[0] - right)) <= 1e-2


def test_maximizer_feasible_on_flat_acquisition():
    x = np.array([[0.1, 5.0], [0.9, 7.0]])
    gp = fit(Dataset(x, [3.0, 3.0]), None, KernelParams(lengthscale=100.0))
    bounds = [[0.0, 1.0], [5.0, 7.0]]
    for seed in range(5):
        prop = maximize_acquisition(gp, bounds, EI, 3.0, 2, MaximizerBudget(candidates=50),
                                    np.random.default_rng(seed))
        assert 0.0 <= prop.point[0] <= 1.0 and 5.0 <= prop.point[1] <= 7.0
        assert math.isfinite(prop.acq_value)


def test_maximizer_never_loses_to_candidates(model):
    gp, _, y = model
    bounds = np.array([[-2.0, 2.0], [-2.0, 2.0]])
    budget = MaximizerBudget(candidates=300)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        prop = maximize_acquisition(gp, bounds, EI, float(y.max()), 12, budget, rng)
        cand = -2.0 + np.random.default_rng(seed).random((300, 2)) * 4.0
        assert prop.acq_value >= acquisition_values(gp, cand, EI, float(y.max()), 12).max()
        assert np.all((prop.point >= -2.0) & (prop.point <= 2.0))


def test_maximizer_deterministic(model):
    gp, _, y = model
    a = maximize_acquisition(gp, [[-2, 2], [-2, 2]], EI, float(y.max()), 12, MaximizerBudget(),
                             np.random.default_rng(11))
    b = maximize_acquisition(gp, [[-2, 2], [-2, 2]], EI, float(y.max()), 12, MaximizerBudget(),
                             np.random.default_rng(11))
    assert np.array_equal(a.point, b.point) and a.acq_value == b.acq_value


def test_ei_argmax_invariant_to_output_scaling():
    # The amplitude is fixed on standardised outputs, so scaling y scales the
    # whole posterior; EI scales with it and its argmax stays put.
    rng = np.random.default_rng(6)
    x = rng.random((8, 2))
    y = np.sin(4 * x[:, 0]) * x[:, 1]
    results = []
    for c in (1.0, 7.5):
        gp = fit(Dataset(x, c * y), None, KernelParams(lengthscale=0.25, noise_var=1e-8))
        results.append(_grid_argmax(gp, EI, float(c * y.max()), 8, cells=201))
    assert np.max(np.abs(results[0][0] - results[1][0])) <= 1.0 / 200
    assert results[1][1] == pytest.approx(7.5 * results[0][1], rel=1e-9)
