import numpy as np
import pytest
from scipy import stats

from warpbo.acquisition import AcquisitionKind, AcquisitionSpec, MaximizerBudget
from warpbo.bench import BENCHMARKS, branin
from warpbo.driver import (
    BoConfig,
    Direction,
    initial_design,
    make_shifted_prior,
    run_bo,
    run_prior_search,
    sample_prior,
    seed_streams,
)
from warpbo.warp import PriorSpec, WarpMap, cdf

BRANIN = BENCHMARKS["branin"]
FAST = MaximizerBudget(candidates=300, restarts=3, iterations=40)


def test_initial_design():
    a = initial_design([[0, 1]], 1, np.random.default_rng(3))
    assert a.shape == (1, 1) and 0 <= a[0, 0] <= 1
    np.testing.assert_array_equal(initial_design([[0, 1], [2, 5]], 6, np.random.default_rng(9)),
                                  initial_design([[0, 1], [2, 5]], 6, np.random.default_rng(9)))
    big = initial_design([[0, 2], [0, 2]], 10_000, np.random.default_rng(0))
    for m in range(2):
        assert stats.kstest(big[:, m], stats.uniform(0, 2).cdf).statistic < 0.0163


def test_seed_streams_are_independent_and_reproducible():
    d1, m1 = seed_streams(5)
    d2, m2 = seed_streams(5)
    assert d1.random() == d2.random() and m1.random() == m2.random()
    d, m = seed_streams(5)
    assert d.random() != m.random()


def test_standard_bo_on_branin_is_monotone():
    cfg = BoConfig(n_init=4, budget=14, seed=3, maximizer_budget=FAST)
    result = run_bo(BRANIN, BRANIN.bounds, WarpMap.uniform(BRANIN.bounds), cfg)
    assert result.error is None
    assert len(result.trace) == 14
    best = result.best_so_far
    assert np.all(np.diff(best) <= 0)
    assert best[-1] <= best[3]
    assert [r.iteration for r in result.trace] == list(range(1, 15))
    np.testing.assert_array_equal(best, np.minimum.accumulate(result.values))
    lo, hi = np.array(BRANIN.bounds).T
    assert np.all((result.points >= lo) & (result.points <= hi))
    assert len(result.wall_times) == 14


def test_budget_equal_to_n_init_evaluates_only_the_design():
    cfg = BoConfig(n_init=4, budget=4, seed=1)
    result = run_bo(BRANIN, BRANIN.bounds, None, cfg)
    design, _ = seed_streams(1)
    np.testing.assert_array_equal(result.points, initial_design(BRANIN.bounds, 4, design))


def test_deterministic_given_seed():
    cfg = BoConfig(n_init=3, budget=9, seed=42, maximizer_budget=FAST)
    warp = make_shifted_prior(BRANIN.bounds, (np.pi, 2.275), 0.05, 4.0)
    a = run_bo(BRANIN, BRANIN.bounds, warp, cfg)
    b = run_bo(BRANIN, BRANIN.bounds, warp, cfg)
    assert a.trace == b.trace


def test_minimize_equals_maximize_of_negation():
    kw = dict(n_init=3, budget=10, seed=7, maximizer_budget=FAST)
    warp = WarpMap.uniform(BRANIN.bounds)
    low = run_bo(branin, BRANIN.bounds, warp, BoConfig(direction=Direction.MINIMIZE, **kw))
    high = run_bo(lambda x: -branin(x), BRANIN.bounds, warp, BoConfig(direction="maximize", **kw))
    np.testing.assert_array_equal(low.points, high.points)
    np.testing.assert_array_equal(low.values, -high.values)
    assert np.all(np.diff(high.best_so_far) >= 0)


def test_ucb_run_completes():
    cfg = BoConfig(n_init=2, budget=6, seed=0, maximizer_budget=FAST,
                   acquisition=AcquisitionSpec(AcquisitionKind.UCB, ucb_mode="paper_formula"))
    result = run_bo(BRANIN, BRANIN.bounds, WarpMap.uniform(BRANIN.bounds), cfg)
    assert result.error is None and len(result.trace) == 6


def test_objective_failure_returns_partial_trace():
    calls = []

    def flaky(x):
        calls.append(x)
        return float("nan") if len(calls) == 6 else branin(x)

    result = run_bo(flaky, BRANIN.bounds, None, BoConfig(n_init=4, budget=10, maximizer_budget=FAST))
    assert len(result.trace) == 5
    assert "non-finite" in result.error


def test_duplicate_proposals_are_jittered():
    # A constant objective gives a flat model; EI is zero everywhere, so the
    # maximiser falls back to candidates and repeated points must not break the fit.
    result = run_bo(lambda x: 1.0, [[0, 1]], None,
                    BoConfig(n_init=2, budget=12, maximizer_budget=MaximizerBudget(candidates=1, restarts=1)))
    assert result.error is None
    pts = result.points[:, 0]
    assert len(np.unique(pts)) == len(pts)


def test_config_validation():
    with pytest.raises(ValueError):
        BoConfig(n_init=0)
    with pytest.raises(ValueError):
        BoConfig(n_init=5, budget=4)
    with pytest.raises(ValueError):
        BoConfig(refit_every=0)


def test_mismatched_warp_rejected():
    with pytest.raises(ValueError):
        run_bo(BRANIN, BRANIN.bounds, WarpMap.uniform([[0, 1], [0, 1]]), BoConfig())


def test_prior_search_uniform_is_random_search():
    warp = WarpMap.uniform([[0, 2], [-1, 1]])
    draws = sample_prior(warp, 10_000, np.random.default_rng(4))
    assert stats.kstest(draws[:, 0], stats.uniform(0, 2).cdf).statistic < 0.0163
    assert stats.kstest(draws[:, 1], stats.uniform(-1, 2).cdf).statistic < 0.0163


def test_prior_search_truncated_normal_marginal():
    prior = PriorSpec.truncated_normal(0.4, 1.0, -2.0, 2.0)
    draws = sample_prior(WarpMap((prior,)), 10_000, np.random.default_rng(5))[:, 0]
    assert stats.kstest(draws, lambda x: cdf(prior, x)).statistic < 0.0163


def test_prior_search_trace():
    warp = make_shifted_prior(BRANIN.bounds, (np.pi, 2.275), 0.0, 1.0)
    cfg = BoConfig(n_init=4, budget=30, seed=2)
    result = run_prior_search(BRANIN, BRANIN.bounds, warp, cfg)
    assert len(result.trace) == 30 and result.error is None
    assert np.all(np.diff(result.best_so_far) <= 0)
    initial = np.array([[0.0, 0.0], [1.0, 1.0]])
    seeded = run_prior_search(BRANIN, BRANIN.bounds, warp, cfg, initial=initial)
    np.testing.assert_array_equal(seeded.points[:2], initial)
    assert len(seeded.trace) == 30


def test_make_shifted_prior():
    warp = make_shifted_prior([[-2, 2]] * 3, [0.2] * 3, 0.05, 1.0)
    for prior in warp.dims:
        assert prior.mu == pytest.approx(0.4) and prior.sigma == 1.0
        assert (prior.a, prior.b) == (-2.0, 2.0)
    centred = make_shifted_prior([[-2, 2]], [0.2], 0.0, 1.0)
    assert centred.dims[0].mu == 0.2
    clamped = make_shifted_prior([[0, 1]], [0.95], 0.2, 0.5)
    assert clamped.dims[0].mu == 1.0
    with pytest.raises(ValueError):
        make_shifted_prior([[0, 1]], [2.0], 0.1, 1.0)
    with pytest.raises(ValueError):
        make_shifted_prior([[0, 1]], [0.5], 1.0, 1.0)
