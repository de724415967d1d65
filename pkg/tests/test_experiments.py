import math

import numpy as np
import pytest

from ehpolicy.services.arrivals import bernoulli_full, constant, uniform_cont
from ehpolicy.services.dp import DpConfig
from ehpolicy.services.experiments import check_multiplicative_sandwich, compare, fraction_sweep, reproduce
from ehpolicy.services.sim import SimConfig
from ehpolicy.services.utility import make_builtin

SMALL_SIM = SimConfig(horizon_n=5_000, trials=10, seed=0)
SQRT_OPTIMUM = 1.0 / math.sqrt(3.0)


def test_compare_sqrt_bernoulli():
    rows = compare(make_builtin('sqrt'), bernoulli_full(0.5, 1.0), SMALL_SIM)
    by_name = {r.policy: r for r in rows}
    assert set(by_name) == {'ffp(q)', 'ffp(theta*)', 'bernoulli_opt', 'dp'}
    assert [r.value for r in rows] == sorted((r.value for r in rows), reverse=True)
    assert rows[-1].policy == 'ffp(q)'
    for name in ('ffp(theta*)', 'bernoulli_opt', 'dp'):
        assert by_name[name].value == pytest.approx(SQRT_OPTIMUM, abs=1e-3)
    assert by_name['ffp(theta*)'].details['theta'] == pytest.approx(0.75, abs=0.01)
    # sqrt has no finite additive gap
    assert by_name['ffp(q)'].alpha is None


def test_compare_constant_has_no_deficit():
    u = make_builtin('log_awgn')
    rows = compare(u, constant(2.0, 10.0), SimConfig(horizon_n=200, trials=2, seed=0),
                   DpConfig(grid_points=101, action_points=51))
    by_name = {r.policy: r for r in rows}
    assert 'bernoulli_opt' not in by_name
    assert by_name['dp'].deficit == pytest.approx(0.0, abs=1e-6)
    assert by_name['ffp(q)'].deficit == pytest.approx(0.0, abs=1e-9)


@pytest.mark.slow
def test_compare_uniform_ratios():
    rows = compare(make_builtin('log_awgn'), uniform_cont(0.0, 10.0, 10.0), SMALL_SIM)
    assert all(r.ratio >= 0.5 for r in rows)


def test_fraction_sweep_peaks_at_p_hat():
    thetas = np.linspace(0.05, 1.0, 20)
    rows = fraction_sweep(make_builtin('sqrt'), bernoulli_full(0.5, 1.0), thetas)
    best_theta = max(rows, key=lambda r: r[1])[0]
    assert best_theta == pytest.approx(0.75)


def test_sandwich_criterion_checks_general_arrivals():
    criterion = check_multiplicative_sandwich(quick=True)
    assert criterion.passed, criterion.details['failures']
    rows = criterion.details['monte_carlo']
    assert len(rows) == 12
    assert all(row['within_sandwich'] and 'matched_bernoulli_value' in row for row in rows)


def test_reproduce_fast_criteria():
    result = reproduce(quick=True, only=[1, 2, 5, 9, 10])
    assert [c['id'] for c in result['criteria']] == [1, 2, 5, 9, 10]
    failing = [c for c in result['criteria'] if not c['pass']]
    assert not failing, failing
    assert result['pass']


@pytest.mark.slow
def test_reproduce_everything():
    result = reproduce()
    failing = [c for c in result['criteria'] if not c['pass']]
    assert not failing, failing
