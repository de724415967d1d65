import math

import numpy as np
import pytest

from ehpolicy.errors import DomainError
from ehpolicy.services.arrivals import bernoulli_full, constant, uniform_cont
from ehpolicy.services.bounds import upper_bound
from ehpolicy.services.dp import DpConfig, solve_dp
from ehpolicy.services.sim import ffp_renewal_value
from ehpolicy.services.utility import builtin_names, make_builtin

COARSE = DpConfig(grid_points=101, action_points=51)


def grid_slack(u, battery, cfg):
    h = battery / (cfg.grid_points - 1)
    return 2.0 * h * float(u.deriv(h))


def test_config_validation():
    with pytest.raises(DomainError):
        DpConfig(grid_points=1)
    with pytest.raises(DomainError):
        DpConfig(vi_tol=0.0)


@pytest.mark.parametrize('name', builtin_names())
def test_constant_arrivals_give_u_of_e(name):
    u = make_builtin(name)
    solution = solve_dp(u, constant(2.0, 10.0))
    assert solution.converged
    assert solution.gain == pytest.approx(float(u(2.0)), abs=1e-6)


def test_sqrt_bernoulli_matches_closed_form():
    u = make_builtin('sqrt')
    spec = bernoulli_full(0.5, 1.0)
    solution = solve_dp(u, spec)
    assert solution.converged
    assert solution.gain == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-3)
    assert solution.gain <= upper_bound(u, spec.mean) + 1e-6


def test_log_awgn_gain_between_ffp_and_upper_bound():
    u = make_builtin('log_awgn')
    spec = bernoulli_full(0.3, 4.0)
    solution = solve_dp(u, spec, COARSE)
    ffp = ffp_renewal_value(u, spec)
    top = upper_bound(u, spec.mean)
    assert 0.5 * top <= ffp - grid_slack(u, 4.0, COARSE) <= solution.gain <= top + 1e-6


def test_continuous_arrivals_are_quantized():
    u = make_builtin('log_awgn')
    spec = uniform_cont(0.0, 10.0, 10.0)
    solution = solve_dp(u, spec, COARSE)
    assert solution.converged
    assert 0.5 * upper_bound(u, spec.mean) <= solution.gain <= upper_bound(u, spec.mean) + 1e-6


def test_greedy_policy_is_feasible():
    solution = solve_dp(make_builtin('ratio_sat'), bernoulli_full(0.4, 2.0), COARSE)
    grid, actions = solution.policy.grid, solution.policy.actions
    assert np.all(actions >= 0.0)
    assert np.all(actions <= grid + 1e-12)
    assert solution.bias[-1] == 0.0
    summary = solution.as_dict(include_policy=True)
    assert summary['grid_points'] == 101
    assert len(summary['policy']['action']) == 101


def test_iteration_cap_returns_unconverged():
    solution = solve_dp(make_builtin('log_awgn'), bernoulli_full(0.1, 1.0),
                        DpConfig(grid_points=51, action_points=21, max_iters=2))
    assert not solution.converged
    assert solution.iters == 2


def test_grid_refinement_trend():
    u = make_builtin('sqrt')
    spec = bernoulli_full(0.5, 1.0)
    target = 1.0 / math.sqrt(3.0)
    errors = [abs(solve_dp(u, spec, DpConfig(grid_points=g, action_points=201)).gain - target)
              for g in (101, 401)]
    assert errors[1] <= errors[0]
