import math

import numpy as np
import pytest

from ehpolicy.errors import ConfigError, DomainError, UnsupportedOperationError
from ehpolicy.services.utility import (
    UtilityFunction,
    bounded_h_lower_bound,
    builtin_names,
    classify,
    h_inf,
    h_inf_many,
    h_theta,
    make_builtin,
    register_utility,
    unregister_utility,
    utility_from_spec,
    validate_utility,
)

BUILTINS = ['log_awgn', 'exp_sat', 'ratio_sat', 'sqrt_log', 'log_sqrt', 'sqrt']
ROUND_TRIP_X = np.logspace(-6, 6, 61)


def _linear():
    return UtilityFunction(name='linear', eval=lambda x: np.asarray(x, dtype=float),
                           deriv=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                           inv_deriv=None, deriv_at_zero=1.0)


def test_registry_lists_builtins():
    assert builtin_names() == sorted(BUILTINS)


@pytest.mark.parametrize('name', BUILTINS)
def test_builtin_shape(name):
    u = make_builtin(name)
    assert float(u(0.0)) == 0.0
    assert validate_utility(u) == []


@pytest.mark.parametrize('name', BUILTINS)
def test_inverse_derivative_round_trip(name):
    u = make_builtin(name)
    # exp_sat slopes underflow long before x = 1e6
    x = ROUND_TRIP_X[ROUND_TRIP_X <= 30.0] if name == "exp_sat" else ROUND_TRIP_X
    back = np.asarray(u.inv_deriv(u.deriv(x)), dtype=float)
    np.testing.assert_allclose(back, x, rtol=1e-9)


def test_sqrt_inverse_derivative_closed_form():
    u = make_builtin('sqrt')
    y = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(u.inv_deriv(y), 1.0 / (4.0 * y ** 2))


def test_bounded_builtins_carry_upper_bound():
    assert make_builtin('exp_sat', beta=1.0).upper_bound == 1.0
    assert make_builtin('ratio_sat').upper_bound == 1.0
    assert not make_builtin('log_awgn').is_bounded


def test_deriv_at_zero():
    assert make_builtin('log_awgn').deriv_at_zero == 0.5
    assert make_builtin('exp_sat', beta=2.0).deriv_at_zero == 2.0
    assert make_builtin('sqrt').infinite_slope_at_zero
    assert make_builtin('sqrt_log').infinite_slope_at_zero


def test_unknown_name_and_bad_beta():
    with pytest.raises(ConfigError):
        make_builtin('cubic')
    with pytest.raises(DomainError):
        make_builtin('exp_sat', beta=0.0)
    with pytest.raises(ConfigError):
        utility_from_spec('ratio_sat:gamma=2')


def test_spec_parsing():
    u = utility_from_spec('exp_sat:beta=2')
    assert u.params == {'beta': 2.0}
    assert float(u(1.0)) == pytest.approx(1.0 - math.exp(-2.0))


def test_h_theta_examples():
    u = make_builtin('log_awgn')
    assert h_theta(u, 0.5, 1.0) == pytest.approx(0.5 * math.log(1.5) - 0.5 * math.log(2.0), abs=1e-12)
    assert h_theta(u, 0.5, 1.0) == pytest.approx(-0.1438, abs=1e-4)
    for name in BUILTINS:
        v = make_builtin(name)
        assert h_theta(v, 1.0, 7.0) == 0.0
        assert h_theta(v, 0.5, 0.0) == 0.0
        assert np.all(h_theta(v, 0.3, ROUND_TRIP_X) <= 0.0)


def test_h_theta_domain():
    u = make_builtin('sqrt')
    with pytest.raises(DomainError):
        h_theta(u, 1.5, 1.0)
    with pytest.raises(DomainError):
        h_theta(u, 0.5, -1.0)


def test_h_inf_analytic_log_awgn():
    res = h_inf(make_builtin('log_awgn'), 0.25)
    assert res.exists
    assert res.at_infinity and res.arg_inf == math.inf
    assert res.value == pytest.approx(0.5 * math.log(0.25))
    assert res.value == pytest.approx(-0.6931, abs=1e-4)


def test_h_inf_numerical_log_awgn():
    res = h_inf(make_builtin('log_awgn').without_analytic_h(), 0.25)
    assert res.exists
    assert res.value == pytest.approx(0.5 * math.log(0.25), abs=1e-6)


def test_h_inf_sqrt_does_not_exist():
    res = h_inf(make_builtin('sqrt'), 0.5)
    assert not res.exists
    assert res.value == -math.inf


def test_h_inf_bounded_utility():
    u = make_builtin('exp_sat', beta=1.0)
    res = h_inf(u, 0.5)
    assert res.exists and not res.at_infinity
    assert res.value >= bounded_h_lower_bound(u, 0.5)
    # interior minimum of e^{-x/2} - e^{-x} is -1/4 at x = 2 ln 2
    assert res.value == pytest.approx(-0.25, abs=1e-9)
    assert res.arg_inf == pytest.approx(2.0 * math.log(2.0), rel=1e-4)
    assert h_inf(u, 0.9).value >= -0.1


def test_h_inf_theta_domain():
    with pytest.raises(DomainError):
        h_inf(make_builtin('log_awgn'), 1.0)
    with pytest.raises(DomainError):
        h_inf(make_builtin('log_awgn'), 0.0)


def test_h_inf_many_theta_range():
    u = make_builtin('ratio_sat')
    assert h_inf_many(u, [1.0])[0].value == 0.0
    with pytest.raises(DomainError, match='theta <= 1'):
        h_inf_many(u, [1.5])
    with pytest.raises(DomainError):
        h_inf_many(u, [0.0])


@pytest.mark.parametrize('theta', [1e-23, 7.62939e-23, 1e-40])
def test_h_inf_tiny_theta(theta):
    # the infimum sits far past the grid when theta x_max << 1
    res = h_inf(make_builtin('log_sqrt'), theta)
    assert res.exists and res.at_infinity
    assert res.value == pytest.approx(0.25 * math.log(theta), abs=1e-5)
    assert res.value >= 0.5 * math.log(theta)

    res = h_inf(make_builtin('log_awgn').without_analytic_h(), theta)
    assert res.exists
    assert res.value == pytest.approx(0.5 * math.log(theta), abs=1e-6)

    assert not h_inf(make_builtin('sqrt'), theta).exists


@pytest.mark.parametrize('name', BUILTINS)
def test_class_b_has_finite_h_everywhere(name):
    u = make_builtin(name)
    if classify(u).utility_class != 'B':
        pytest.skip('class A')
    thetas = np.linspace(0.01, 0.99, 99)
    assert all(res.exists and math.isfinite(res.value) for res in h_inf_many(u, thetas))


def test_h_inf_many_matches_scalar():
    u = make_builtin('ratio_sat')
    thetas = [0.2, 0.5, 0.8]
    many = h_inf_many(u, thetas)
    for theta, res in zip(thetas, many):
        assert res.value == pytest.approx(h_inf(u, theta).value, abs=1e-12)


def test_log_sqrt_h_lower_bound():
    u = make_builtin('log_sqrt')
    for res, theta in zip(h_inf_many(u, [0.1, 0.4, 0.7]), [0.1, 0.4, 0.7]):
        assert res.exists
        assert res.value >= 0.5 * math.log(theta) - 1e-9


@pytest.mark.parametrize('name,expected', [
    ('log_awgn', 'A'), ('log_sqrt', 'A'), ('sqrt', 'A'),
    ('exp_sat', 'B'), ('ratio_sat', 'B'), ('sqrt_log', 'B'),
])
def test_classify(name, expected):
    result = classify(make_builtin(name))
    assert result.utility_class == expected
    assert len(result.evidence) == 10
    assert classify(make_builtin(name)).as_dict() == result.as_dict()


def test_bounded_h_lower_bound():
    u = make_builtin('exp_sat', beta=1.0)
    assert bounded_h_lower_bound(u, 0.5) == -0.5
    assert bounded_h_lower_bound(make_builtin('ratio_sat'), 1.0) == 0.0
    assert bounded_h_lower_bound(u, 0.9) == pytest.approx(-0.1)
    with pytest.raises(UnsupportedOperationError):
        bounded_h_lower_bound(make_builtin('log_awgn'), 0.5)


def test_register_linear_utility():
    register_utility('linear', _linear)
    try:
        u = make_builtin('linear')
        assert float(u(3.0)) == 3.0
        with pytest.raises(ConfigError):
            register_utility('linear', _linear)
    finally:
        unregister_utility('linear')
    with pytest.raises(ConfigError):
        make_builtin('linear')


def test_register_rejects_convex_utility():
    def convex():
        return UtilityFunction(name='square', eval=lambda x: np.asarray(x, dtype=float) ** 2,
                               deriv=lambda x: 2 * np.asarray(x, dtype=float),
                               inv_deriv=None, deriv_at_zero=0.0)

    with pytest.raises(DomainError):
        register_utility('square', convex)
