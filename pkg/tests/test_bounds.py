import math

import numpy as np
import pytest

from ehpolicy.errors import DomainError, UnsupportedOperationError
from ehpolicy.services.arrivals import bernoulli_full, discrete, uniform_cont
from ehpolicy.services import bounds
from ehpolicy.services.bounds import (
    additive_gap,
    asymptotic_sweep,
    bounded_alpha_lower_bound,
    build_gap_report,
    ffp_deficit,
    general_arrival_check,
    mult_gap_check,
    optimize_gap_over_q,
    sweep_decreasing,
    to_bits,
    upper_bound,
)
from ehpolicy.services.sim import SimConfig, ffp_renewal_value
from ehpolicy.services.utility import HInfResult, builtin_names, make_builtin

QS = [0.1, 0.5, 0.9]
HALF_LN2 = 0.5 * math.log(2.0)
MUS = 10.0 ** np.arange(1, 7)


def log_awgn_alpha(q):
    return 0.5 * math.log(1.0 - q) * (1.0 - q) / q


def test_upper_bound_examples():
    assert upper_bound(make_builtin('log_awgn'), 0.0) == 0.0
    assert upper_bound(make_builtin('sqrt'), 4.0) == pytest.approx(2.0)
    assert upper_bound(make_builtin('log_awgn'), 1.0) == pytest.approx(HALF_LN2)
    with pytest.raises(DomainError):
        upper_bound(make_builtin('sqrt'), -1.0)


def test_mult_gap_check_log_awgn():
    u = make_builtin('log_awgn')
    spec = bernoulli_full(0.2, 50.0)
    check = mult_gap_check(ffp_renewal_value(u, spec), u, spec.mean)
    assert check['pass']
    assert 0.5 <= check['ratio'] <= 1.0


@pytest.mark.parametrize('name', builtin_names())
@pytest.mark.parametrize('q', [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize('battery', [1.0, 10.0, 100.0])
def test_ffp_within_half_of_upper_bound(name, q, battery):
    u = make_builtin(name)
    spec = bernoulli_full(q, battery)
    value, top = ffp_renewal_value(u, spec), upper_bound(u, spec.mean)
    assert 0.5 * top <= value <= top


@pytest.mark.parametrize('q', QS)
def test_log_awgn_alpha_closed_form(q):
    gap = additive_gap(make_builtin('log_awgn'), q)
    assert gap.converged
    assert gap.alpha == pytest.approx(log_awgn_alpha(q), abs=1e-9)
    assert gap.ratio_r == pytest.approx(1.0 - q, abs=1e-3)
    assert gap.alpha_bits == pytest.approx(gap.alpha / math.log(2.0))


def test_alpha_numerical_path_agrees():
    u = make_builtin('log_awgn').without_analytic_h()
    assert additive_gap(u, 0.5).alpha == pytest.approx(log_awgn_alpha(0.5), abs=1e-6)


def test_sqrt_has_no_additive_gap():
    gap = additive_gap(make_builtin('sqrt'), 0.5)
    assert gap.alpha == -math.inf
    assert not gap.converged
    assert gap.notes


def test_additive_gap_edges():
    gap = additive_gap(make_builtin('log_awgn'), 1.0)
    assert gap.alpha == 0.0
    with pytest.raises(DomainError):
        additive_gap(make_builtin('log_awgn'), 0.0)


def test_bounded_alpha_lower_bound():
    u = make_builtin('exp_sat', beta=1.0)
    assert bounded_alpha_lower_bound(u, 0.5) == pytest.approx(-1.0 / 3.0)
    for q in (0.2, 0.5, 0.8):
        assert additive_gap(u, q).alpha >= bounded_alpha_lower_bound(u, q) - 1e-9
    with pytest.raises(UnsupportedOperationError):
        bounded_alpha_lower_bound(make_builtin('sqrt'), 0.5)


@pytest.mark.parametrize('name', ['log_awgn', 'exp_sat', 'ratio_sat', 'log_sqrt'])
@pytest.mark.parametrize('q', [0.2, 0.5, 0.8])
def test_additive_lower_bound_holds(name, q):
    u = make_builtin(name)
    alpha = additive_gap(u, q).alpha
    assert math.isfinite(alpha)
    for mu in (0.1, 1.0, 10.0, 100.0):
        value = ffp_renewal_value(u, bernoulli_full(q, mu / q))
        assert value >= upper_bound(u, mu) + alpha - 1e-9


def test_worst_case_gap_log_awgn():
    opt = optimize_gap_over_q(make_builtin('log_awgn'))
    assert 0.70 <= abs(opt.alpha_star_bits) <= 0.74
    assert opt.alpha_star == pytest.approx(-0.5, abs=2e-3)
    assert opt.alpha_best >= opt.alpha_star


def test_log_sqrt_gap_finite_at_large_q():
    # h(theta) = ln(theta) / 4 for log_sqrt, half the log_awgn kernel
    gap = additive_gap(make_builtin('log_sqrt'), 0.95)
    assert gap.converged
    assert math.isfinite(gap.alpha)
    assert gap.alpha == pytest.approx(0.5 * log_awgn_alpha(0.95), abs=1e-5)


def test_missing_h_after_summation_only_shortens_ratio_window(monkeypatch):
    real = bounds.h_inf_many

    def h_missing_below(u, thetas):
        missing = HInfResult(value=-math.inf, arg_inf=math.inf, exists=False, at_infinity=True)
        return [res if theta >= 1e-16 else missing for theta, res in zip(thetas, real(u, thetas))]

    monkeypatch.setattr(bounds, 'h_inf_many', h_missing_below)
    gap = additive_gap(make_builtin('log_awgn'), 0.9)
    assert gap.converged
    assert gap.alpha == pytest.approx(log_awgn_alpha(0.9), abs=1e-12)
    assert gap.ratio_r == pytest.approx(0.1, abs=1e-3)
    assert any('ratio window ends' in note for note in gap.notes)


@pytest.mark.slow
def test_worst_case_gap_other_utilities():
    opt = optimize_gap_over_q(make_builtin('log_sqrt'))
    assert math.isfinite(opt.alpha_star)
    assert opt.alpha_star == pytest.approx(-0.25, abs=2e-3)
    assert optimize_gap_over_q(make_builtin('exp_sat')).alpha_star >= -0.5
    with pytest.raises(UnsupportedOperationError):
        optimize_gap_over_q(make_builtin('sqrt'))


def test_to_bits_only_for_nats():
    assert to_bits(math.log(2.0), make_builtin('log_awgn')) == pytest.approx(1.0)
    assert to_bits(1.0, make_builtin('sqrt')) is None


def test_deficits_shrink_for_class_b():
    for name in ('sqrt_log', 'exp_sat'):
        rows = asymptotic_sweep(make_builtin(name), 0.5, MUS)
        assert sweep_decreasing(rows)
        assert rows[-1].deficit < rows[0].deficit
    assert ffp_deficit(make_builtin('exp_sat'), 0.5, 1e3) < 1e-3
    assert asymptotic_sweep(make_builtin('exp_sat'), 0.5, MUS)[-1].deficit < 1e-2


def test_log_awgn_deficit_stays_constant():
    rows = asymptotic_sweep(make_builtin('log_awgn'), 0.5, MUS)
    assert rows[-1].deficit == pytest.approx(HALF_LN2, abs=1e-3)


def test_sweep_rows_are_consistent():
    u = make_builtin('ratio_sat')
    for row in asymptotic_sweep(u, 0.3, [1.0, 10.0]):
        assert row.upper == pytest.approx(upper_bound(u, row.mu))
        assert row.ffp_value == pytest.approx(ffp_renewal_value(u, bernoulli_full(0.3, row.mu / 0.3)), abs=1e-12)


def test_gap_report():
    report = build_gap_report(make_builtin('log_awgn'), 0.5, battery=2.0)
    assert report.mu == pytest.approx(1.0)
    assert report.upper_bound == pytest.approx(HALF_LN2)
    assert 0.5 <= report.mult_ratio <= 1.0
    assert report.alpha == pytest.approx(log_awgn_alpha(0.5), abs=1e-9)
    assert report.utility_class == 'A'
    assert report.policy_value >= report.additive_lower - 1e-9


@pytest.mark.parametrize('spec', [
    uniform_cont(0.0, 10.0, 10.0),
    discrete([0.0, 2.0, 5.0], [0.5, 0.3, 0.2], 5.0),
])
def test_general_arrivals_dominate_bernoulli(spec):
    check = general_arrival_check(make_builtin('log_awgn'), spec, SimConfig(horizon_n=10_000, trials=30, seed=2))
    assert check['within_sandwich']
    assert check['dominates_bernoulli']
