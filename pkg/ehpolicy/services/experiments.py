"""
Experiment services: policy comparison tables, fraction sweeps and the
acceptance battery behind `eh-policy reproduce`
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ehpolicy.errors import EhPolicyError
from ehpolicy.services.arrivals import ArrivalKind, ArrivalSpec, bernoulli_full, constant, discrete, uniform_cont
from ehpolicy.services.bounds import (
    additive_gap,
    asymptotic_sweep,
    general_arrival_check,
    optimize_gap_over_q,
    sweep_decreasing,
    upper_bound,
)
from ehpolicy.services.dp import DpConfig, solve_dp
from ehpolicy.services.policy import (
    FixedFractionPolicy,
    evaluate_bernoulli,
    ffp_schedule,
    kkt_residuals,
    optimize_fraction,
    solve_bernoulli_optimal,
)
from ehpolicy.services.sim import SimConfig, ffp_renewal_value, monte_carlo_evaluator, renewal_evaluator, run
from ehpolicy.services.utility import UtilityFunction, builtin_names, classify, h_inf_many, make_builtin
from ehpolicy.utils import dumps

logger = logging.getLogger(__name__)

SEARCH_HORIZON = 20_000
SEARCH_TRIALS = 20
DP_TOL = 1e-6


@dataclass
class CompareRow:
    policy: str
    value: float
    ratio: float
    deficit: float
    ci_half_width: float = 0.0
    alpha: Optional[float] = None
    details: dict = field(default_factory=dict)


def _row(name: str, value: float, top: float, ci: float = 0.0, alpha=None, **details) -> CompareRow:
    return CompareRow(policy=name, value=float(value), ratio=float(value / top) if top > 0 else 1.0,
                      deficit=float(top - value), ci_half_width=float(ci), alpha=alpha, details=details)


def _ffp_value(u: UtilityFunction, spec: ArrivalSpec, theta: float, cfg: SimConfig) -> tuple[float, float]:
    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        return ffp_renewal_value(u, spec, theta), 0.0
    res = run(FixedFractionPolicy(theta), spec, u, cfg)
    return res.mean_reward, res.ci_half_width


def compare(u: UtilityFunction, spec: ArrivalSpec, cfg: SimConfig,
            dp_cfg: Optional[DpConfig] = None) -> list[CompareRow]:
    """FFP(q), FFP(theta*), Bernoulli-optimal (when applicable) and DP, best first

    Values are exact renewal values under Bernoulli-full arrivals and Monte
    Carlo estimates otherwise.
    """
    q = spec.fraction_q
    top = upper_bound(u, spec.mean)
    alpha = None
    if q > 0:
        gap = additive_gap(u, min(q, 1.0))
        alpha = gap.alpha if math.isfinite(gap.alpha) else None

    rows = []
    value, ci = _ffp_value(u, spec, q, cfg)
    rows.append(_row("ffp(q)", value, top, ci, alpha, theta=q))

    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        best = optimize_fraction(u, spec, evaluator='renewal')
        value, ci = best.value, 0.0
    else:
        search_cfg = SimConfig(horizon_n=min(cfg.horizon_n, SEARCH_HORIZON),
                               trials=min(cfg.trials, SEARCH_TRIALS), seed=cfg.seed)
        best = optimize_fraction(u, spec, evaluator='mc', sim_config=search_cfg)
        value, ci = _ffp_value(u, spec, best.theta_star, cfg)
    rows.append(_row("ffp(theta*)", value, top, ci, theta=best.theta_star))

    if spec.kind == ArrivalKind.BERNOULLI_FULL and spec.params['p'] > 0 and u.inv_deriv is not None:
        schedule = solve_bernoulli_optimal(u, spec.params['p'], spec.battery_cap)
        rows.append(_row("bernoulli_opt", evaluate_bernoulli(schedule, u, spec.params['p']), top,
                         **{"lambda": schedule.lam, "N": schedule.N if schedule.N is not None else "inf"}))

    solution = solve_dp(u, spec, dp_cfg or DpConfig())
    rows.append(_row("dp", solution.gain, top, iters=solution.iters, span=solution.span,
                     converged=solution.converged))

    rows.sort(key=lambda r: r.value, reverse=True)
    return rows


def fraction_sweep(u: UtilityFunction, spec: ArrivalSpec, thetas, evaluator: str = 'renewal',
                   cfg: Optional[SimConfig] = None) -> list[tuple[float, float]]:
    """Value of FFP(theta) over a grid of fractions"""
    value_of = renewal_evaluator(u, spec) if evaluator == 'renewal' else monte_carlo_evaluator(u, spec, cfg)
    return [(float(th), float(value_of(th))) for th in np.asarray(thetas, dtype=float)]


# ---- acceptance battery --------------------------------------------------

@dataclass
class Criterion:
    id: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "pass": self.passed, "details": self.details}


def _mc_config(quick: bool, seed: int) -> SimConfig:
    if quick:
        return SimConfig(horizon_n=10_000, trials=30, seed=seed)
    return SimConfig(horizon_n=100_000, trials=100, seed=seed)


def check_sqrt_closed_form() -> Criterion:
    details = {}
    ok = True
    u = make_builtin('sqrt')
    t = np.arange(1, 31)
    for p in (0.5, 0.1, 0.3, 0.9):
        schedule = solve_bernoulli_optimal(u, p, 1.0)
        p_hat = 1.0 - (1.0 - p) ** 2
        expected = ffp_schedule(p_hat, 1.0).power(t)
        rel = float(np.max(np.abs(schedule.power(t) - expected) / expected))
        res = kkt_residuals(schedule)
        passed = rel <= 1e-6 and res["budget"] <= 1e-8 and res["stationarity"] <= 1e-8
        details[str(p)] = {"p_hat": p_hat, "max_rel_error": rel, **res, "pass": passed}
        ok &= passed
    return Criterion(1, "sqrt fractional optimum", ok, details)


def check_log_awgn_gap() -> Criterion:
    u = make_builtin('log_awgn')
    opt = optimize_gap_over_q(u)
    ok = 0.70 <= abs(opt.alpha_star_bits) <= 0.74
    ratios = {}
    for q in (0.1, 0.5, 0.9):
        r = additive_gap(u, q).ratio_r
        ratios[str(q)] = r
        ok &= abs(r - (1.0 - q)) <= 1e-3
    return Criterion(2, "log_awgn additive gap", ok,
                     {"alpha_star": opt.alpha_star, "alpha_star_bits": opt.alpha_star_bits,
                      "q_star": opt.q_star, "ratio_r": ratios})


def check_multiplicative_sandwich(quick: bool = False, seed: int = 0) -> Criterion:
    failures = []
    for name in builtin_names():
        u = make_builtin(name)
        for q in np.round(np.arange(0.1, 1.0, 0.1), 10):
            for B in (1.0, 10.0, 100.0):
                spec = bernoulli_full(q, B)
                value, top = ffp_renewal_value(u, spec), upper_bound(u, spec.mean)
                if not 0.5 * top <= value <= top:
                    failures.append({"utility": name, "q": q, "battery": B, "value": value, "upper": top})
    cfg = _mc_config(quick, seed)
    mc = []
    for name in builtin_names():
        u = make_builtin(name)
        for spec in (uniform_cont(0.0, 10.0, 10.0), discrete([0.0, 2.0, 5.0], [0.5, 0.3, 0.2], 5.0)):
            check = general_arrival_check(u, spec, cfg)
            mc.append({"utility": name, "arrivals": spec.kind, **check})
            if not check["within_sandwich"]:
                failures.append(mc[-1])
    return Criterion(3, "multiplicative sandwich", not failures, {"failures": failures, "monte_carlo": mc})


def check_additive_bound() -> Criterion:
    failures = []
    checked = 0
    for name in ('log_awgn', 'exp_sat', 'ratio_sat', 'log_sqrt'):
        u = make_builtin(name)
        for q in (0.2, 0.5, 0.8):
            alpha = additive_gap(u, q).alpha
            if not math.isfinite(alpha):
                continue
            for mu in (0.1, 1.0, 10.0, 100.0):
                spec = bernoulli_full(q, mu / q)
                value = ffp_renewal_value(u, spec)
                checked += 1
                if value < upper_bound(u, mu) + alpha - 1e-9:
                    failures.append({"utility": name, "q": q, "mu": mu, "value": value, "alpha": alpha})
    return Criterion(4, "additive lower bound", not failures and checked > 0,
                     {"checked": checked, "failures": failures})


def check_classes() -> Criterion:
    expected = {'log_awgn': 'A', 'log_sqrt': 'A', 'sqrt': 'A', 'exp_sat': 'B', 'ratio_sat': 'B', 'sqrt_log': 'B'}
    got = {name: classify(make_builtin(name)).utility_class for name in expected}
    return Criterion(5, "class detection", got == expected, {"classes": got})


def check_asymptotic() -> Criterion:
    mus = 10.0 ** np.arange(1, 7)
    details = {}
    ok = True
    for name in ('sqrt_log', 'exp_sat'):
        rows = asymptotic_sweep(make_builtin(name), 0.5, mus)
        decreasing = sweep_decreasing(rows)
        small = rows[-1].deficit < 1e-2
        passed = decreasing and (small or name == 'sqrt_log')
        details[name] = {"deficits": [r.deficit for r in rows], "decreasing": decreasing, "pass": passed}
        ok &= passed
    rows = asymptotic_sweep(make_builtin('log_awgn'), 0.5, mus)
    target = 0.5 * math.log(2.0)
    passed = abs(rows[-1].deficit - target) <= 1e-3
    details['log_awgn'] = {"deficit": rows[-1].deficit, "target": target, "pass": passed}
    return Criterion(6, "asymptotic optimality", ok and passed, details)


def check_renewal_vs_mc(quick: bool = False, seed: int = 0) -> Criterion:
    u = make_builtin('log_awgn')
    spec = bernoulli_full(0.25, 8.0)
    exact = ffp_renewal_value(u, spec)
    res = run(FixedFractionPolicy(spec.fraction_q), spec, u, _mc_config(quick, seed))
    ok = abs(res.mean_reward - exact) <= res.ci_half_width + 1e-3 * exact
    return Criterion(7, "renewal and Monte Carlo agree", ok,
                     {"renewal": exact, "monte_carlo": res.mean_reward, "ci": res.ci_half_width})


def _grid_slack(u: UtilityFunction, battery: float, cfg: DpConfig) -> float:
    h = battery / (cfg.grid_points - 1)
    return 2.0 * h * float(u.deriv(h))


def check_dp(quick: bool = False) -> Criterion:
    cfg = DpConfig(grid_points=201, action_points=101) if quick else DpConfig()
    details = {}
    ok = True

    u = make_builtin('sqrt')
    spec = bernoulli_full(0.5, 1.0)
    gain = solve_dp(u, spec, cfg).gain
    optimal = evaluate_bernoulli(ffp_schedule(0.75, 1.0), u, 0.5)
    ffp = ffp_renewal_value(u, spec)
    passed = (abs(gain - optimal) <= 1e-3 and
              ffp - _grid_slack(u, 1.0, cfg) <= gain <= upper_bound(u, spec.mean) + DP_TOL)
    details['sqrt'] = {"gain": gain, "optimal": optimal, "ffp": ffp, "pass": passed}
    ok &= passed

    spec = constant(2.0, 10.0)
    for name in builtin_names():
        u = make_builtin(name)
        gain = solve_dp(u, spec, cfg).gain
        passed = abs(gain - float(u(2.0))) <= DP_TOL
        details[f"constant/{name}"] = {"gain": gain, "target": float(u(2.0)), "pass": passed}
        ok &= passed
    return Criterion(8, "dp oracle coherence", ok, details)


def check_h_shape() -> Criterion:
    thetas = np.round(np.arange(0.05, 1.0, 0.05), 10)
    tol = 1e-6
    details = {}
    ok = True
    for u in (make_builtin('log_awgn').without_analytic_h(), make_builtin('exp_sat'), make_builtin('ratio_sat')):
        h = np.array([r.value for r in h_inf_many(u, thetas)])
        nonpositive = bool(np.all(h <= tol))
        nondecreasing = bool(np.all(np.diff(h) >= -tol))
        concave = bool(np.all(h[1:-1] >= 0.5 * (h[:-2] + h[2:]) - tol))
        passed = nonpositive and nondecreasing and concave
        details[u.name] = {"nonpositive": nonpositive, "nondecreasing": nondecreasing,
                           "concave": concave, "pass": passed}
        ok &= passed
    return Criterion(9, "gap kernel shape", ok, details)


def check_determinism(seed: int = 0) -> Criterion:
    u = make_builtin('log_awgn')
    spec = uniform_cont(0.0, 10.0, 10.0)
    cfg = SimConfig(horizon_n=2_000, trials=5, seed=seed)
    first = dumps(run(FixedFractionPolicy(spec.fraction_q), spec, u, cfg).as_dict())
    second = dumps(run(FixedFractionPolicy(spec.fraction_q), spec, u, cfg).as_dict())
    return Criterion(10, "determinism", first == second, {"bytes": len(first)})


def reproduce(quick: bool = False, seed: int = 0, only: Optional[list[int]] = None) -> dict:
    """Run the acceptance battery; `quick` shrinks Monte Carlo and DP sizes"""
    battery: list[tuple[int, Callable[[], Criterion]]] = [
        (1, check_sqrt_closed_form),
        (2, check_log_awgn_gap),
        (3, lambda: check_multiplicative_sandwich(quick, seed)),
        (4, check_additive_bound),
        (5, check_classes),
        (6, check_asymptotic),
        (7, lambda: check_renewal_vs_mc(quick, seed)),
        (8, lambda: check_dp(quick)),
        (9, check_h_shape),
        (10, lambda: check_determinism(seed)),
    ]
    results = []
    for cid, check in battery:
        if only and cid not in only:
            continue
        try:
            result = check()
        except EhPolicyError as e:
            result = Criterion(cid, "error", False, {"error": str(e)})
        logger.info("criterion %d (%s): %s", cid, result.name, "pass" if result.passed else "FAIL")
        results.append(result)
    return {"criteria": [r.as_dict() for r in results], "pass": all(r.passed for r in results)}
