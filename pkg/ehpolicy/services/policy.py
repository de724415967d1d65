"""
Power-control policy services

Policies map the battery level b (and, for renewal-indexed schedules, the
slot index k within the current renewal epoch, starting at 1 on the slot
where a full-battery arrival lands) to a transmit power 0 <= g <= b.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ehpolicy.errors import ConfigError, DomainError, NumericalError, UnsupportedOperationError
from ehpolicy.numerics import bisect_root, golden_section_max
from ehpolicy.services.arrivals import ArrivalKind, ArrivalSpec
from ehpolicy.services.utility import UtilityFunction
from ehpolicy.utils import parse_spec

logger = logging.getLogger(__name__)

TERM_TOL = 1e-12  # relative to B
WEIGHT_TOL = 1e-15
LAMBDA_RTOL = 1e-12
BISECT_MAXITER = 200
MAX_TERMS = 2_000_000
MAX_N = 100_000
THETA_MIN = 0.001
FRACTION_TOL = 1e-7
_BLOCK = 512


class PolicyKind:
    FIXED_FRACTION = 'fixed_fraction'
    BERNOULLI_OPTIMAL = 'bernoulli_optimal'
    TABULAR = 'tabular'


def renewal_weight(p: float, t):
    """p (1-p)^(t-1): probability that a renewal epoch lasts at least t slots, times p"""
    t = np.asarray(t, dtype=float)
    return p * np.power(1.0 - p, t - 1.0)


def ffp_action(theta: float, b):
    """Fixed-fraction action theta * b"""
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"Fraction must lie in [0, 1], got {theta}")
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise DomainError("Battery level must be nonnegative")
    g = theta * b
    return g if g.ndim else float(g)


@dataclass(frozen=True)
class FractionSchedule:
    """Per-renewal powers of a fixed fraction from a full battery: theta (1-theta)^(t-1) B"""
    theta: float
    battery: float

    def power(self, t):
        t = np.asarray(t, dtype=float)
        return self.theta * np.power(1.0 - self.theta, t - 1.0) * self.battery


def ffp_schedule(theta: float, battery: float) -> FractionSchedule:
    """Renewal schedule of FFP(theta) started from a full battery"""
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"Fraction must lie in [0, 1], got {theta}")
    return FractionSchedule(float(theta), float(battery))


@dataclass(frozen=True)
class FixedFractionPolicy:
    theta: float
    kind: str = PolicyKind.FIXED_FRACTION
    metadata: dict = field(default_factory=dict)
    renewal_indexed = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"Fraction must lie in [0, 1], got {self.theta}")

    def action(self, b, k=None):
        return self.theta * np.asarray(b, dtype=float)

    def schedule(self, battery: float) -> FractionSchedule:
        return ffp_schedule(self.theta, battery)

    def describe(self) -> dict:
        return {"kind": self.kind, "theta": self.theta, **self.metadata}


@dataclass(frozen=True, eq=False)
class BernoulliSchedule:
    """Optimal renewal schedule g_t = f(lambda / (p (1-p)^(t-1))) under Bernoulli-full arrivals

    N is None for the infinite-support branch; prefix holds the powers that
    were materialized (until a term fell below TERM_TOL * B).
    """
    u: UtilityFunction
    p: float
    battery: float
    lam: float
    N: Optional[int]
    prefix: np.ndarray
    kind: str = PolicyKind.BERNOULLI_OPTIMAL
    metadata: dict = field(default_factory=dict)
    renewal_indexed = True

    def power(self, t):
        t = np.asarray(t)
        scalar = t.ndim == 0
        t = np.atleast_1d(t).astype(np.int64)
        out = np.zeros(t.shape, dtype=float)
        inside = (t >= 1) & (t <= len(self.prefix))
        out[inside] = self.prefix[t[inside] - 1]
        if self.N is None:
            beyond = t > len(self.prefix)
            if np.any(beyond):
                out[beyond] = _powers(self.u, self.lam, renewal_weight(self.p, t[beyond]))
        return float(out[0]) if scalar else out

    def action(self, b, k):
        return self.power(k)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "N": self.N if self.N is not None else "inf",
            "p": self.p,
            "battery": self.battery,
            **self.metadata,
        }


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Action table on a battery grid, linearly interpolated in between"""
    grid: np.ndarray
    actions: np.ndarray
    kind: str = PolicyKind.TABULAR
    metadata: dict = field(default_factory=dict)
    renewal_indexed = False

    def __post_init__(self):
        if np.any(self.actions < -1e-12) or np.any(self.actions > self.grid + 1e-12):
            raise DomainError("Tabular actions must satisfy 0 <= action(b) <= b")

    def action(self, b, k=None):
        return np.interp(b, self.grid, self.actions)

    def describe(self) -> dict:
        return {"kind": self.kind, "grid_points": len(self.grid), **self.metadata}


def _powers(u: UtilityFunction, lam: float, weights) -> np.ndarray:
    """f(lam / w), zero where w = 0 or lam / w >= u'(0)"""
    weights = np.asarray(weights, dtype=float)
    out = np.zeros(weights.shape, dtype=float)
    live = weights > 0
    if not np.any(live):
        return out
    with np.errstate(over='ignore', divide='ignore'):
        y = lam / weights[live]
    if math.isfinite(u.deriv_at_zero):
        below = y < u.deriv_at_zero
        g = np.zeros(y.shape, dtype=float)
        if np.any(below):
            g[below] = u.inv_deriv(y[below])
        out[live] = np.maximum(g, 0.0)
    else:
        out[live] = np.maximum(u.inv_deriv(y), 0.0)
    return out


def _infinite_terms(u: UtilityFunction, lam: float, p: float, battery: float) -> np.ndarray:
    """Powers for t = 1, 2, ... until a term drops below TERM_TOL * B"""
    cutoff = TERM_TOL * battery
    blocks = []
    start = 1
    while start <= MAX_TERMS:
        t = np.arange(start, start + _BLOCK)
        g = _powers(u, lam, renewal_weight(p, t))
        small = np.nonzero(g < cutoff)[0]
        if small.size:
            blocks.append(g[:small[0]])
            return np.concatenate(blocks)
        blocks.append(g)
        start += _BLOCK
    raise NumericalError(f"Schedule did not decay below {cutoff:g} within {MAX_TERMS} slots")


def budget_residual(u: UtilityFunction, lam: float, p: float, B: float, N: Optional[int] = None) -> float:
    """sum_t f(lam / (p (1-p)^(t-1))) - B over N slots, or until the powers decay when N is None"""
    if N is None:
        return float(np.sum(_infinite_terms(u, lam, p, B))) - B
    return float(np.sum(_powers(u, lam, renewal_weight(p, np.arange(1, N + 1))))) - B


def solve_bernoulli_optimal(u: UtilityFunction, p: float, B: float) -> BernoulliSchedule:
    """KKT solution of the renewal problem under Bernoulli-full arrivals"""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"Arrival probability must lie in (0, 1], got {p}")
    if not B > 0:
        raise DomainError(f"Battery capacity must be positive, got {B}")
    if u.inv_deriv is None:
        raise UnsupportedOperationError(f"Utility '{u.name}' has no inverse derivative")

    if u.infinite_slope_at_zero:
        lam = bisect_root(lambda lam: budget_residual(u, lam, p, B), rtol=LAMBDA_RTOL, maxiter=BISECT_MAXITER)
        prefix = _infinite_terms(u, lam, p, B)
        logger.info("bernoulli-opt %s p=%g B=%g: infinite branch, lambda=%.12g, %d terms",
                    u.name, p, B, lam, len(prefix))
        return BernoulliSchedule(u=u, p=p, battery=B, lam=lam, N=None, prefix=prefix,
                                 metadata={"branch": "infinite"})

    slope = u.deriv_at_zero
    for N in range(1, MAX_N + 1):
        weights = renewal_weight(p, np.arange(1, N + 1))
        lam = bisect_root(lambda lam, N=N: budget_residual(u, lam, p, B, N),
                          rtol=LAMBDA_RTOL, maxiter=BISECT_MAXITER)
        next_weight = float(renewal_weight(p, N + 1))
        if lam >= next_weight * slope and np.all(lam < weights * slope):
            prefix = _powers(u, lam, weights)
            logger.info("bernoulli-opt %s p=%g B=%g: finite branch, N=%d, lambda=%.12g",
                        u.name, p, B, N, lam)
            return BernoulliSchedule(u=u, p=p, battery=B, lam=lam, N=N, prefix=prefix,
                                     metadata={"branch": "finite"})
    raise NumericalError(f"No KKT point with N <= {MAX_N}")


def kkt_residuals(schedule: BernoulliSchedule) -> dict:
    """Budget and stationarity residuals of a Bernoulli-optimal schedule"""
    g = schedule.prefix
    t = np.arange(1, len(g) + 1)
    positive = g > 0
    marginal = np.asarray(schedule.u.deriv(g[positive]), dtype=float) * renewal_weight(schedule.p, t[positive])
    return {
        "budget": abs(float(np.sum(g)) - schedule.battery),
        "stationarity": float(np.max(np.abs(marginal - schedule.lam))) if positive.any() else 0.0,
    }


def _truncation_length(p: float) -> int:
    if p >= 1.0:
        return 1
    if p <= 0.0:
        raise DomainError("Arrival probability must be positive")
    T = 1 + int(math.floor(math.log(WEIGHT_TOL / p) / math.log1p(-p))) if p > WEIGHT_TOL else 1
    if T > MAX_TERMS * 5:
        raise NumericalError(f"Renewal series needs {T} terms for p={p}")
    return max(T, 1)


def evaluate_bernoulli(schedule, u: UtilityFunction, p: float) -> float:
    """Exact long-run average utility sum_t p (1-p)^(t-1) u(g_t) under Bernoulli-full arrivals"""
    T = _truncation_length(p)
    t = np.arange(1, T + 1)
    g = np.asarray(schedule.power(t), dtype=float)
    return float(np.sum(renewal_weight(p, t) * np.asarray(u(g), dtype=float)))


def policy_from_spec(spec: str, u: UtilityFunction, arrivals: ArrivalSpec):
    """'ffp' (theta = q), 'ffp:theta=0.3' or 'bernoulli_opt'"""
    name, params = parse_spec(spec)
    if name == 'ffp':
        theta = params.get('theta', arrivals.fraction_q)
        return FixedFractionPolicy(theta=float(theta))
    if name in ('bernoulli_opt', 'bernoulli-opt'):
        if arrivals.kind != ArrivalKind.BERNOULLI_FULL:
            raise UnsupportedOperationError("bernoulli_opt needs Bernoulli-full arrivals")
        return solve_bernoulli_optimal(u, arrivals.params['p'], arrivals.battery_cap)
    raise ConfigError(f"Unknown policy '{name}'")


@dataclass(frozen=True)
class FractionResult:
    theta_star: float
    value: float
    value_at_q: float
    evaluator: str


def optimize_fraction(u: UtilityFunction, spec: ArrivalSpec, evaluator: str = 'renewal',
                      sim_config=None) -> FractionResult:
    """Best fixed fraction theta in [0.001, 1] by golden-section search"""
    from ehpolicy.services import sim

    if evaluator == 'renewal':
        value_of = sim.renewal_evaluator(u, spec)
    elif evaluator == 'mc':
        value_of = sim.monte_carlo_evaluator(u, spec, sim_config)
    else:
        raise ConfigError(f"Unknown evaluator '{evaluator}'")

    theta, value = golden_section_max(lambda th: np.vectorize(value_of, otypes=[float])(th),
                                      THETA_MIN, 1.0, tol=FRACTION_TOL)
    q = min(max(spec.fraction_q - 1e-9, THETA_MIN), 1.0)
    value_at_q = value_of(q)
    candidates = [(float(value), float(theta)), (value_of(1.0), 1.0), (value_at_q, q)]
    best_value, best_theta = max(candidates, key=lambda c: (c[0], -abs(c[1] - theta)))
    return FractionResult(theta_star=best_theta, value=best_value, value_at_q=value_at_q,
                          evaluator=evaluator)
