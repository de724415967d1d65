"""
Bound services: upper bound u(mu), multiplicative sandwich, additive gap
alpha with its ratio test, worst case over q, and large-mu sweeps
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ehpolicy.errors import DomainError, UnsupportedOperationError
from ehpolicy.numerics import golden_section_min
from ehpolicy.services.arrivals import ArrivalSpec, bernoulli_full
from ehpolicy.services.policy import WEIGHT_TOL, FixedFractionPolicy, renewal_weight
from ehpolicy.services.sim import SimConfig, ffp_renewal_value, run
from ehpolicy.services.utility import UtilityFunction, classify, h_inf_many

logger = logging.getLogger(__name__)

TERM_STOP = 1e-12
T_MAX = 10_000
RATIO_WINDOW = 20
RATIO_CONVERGED = 1 - 1e-6
SMALL_Q = 1e-3
Q_MIN = 1e-3
Q_MAX = 1 - 1e-3
Q_TOL = 1e-4
_TERM_BLOCK = 256
LN2 = math.log(2.0)


def to_bits(value: float, u: UtilityFunction) -> Optional[float]:
    """Convert a nats-valued quantity to bits; None for non-logarithmic utilities"""
    return value / LN2 if u.unit == 'nats' else None


@dataclass
class AdditiveGap:
    alpha: float
    ratio_r: float
    converged: bool
    terms: int
    q: float
    notes: list = field(default_factory=list)
    alpha_bits: Optional[float] = None


@dataclass
class GapReport:
    upper_bound: float
    policy_value: float
    mult_ratio: float
    alpha: float
    ratio_r: float
    utility_class: str
    q: float
    mu: float
    additive_lower: float
    policy_value_ci: float = 0.0
    alpha_bits: Optional[float] = None
    notes: list = field(default_factory=list)


@dataclass
class GapOptimum:
    q_star: float
    alpha_star: float
    alpha_star_bits: Optional[float]
    q_best: float
    alpha_best: float
    notes: list = field(default_factory=list)


@dataclass
class SweepRow:
    mu: float
    ffp_value: float
    upper: float
    deficit: float


def upper_bound(u: UtilityFunction, mu: float) -> float:
    """u(mu): no online policy beats the utility of the mean arrival"""
    if mu < 0:
        raise DomainError(f"Mean arrival must be nonnegative, got {mu}")
    return float(u(mu))


def mult_gap_check(policy_value: float, u: UtilityFunction, mu: float, ci: float = 0.0) -> dict:
    """policy_value / u(mu) against the [1/2, 1] sandwich"""
    if mu == 0:
        return {"ratio": 1.0, "pass": True, "slack": 0.0, "note": "mu = 0: all bounds are 0"}
    upper = upper_bound(u, mu)
    ratio = policy_value / upper
    slack = ci / upper
    return {"ratio": ratio, "pass": bool(0.5 - slack <= ratio <= 1.0 + slack), "slack": slack}


def _richardson_ratio(terms: np.ndarray, ts: np.ndarray) -> float:
    nz = terms != 0
    terms, ts = terms[nz], ts[nz]
    if len(terms) < 3:
        return 0.0
    rho = np.abs(terms[1:] / terms[:-1])
    t = ts[:-1]
    rho, t = rho[-RATIO_WINDOW:], t[-RATIO_WINDOW:]
    extrapolated = (t[1:] * rho[1:]) - (t[:-1] * rho[:-1])
    # (t+1) rho_{t+1} - t rho_t; consecutive t differ by one after dropping zeros only
    steps = t[1:] - t[:-1]
    extrapolated = np.where(steps == 1, extrapolated, rho[1:])
    return float(np.median(extrapolated))


def additive_gap(u: UtilityFunction, q: float) -> AdditiveGap:
    """alpha = sum_t q (1-q)^t h((1-q)^t) and the ratio-test estimate of its terms"""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    if q == 1.0:
        return AdditiveGap(alpha=0.0, ratio_r=0.0, converged=True, terms=1, q=q,
                           notes=["q = 1: the battery is drained every slot and FFP is optimal"],
                           alpha_bits=to_bits(0.0, u))

    notes = []
    terms: list[float] = []
    total = 0.0
    stopped = False
    t0 = 0
    while t0 <= T_MAX and (not stopped or len(terms) < RATIO_WINDOW + 1):
        ts = np.arange(t0, min(t0 + _TERM_BLOCK, T_MAX + 1))
        thetas = np.power(1.0 - q, ts.astype(float))
        live = thetas > 0
        if not np.any(live):
            break
        results = h_inf_many(u, thetas[live])
        window_closed = False
        for t, theta, res in zip(ts[live], thetas[live], results):
            if not res.exists and stopped:
                # alpha is already summed; only the ratio window is cut short
                notes.append(f"ratio window ends at theta={theta:.6g} where h(theta) does not exist")
                window_closed = True
                break
            if not res.exists:
                notes.append(f"h(theta) does not exist at theta={theta:.6g}: gap not guaranteed")
                return AdditiveGap(alpha=-math.inf, ratio_r=math.nan, converged=False,
                                   terms=len(terms), q=q, notes=notes, alpha_bits=to_bits(-math.inf, u))
            a_t = q * theta * res.value
            terms.append(a_t)
            if not stopped:
                total += a_t
                if t >= 1 and abs(a_t) < TERM_STOP and abs(a_t) <= abs(terms[-2]):
                    stopped = True
                    summed = len(terms)
            if stopped and len(terms) >= RATIO_WINDOW + 1:
                break
        if window_closed:
            break
        t0 += _TERM_BLOCK

    arr = np.array(terms)
    ratio_r = _richardson_ratio(arr, np.arange(len(arr)))
    if not stopped:
        summed = len(terms)
    converged = stopped or ratio_r < RATIO_CONVERGED
    alpha = total
    if not converged:
        notes.append(f"terms have not decayed after {T_MAX} terms and ratio r={ratio_r:.6g} >= 1")
        alpha = -math.inf
    elif not stopped:
        bound = abs(arr[summed - 1]) / max(1.0 - ratio_r, 1e-300)
        notes.append(f"series truncated at T={T_MAX}; truncation error <= {bound:.3g}")
        if q < SMALL_Q:
            logger.warning("additive gap at q=%g truncated at %d terms (error <= %.3g)", q, T_MAX, bound)
    return AdditiveGap(alpha=alpha, ratio_r=ratio_r, converged=converged, terms=summed, q=q,
                       notes=notes, alpha_bits=to_bits(alpha, u))


def bounded_alpha_lower_bound(u: UtilityFunction, q: float) -> float:
    """-M (1-q)/(2-q): alpha bound from h(theta) >= (theta - 1) M"""
    if not u.is_bounded:
        raise UnsupportedOperationError(f"Utility '{u.name}' has no finite upper bound")
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    return -u.upper_bound * (1.0 - q) / (2.0 - q)


def optimize_gap_over_q(u: UtilityFunction) -> GapOptimum:
    """Worst-case alpha over q, which makes the additive gap independent of q"""
    def alpha_of(q):
        return additive_gap(u, float(q)).alpha

    scan_q = np.linspace(Q_MIN, Q_MAX, 9)
    scan = np.array([alpha_of(q) for q in scan_q])
    finite = np.isfinite(scan)
    if not np.any(finite):
        raise UnsupportedOperationError(f"alpha is -inf for every sampled q; '{u.name}' has no additive gap")

    notes = []
    if not np.all(finite):
        notes.append("alpha = -inf for some sampled q")
        i = int(np.argmin(np.where(finite, np.inf, 0.0)))
        return GapOptimum(q_star=float(scan_q[i]), alpha_star=-math.inf, alpha_star_bits=to_bits(-math.inf, u),
                          q_best=float(scan_q[np.nanargmax(np.where(finite, scan, -np.inf))]),
                          alpha_best=float(np.max(scan[finite])), notes=notes)

    q_star, alpha_star = golden_section_min(np.vectorize(alpha_of, otypes=[float]), Q_MIN, Q_MAX, tol=Q_TOL)
    edge = alpha_of(Q_MIN)
    if edge <= alpha_star:
        q_star, alpha_star = Q_MIN, edge
        notes.append(f"worst case sits at the q search boundary {Q_MIN}; the supremum of |alpha| is approached as q -> 0")
    best = int(np.argmax(scan))
    return GapOptimum(q_star=float(q_star), alpha_star=float(alpha_star),
                      alpha_star_bits=to_bits(float(alpha_star), u),
                      q_best=float(scan_q[best]), alpha_best=float(scan[best]), notes=notes)


def ffp_deficit(u: UtilityFunction, q: float, mu: float) -> float:
    """u(mu) - renewal FFP value under Bernoulli-full(q), summed term by term"""
    if q >= 1.0:
        return 0.0
    T = 1 + int(math.floor(math.log(WEIGHT_TOL / q) / math.log1p(-q)))
    t = np.arange(1, T + 1, dtype=float)
    w = renewal_weight(q, t)
    x = np.power(1.0 - q, t - 1.0) * mu
    top = float(u(mu))
    tail = max(0.0, 1.0 - float(np.sum(w)))
    return float(np.sum(w * (top - np.asarray(u(x), dtype=float)))) + tail * top


def asymptotic_sweep(u: UtilityFunction, q: float, mus) -> list[SweepRow]:
    """FFP deficit u(mu) - value over increasing mu at fixed q (B = mu / q)"""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    rows = []
    for mu in np.asarray(mus, dtype=float):
        deficit = ffp_deficit(u, q, float(mu))
        top = upper_bound(u, float(mu))
        rows.append(SweepRow(mu=float(mu), ffp_value=top - deficit, upper=top, deficit=deficit))
    return rows


def sweep_decreasing(rows: list[SweepRow]) -> bool:
    d = np.array([r.deficit for r in rows])
    return bool(np.all(np.diff(d) < 0))


def build_gap_report(u: UtilityFunction, q: float, battery: float = 1.0) -> GapReport:
    """Bounds and gaps for FFP(q) under Bernoulli-full(q) arrivals with mean q B"""
    spec = bernoulli_full(q, battery)
    mu = spec.mean
    top = upper_bound(u, mu)
    value = ffp_renewal_value(u, spec) if q > 0 else 0.0
    gap = additive_gap(u, q)
    klass = classify(u).utility_class
    notes = list(gap.notes)
    if mu == 0:
        notes.append("mu = 0: all bounds are 0")
    return GapReport(
        upper_bound=top,
        policy_value=value,
        mult_ratio=value / top if top > 0 else 1.0,
        alpha=gap.alpha,
        ratio_r=gap.ratio_r,
        utility_class=klass,
        q=q,
        mu=mu,
        additive_lower=top + gap.alpha,
        alpha_bits=gap.alpha_bits,
        notes=notes,
    )


def general_arrival_check(u: UtilityFunction, spec: ArrivalSpec, cfg: SimConfig) -> dict:
    """Monte Carlo FFP(q) under general arrivals against the matched Bernoulli-full(q) renewal value"""
    q = spec.fraction_q
    mc = run(FixedFractionPolicy(q), spec, u, cfg)
    matched = ffp_renewal_value(u, bernoulli_full(q, spec.battery_cap))
    top = upper_bound(u, spec.mean)
    return {
        "mc_value": mc.mean_reward,
        "ci_half_width": mc.ci_half_width,
        "matched_bernoulli_value": matched,
        "upper_bound": top,
        "dominates_bernoulli": bool(mc.mean_reward >= matched - mc.ci_half_width),
        "within_sandwich": bool(0.5 * top - mc.ci_half_width <= mc.mean_reward <= top + mc.ci_half_width),
    }
