"""
Utility function services: builtin registry, gap kernel and class detection

All logarithmic utilities use the natural logarithm, so their rewards and
every gap derived from them are in nats.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from ehpolicy.errors import ConfigError, DomainError, NumericalError, UnsupportedOperationError
from ehpolicy.numerics import golden_section_min
from ehpolicy.utils import parse_spec

logger = logging.getLogger(__name__)

X_MIN = 1e-9
X_MAX = 1e12
GRID_PER_DECADE = 400
GOLDEN_TOL = 1e-10
DECREASE_TOL = 1e-9
DIVERGENCE_CAP = 1e6
X_TAIL_CAP = 1e300
TAIL_DECADES = np.array([1e-2, 1e-1, 1.0])
CLASS_THETA = 0.5
CLASS_DECADES = tuple(range(3, 13))
CLASS_TOL = 1e-4
CLASS_TAIL = 5
_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class UtilityFunction:
    """Concave increasing reward u with u(0) = 0; callables are vectorized"""
    name: str
    eval: Callable
    deriv: Callable
    inv_deriv: Optional[Callable]
    deriv_at_zero: float  # math.inf when u'(0) is unbounded
    upper_bound: Optional[float] = None
    analytic_h: Optional[Callable] = None
    unit: str = 'reward'
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.eval(x)

    @property
    def infinite_slope_at_zero(self) -> bool:
        return math.isinf(self.deriv_at_zero)

    @property
    def is_bounded(self) -> bool:
        return self.upper_bound is not None and math.isfinite(self.upper_bound)

    def without_analytic_h(self) -> 'UtilityFunction':
        """Same utility forced onto the numerical h path"""
        return replace(self, analytic_h=None)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "unit": self.unit,
            "deriv_at_zero": "inf" if self.infinite_slope_at_zero else self.deriv_at_zero,
            "upper_bound": self.upper_bound,
        }


@dataclass(frozen=True)
class HInfResult:
    value: float  # -inf when the infimum does not exist
    arg_inf: Optional[float]  # +inf for limit-type infima
    exists: bool
    at_infinity: bool = False

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "arg_inf": self.arg_inf,
            "exists": self.exists,
            "at_infinity": self.at_infinity,
        }


@dataclass(frozen=True)
class ClassResult:
    utility_class: str
    evidence: list
    caveat: str

    def as_dict(self) -> dict:
        return {"class": self.utility_class, "evidence": self.evidence, "caveat": self.caveat}


# ── Builtins ──────────────────────────────────────────────────────────────────

def _log_awgn() -> UtilityFunction:
    return UtilityFunction(
        name='log_awgn',
        eval=lambda x: 0.5 * np.log1p(x),
        deriv=lambda x: 0.5 / (1.0 + np.asarray(x, dtype=float)),
        inv_deriv=lambda y: 0.5 / np.asarray(y, dtype=float) - 1.0,
        deriv_at_zero=0.5,
        analytic_h=lambda theta: 0.5 * np.log(theta),
        unit='nats',
    )


def _exp_sat(beta: float = 1.0) -> UtilityFunction:
    if not beta > 0:
        raise DomainError(f"exp_sat needs beta > 0, got {beta}")
    return UtilityFunction(
        name='exp_sat',
        eval=lambda x: -np.expm1(-beta * np.asarray(x, dtype=float)),
        deriv=lambda x: beta * np.exp(-beta * np.asarray(x, dtype=float)),
        inv_deriv=lambda y: np.log(beta / np.asarray(y, dtype=float)) / beta,
        deriv_at_zero=beta,
        upper_bound=1.0,
        params={"beta": beta},
    )


def _ratio_sat() -> UtilityFunction:
    return UtilityFunction(
        name='ratio_sat',
        eval=lambda x: np.asarray(x, dtype=float) / (1.0 + np.asarray(x, dtype=float)),
        deriv=lambda x: 1.0 / (1.0 + np.asarray(x, dtype=float)) ** 2,
        inv_deriv=lambda y: 1.0 / np.sqrt(np.asarray(y, dtype=float)) - 1.0,
        deriv_at_zero=1.0,
        upper_bound=1.0,
    )


def _sqrt_log_deriv(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore'):
        return 1.0 / (2.0 * np.sqrt(np.log1p(x)) * (1.0 + x))


def _sqrt_log_inv_scalar(y: float) -> float:
    # with L = log(1+x): u'(x) = y  <=>  L + log(L)/2 = log(1/(2y))
    if y <= 0:
        return math.inf
    z = math.log(0.5 / y)
    lo = min(0.5, 0.5 * math.exp(2.0 * (z - 1.0)))
    hi = max(z, 1.0) + 1.0
    if lo <= 0.0:
        return 0.0
    try:
        log_b = optimize.brentq(lambda L: L + 0.5 * math.log(L) - z, lo, hi,
                                xtol=1e-300, rtol=1e-15, maxiter=500)
    except (RuntimeError, ValueError) as e:
        raise NumericalError(f"sqrt_log inverse derivative failed at y={y!r}") from e
    return math.expm1(log_b)


_sqrt_log_inv = np.vectorize(_sqrt_log_inv_scalar, otypes=[float])


def _sqrt_log() -> UtilityFunction:
    return UtilityFunction(
        name='sqrt_log',
        eval=lambda x: np.sqrt(np.log1p(x)),
        deriv=_sqrt_log_deriv,
        inv_deriv=_sqrt_log_inv,
        deriv_at_zero=math.inf,
    )


def _log_sqrt_deriv(x):
    s = np.sqrt(np.asarray(x, dtype=float))
    with np.errstate(divide='ignore'):
        return 1.0 / (4.0 * s * (1.0 + s))


def _log_sqrt_inv(y):
    a = 1.0 / np.asarray(y, dtype=float)
    s = a / (2.0 * (np.sqrt(1.0 + a) + 1.0))
    return s * s


def _log_sqrt() -> UtilityFunction:
    return UtilityFunction(
        name='log_sqrt',
        eval=lambda x: 0.5 * np.log1p(np.sqrt(x)),
        deriv=_log_sqrt_deriv,
        inv_deriv=_log_sqrt_inv,
        deriv_at_zero=math.inf,
        unit='nats',
    )


def _sqrt_deriv(x):
    with np.errstate(divide='ignore'):
        return 0.5 / np.sqrt(np.asarray(x, dtype=float))


def _sqrt_inv(y):
    with np.errstate(over='ignore', divide='ignore'):
        return 0.25 / np.asarray(y, dtype=float) ** 2


def _sqrt() -> UtilityFunction:
    return UtilityFunction(
        name='sqrt',
        eval=lambda x: np.sqrt(x),
        deriv=_sqrt_deriv,
        inv_deriv=_sqrt_inv,
        deriv_at_zero=math.inf,
    )


_REGISTRY: dict[str, Callable[..., UtilityFunction]] = {
    'log_awgn': _log_awgn,
    'exp_sat': _exp_sat,
    'ratio_sat': _ratio_sat,
    'sqrt_log': _sqrt_log,
    'log_sqrt': _log_sqrt,
    'sqrt': _sqrt,
}


def builtin_names() -> list[str]:
    """Registered utility names"""
    return sorted(_REGISTRY)


def make_builtin(name: str, **params) -> UtilityFunction:
    """Build a registered utility by name"""
    factory = _REGISTRY.get(name)
    if factory is None:
        raise ConfigError(f"Unknown utility '{name}'; expected one of {builtin_names()}")
    try:
        return factory(**params)
    except TypeError as e:
        raise ConfigError(f"Bad parameters for utility '{name}': {params}") from e


def utility_from_spec(spec: str) -> UtilityFunction:
    """Parse 'name' or 'name:key=value,...' into a utility"""
    name, params = parse_spec(spec)
    return make_builtin(name, **params)


def validate_utility(u: UtilityFunction, points: int = 200) -> list[str]:
    """Sampled-grid checks of u(0)=0, positivity, monotonicity and concavity"""
    problems = []
    x = np.logspace(-6, 6, points)
    y = np.asarray(u(x), dtype=float)
    if float(u(0.0)) != 0.0:
        problems.append("u(0) != 0")
    if np.any(y <= 0):
        problems.append("u(x) <= 0 for some x > 0")
    if np.any(np.diff(y) < -1e-12 * np.abs(y[1:])):
        problems.append("u is not nondecreasing")
    mid = np.asarray(u((x[:-1] + x[1:]) / 2), dtype=float)
    if np.any(mid < (y[:-1] + y[1:]) / 2 - 1e-12 * np.abs(mid)):
        problems.append("u fails the midpoint concavity test")
    d = np.asarray(u.deriv(x), dtype=float)
    if np.any(d < 0) or np.any(np.diff(d) > 1e-12 * np.abs(d[:-1])):
        problems.append("u' is negative or increasing")
    return problems


def register_utility(name: str, factory: Callable[..., UtilityFunction]) -> None:
    """Add a utility to the registry after checking its shape"""
    if name in _REGISTRY:
        raise ConfigError(f"Utility '{name}' is already registered")
    problems = validate_utility(factory())
    if problems:
        raise DomainError(f"Utility '{name}' rejected: {'; '.join(problems)}")
    _REGISTRY[name] = factory


def unregister_utility(name: str) -> None:
    _REGISTRY.pop(name, None)


# ── Gap kernel ────────────────────────────────────────────────────────────────

def h_theta(u: UtilityFunction, theta: float, x):
    """h_theta(x) = u(theta x) - u(x)"""
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("h_theta needs x >= 0")
    if theta == 1.0:
        return np.zeros_like(x) if x.ndim else 0.0
    value = np.asarray(u(theta * x), dtype=float) - np.asarray(u(x), dtype=float)
    return value if value.ndim else float(value)


def _log_grid() -> np.ndarray:
    decades = math.log10(X_MAX) - math.log10(X_MIN)
    return np.linspace(math.log(X_MIN), math.log(X_MAX), int(round(decades)) * GRID_PER_DECADE + 1)


def _h_inf_chunk(u: UtilityFunction, thetas: np.ndarray, s: np.ndarray, u_x: np.ndarray) -> list[HInfResult]:
    x = np.exp(s)
    H = np.asarray(u(thetas[:, None] * x[None, :]), dtype=float) - u_x[None, :]
    last = len(s) - 1
    idx = np.argmin(H, axis=1)
    rows = np.arange(len(thetas))
    grid_min = H[rows, idx]

    decreasing = (H[:, last - GRID_PER_DECADE] - H[:, last] > DECREASE_TOL) & (H[:, last - 1] > H[:, last])

    # divergence is judged on the last decades of x_end = X_MAX / theta, where theta x spans the grid
    x_end = np.minimum(X_MAX / thetas, X_TAIL_CAP)
    tail_x = x_end[:, None] * TAIL_DECADES[None, :]
    with np.errstate(over='ignore', invalid='ignore'):
        tail = np.asarray(u(thetas[:, None] * tail_x), dtype=float) - np.asarray(u(tail_x), dtype=float)
    drop_prev = tail[:, 0] - tail[:, 1]
    drop_last = tail[:, 1] - tail[:, 2]
    growing = (drop_last > DECREASE_TOL) & (drop_last >= drop_prev)
    divergent = decreasing & ((np.abs(tail[:, 2]) > DIVERGENCE_CAP) | growing)
    edge_value = np.fmin(H[:, last], np.nanmin(tail, axis=1))
    at_edge = decreasing | (idx == last)

    interior = ~at_edge
    refined_x = np.full(len(thetas), np.nan)
    refined_v = np.full(len(thetas), np.nan)
    if np.any(interior):
        th = thetas[interior]
        lo = s[np.maximum(idx[interior] - 1, 0)]
        hi = s[np.minimum(idx[interior] + 1, last)]

        def obj(sv):
            xv = np.exp(sv)
            return np.asarray(u(th * xv), dtype=float) - np.asarray(u(xv), dtype=float)

        s_star, v_star = golden_section_min(obj, lo, hi, tol=GOLDEN_TOL)
        g = grid_min[interior]
        better = v_star <= g
        refined_v[interior] = np.where(better, v_star, g)
        refined_x[interior] = np.where(better, np.exp(s_star), x[idx[interior]])

    results = []
    for k, theta in enumerate(thetas):
        if divergent[k]:
            results.append(HInfResult(value=-math.inf, arg_inf=math.inf, exists=False, at_infinity=True))
        elif at_edge[k]:
            results.append(HInfResult(value=float(edge_value[k]), arg_inf=math.inf, exists=True, at_infinity=True))
        else:
            results.append(HInfResult(value=float(min(refined_v[k], 0.0)), arg_inf=float(refined_x[k]), exists=True))
    return results


def h_inf_many(u: UtilityFunction, thetas) -> list[HInfResult]:
    """h(theta) = inf_x h_theta(x) for each theta in (0, 1]"""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if np.any(thetas <= 0) or np.any(thetas > 1):
        raise DomainError("h_inf_many needs 0 < theta <= 1")

    results: list[Optional[HInfResult]] = [None] * len(thetas)
    pending = []
    for k, theta in enumerate(thetas):
        if theta == 1.0:
            results[k] = HInfResult(value=0.0, arg_inf=0.0, exists=True)
        elif u.analytic_h is not None:
            # the log_awgn closed form is a limit as x -> inf
            results[k] = HInfResult(value=float(u.analytic_h(theta)), arg_inf=math.inf,
                                    exists=True, at_infinity=True)
        else:
            pending.append(k)

    if pending:
        s = _log_grid()
        u_x = np.asarray(u(np.exp(s)), dtype=float)
        chunk = max(1, _CHUNK_CELLS // len(s))
        for start in range(0, len(pending), chunk):
            ks = pending[start:start + chunk]
            for k, res in zip(ks, _h_inf_chunk(u, thetas[ks], s, u_x)):
                results[k] = res
    return results


def h_inf(u: UtilityFunction, theta: float) -> HInfResult:
    """h(theta) = inf_x [u(theta x) - u(x)], or exists=False when unbounded below"""
    if not 0.0 < theta < 1.0:
        raise DomainError(f"h_inf needs 0 < theta < 1, got {theta}")
    return h_inf_many(u, [theta])[0]


def classify(u: UtilityFunction) -> ClassResult:
    """Class B when h_theta(x) vanishes as x grows, class A otherwise"""
    xs = 10.0 ** np.array(CLASS_DECADES, dtype=float)
    hs = np.asarray(h_theta(u, CLASS_THETA, xs), dtype=float)
    mags = np.abs(hs)
    evidence = [{"x": float(x), "h": float(h)} for x, h in zip(xs, hs)]

    tail = mags[-CLASS_TAIL:]
    vanished = mags[-1] < CLASS_TOL
    shrinking = bool(np.all(np.diff(tail) < 0))
    utility_class = 'B' if vanished or shrinking else 'A'
    logger.debug("classify %s: tail=%s -> %s", u.name, tail, utility_class)
    return ClassResult(
        utility_class=utility_class,
        evidence=evidence,
        caveat=f"checked at theta={CLASS_THETA} only",
    )


def bounded_h_lower_bound(u: UtilityFunction, theta: float) -> float:
    """(theta - 1) M, a lower bound on h(theta) for bounded u"""
    if not u.is_bounded:
        raise UnsupportedOperationError(f"Utility '{u.name}' has no finite upper bound")
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    return (theta - 1.0) * u.upper_bound
