"""
Energy arrival services: i.i.d. bounded-support arrival processes

Every draw is a deterministic transform of one uniform variate from a
Philox (counter-based) generator, so a given (seed, stream, draw index)
reproduces the same energy on any platform and regardless of how draws are
batched.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ehpolicy.errors import ConfigError, DomainError
from ehpolicy.utils import parse_spec

PROB_TOL = 1e-12
MAX_ATOMS = 64


class ArrivalKind:
    BERNOULLI_FULL = 'bernoulli_full'
    CONSTANT = 'constant'
    UNIFORM_CONT = 'uniform_cont'
    DISCRETE = 'discrete'


@dataclass(frozen=True)
class ArrivalSpec:
    """An i.i.d. arrival law with support inside [0, battery_cap]"""
    kind: str
    battery_cap: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        _validate(self)

    @property
    def mean(self) -> float:
        return mean_of(self)

    @property
    def fraction_q(self) -> float:
        return self.mean / self.battery_cap

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "battery": self.battery_cap,
            "params": dict(self.params),
            "mean": self.mean,
            "q": self.fraction_q,
            "std": std_of(self),
        }


def _validate(spec: ArrivalSpec) -> None:
    B = spec.battery_cap
    if not B > 0:
        raise DomainError(f"Battery capacity must be positive, got {B}")
    p = spec.params
    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        if not 0.0 <= p['p'] <= 1.0:
            raise DomainError(f"Bernoulli p must lie in [0, 1], got {p['p']}")
    elif spec.kind == ArrivalKind.CONSTANT:
        if not 0.0 <= p['e'] <= B:
            raise DomainError(f"Constant arrival {p['e']} outside [0, {B}]")
    elif spec.kind == ArrivalKind.UNIFORM_CONT:
        if not 0.0 <= p['lo'] <= p['hi'] <= B:
            raise DomainError(f"Uniform support [{p['lo']}, {p['hi']}] outside [0, {B}]")
    elif spec.kind == ArrivalKind.DISCRETE:
        values, probs = np.asarray(p['values'], dtype=float), np.asarray(p['probs'], dtype=float)
        if values.shape != probs.shape or values.size == 0:
            raise DomainError("Discrete arrivals need matching non-empty values and probs")
        if np.any(values < 0) or np.any(values > B):
            raise DomainError(f"Discrete arrival values outside [0, {B}]")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise DomainError("Discrete arrival probabilities must be nonnegative and sum to 1")
    else:
        raise ConfigError(f"Unknown arrival kind '{spec.kind}'")


def bernoulli_full(p: float, battery: float) -> ArrivalSpec:
    """E_t in {0, B} with P[E_t = B] = p"""
    return ArrivalSpec(ArrivalKind.BERNOULLI_FULL, float(battery), {"p": float(p)})


def constant(e: float, battery: float) -> ArrivalSpec:
    return ArrivalSpec(ArrivalKind.CONSTANT, float(battery), {"e": float(e)})


def uniform_cont(lo: float, hi: float, battery: float) -> ArrivalSpec:
    return ArrivalSpec(ArrivalKind.UNIFORM_CONT, float(battery), {"lo": float(lo), "hi": float(hi)})


def discrete(values, probs, battery: float) -> ArrivalSpec:
    return ArrivalSpec(ArrivalKind.DISCRETE, float(battery),
                       {"values": tuple(float(v) for v in values), "probs": tuple(float(q) for q in probs)})


def arrivals_from_spec(spec: str, battery: float) -> ArrivalSpec:
    """Parse 'bernoulli:p=..', 'constant:e=..', 'uniform:lo=..,hi=..' or 'discrete:v=..|..,p=..|..'"""
    name, params = parse_spec(spec)
    try:
        if name in ('bernoulli', ArrivalKind.BERNOULLI_FULL):
            return bernoulli_full(params['p'], battery)
        if name == ArrivalKind.CONSTANT:
            return constant(params['e'], battery)
        if name in ('uniform', ArrivalKind.UNIFORM_CONT):
            return uniform_cont(params['lo'], params['hi'], battery)
        if name == ArrivalKind.DISCRETE:
            values = params['v'] if isinstance(params['v'], list) else [params['v']]
            probs = params['p'] if isinstance(params['p'], list) else [params['p']]
            return discrete(values, probs, battery)
    except KeyError as e:
        raise ConfigError(f"Missing parameter {e} in arrival spec '{spec}'") from e
    raise ConfigError(f"Unknown arrival process '{name}'")


def make_rng(seed: int, stream: Optional[int] = None) -> np.random.Generator:
    """Philox generator for (seed, stream); streams are independent per trial"""
    spawn_key = () if stream is None else (int(stream),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def _from_uniform(spec: ArrivalSpec, v: np.ndarray) -> np.ndarray:
    p = spec.params
    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        return np.where(v < p['p'], spec.battery_cap, 0.0)
    if spec.kind == ArrivalKind.CONSTANT:
        return np.full_like(v, p['e'])
    if spec.kind == ArrivalKind.UNIFORM_CONT:
        return p['lo'] + (p['hi'] - p['lo']) * v
    values = np.asarray(p['values'], dtype=float)
    cdf = np.cumsum(np.asarray(p['probs'], dtype=float))
    idx = np.searchsorted(cdf, v, side='right')
    return values[np.minimum(idx, len(values) - 1)]


def sample(spec: ArrivalSpec, rng: np.random.Generator) -> float:
    """One energy draw"""
    return float(_from_uniform(spec, rng.random(1))[0])


def sample_many(spec: ArrivalSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """The next `size` draws of the stream, identical to `size` calls of sample"""
    return _from_uniform(spec, rng.random(size))


def mean_of(spec: ArrivalSpec) -> float:
    """Closed-form mean energy per slot"""
    p = spec.params
    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        return p['p'] * spec.battery_cap
    if spec.kind == ArrivalKind.CONSTANT:
        return p['e']
    if spec.kind == ArrivalKind.UNIFORM_CONT:
        return 0.5 * (p['lo'] + p['hi'])
    return float(np.dot(p['values'], p['probs']))


def std_of(spec: ArrivalSpec) -> float:
    p = spec.params
    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        return spec.battery_cap * float(np.sqrt(p['p'] * (1 - p['p'])))
    if spec.kind == ArrivalKind.CONSTANT:
        return 0.0
    if spec.kind == ArrivalKind.UNIFORM_CONT:
        return (p['hi'] - p['lo']) / float(np.sqrt(12.0))
    values, probs = np.asarray(p['values']), np.asarray(p['probs'])
    m = float(np.dot(values, probs))
    return float(np.sqrt(np.dot((values - m) ** 2, probs)))


def discretize(spec: ArrivalSpec, max_atoms: int = MAX_ATOMS) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and masses of the arrival law; continuous laws by quantile midpoints

    The quantized law keeps the exact mean: any residual is removed by a
    final shift of the atoms, clipped to [0, B].
    """
    p = spec.params
    B = spec.battery_cap
    if spec.kind == ArrivalKind.BERNOULLI_FULL:
        values, probs = np.array([0.0, B]), np.array([1.0 - p['p'], p['p']])
    elif spec.kind == ArrivalKind.CONSTANT:
        values, probs = np.array([p['e']]), np.array([1.0])
    elif spec.kind == ArrivalKind.DISCRETE:
        values, probs = np.asarray(p['values'], dtype=float), np.asarray(p['probs'], dtype=float)
    else:
        if p['hi'] == p['lo']:
            values, probs = np.array([p['lo']]), np.array([1.0])
        else:
            levels = (np.arange(max_atoms) + 0.5) / max_atoms
            values = p['lo'] + (p['hi'] - p['lo']) * levels
            probs = np.full(max_atoms, 1.0 / max_atoms)
            values = np.clip(values + (mean_of(spec) - float(np.dot(values, probs))), 0.0, B)
    keep = probs > 0
    return values[keep], probs[keep]
