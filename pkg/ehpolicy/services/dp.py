"""
Dynamic-programming oracle: relative value iteration on the battery MDP

State is the battery level on a uniform grid over [0, B]; arrivals are
i.i.d., so nothing else needs to be tracked. Off-grid next states split
their mass between the two neighbouring grid points in proportion to
distance, which keeps the expected battery drift exact.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ehpolicy.errors import DomainError
from ehpolicy.services.arrivals import MAX_ATOMS, ArrivalSpec, discretize
from ehpolicy.services.policy import TabularPolicy
from ehpolicy.services.utility import UtilityFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DpConfig:
    grid_points: int = 401
    action_points: int = 201
    vi_tol: float = 1e-9
    max_iters: int = 100_000
    max_atoms: int = MAX_ATOMS
    fraction: Optional[float] = None  # injected fixed-fraction action; defaults to q

    def __post_init__(self):
        if self.grid_points < 2:
            raise DomainError(f"grid_points must be >= 2, got {self.grid_points}")
        if self.action_points < 2:
            raise DomainError(f"action_points must be >= 2, got {self.action_points}")
        if not self.vi_tol > 0:
            raise DomainError(f"vi_tol must be positive, got {self.vi_tol}")


@dataclass
class DpSolution:
    gain: float
    bias: np.ndarray
    policy: TabularPolicy
    iters: int
    span: float
    converged: bool

    def as_dict(self, include_policy: bool = False) -> dict:
        out = {
            "gain": self.gain,
            "iters": self.iters,
            "span": self.span,
            "converged": self.converged,
            "grid_points": len(self.policy.grid),
        }
        if include_policy:
            out["policy"] = {"b": self.policy.grid, "action": self.policy.actions}
        return out


def _transitions(grid: np.ndarray, actions: np.ndarray, atoms: np.ndarray, B: float):
    """Lower neighbour index and upper-neighbour weight for every (atom, state, action)"""
    step = grid[1] - grid[0]
    last = len(grid) - 1
    nxt = np.clip(grid[None, :, None] - actions[None, :, :] + atoms[:, None, None], 0.0, B)
    pos = nxt / step
    lower = np.minimum(np.floor(pos).astype(np.int64), last - 1)
    weight = np.clip(pos - lower, 0.0, 1.0)
    return lower, weight


def solve_dp(u: UtilityFunction, spec: ArrivalSpec, cfg: DpConfig = DpConfig()) -> DpSolution:
    """Relative value iteration with span-seminorm stopping"""
    B = spec.battery_cap
    grid = np.linspace(0.0, B, cfg.grid_points)
    atoms, probs = discretize(spec, cfg.max_atoms)

    fractions = np.linspace(0.0, 1.0, cfg.action_points)
    theta = spec.fraction_q if cfg.fraction is None else cfg.fraction
    fractions = np.append(fractions, theta)
    actions = grid[:, None] * fractions[None, :]
    rewards = np.asarray(u(actions), dtype=float)
    lower, weight = _transitions(grid, actions, atoms, B)
    upper = lower + 1

    def backup(V):
        ev = np.zeros_like(rewards)
        for e in range(len(atoms)):
            ev += probs[e] * (V[lower[e]] * (1.0 - weight[e]) + V[upper[e]] * weight[e])
        return rewards + ev

    ref = cfg.grid_points - 1
    V = np.zeros(cfg.grid_points)
    span = np.inf
    gain = 0.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        TV = backup(V).max(axis=1)
        diff = TV - V
        hi, lo = float(diff.max()), float(diff.min())
        span, gain = hi - lo, 0.5 * (hi + lo)
        V = TV - TV[ref]
        if span < cfg.vi_tol:
            converged = True
            break

    if not converged:
        logger.warning("relative value iteration stopped at %d iterations with span %.3g", it, span)

    greedy = actions[np.arange(cfg.grid_points), np.argmax(backup(V), axis=1)]
    policy = TabularPolicy(grid=grid, actions=greedy,
                           metadata={"source": "dp", "utility": u.name})
    logger.info("dp %s: gain=%.9g after %d iterations (span %.3g)", u.name, gain, it, span)
    return DpSolution(gain=gain, bias=V, policy=policy, iters=it, span=span, converged=converged)
