"""
Scalar search routines shared by the services

golden_section_min works elementwise on arrays of brackets so that many
independent one-dimensional problems (one per theta, say) are refined in
lock-step with a single vectorized objective call per iteration.
"""
import logging
import math

import numpy as np
from scipy import optimize

from ehpolicy.errors import NumericalError

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1/phi
INV_PHI_SQ = (3 - math.sqrt(5)) / 2  # 1/phi^2

MAX_BRACKET_DOUBLINGS = 200


def golden_section_min(obj, a, b, tol=1e-10):
    """Golden-section minimizer of a unimodal objective on [a, b]

    Args:
        obj (callable): vectorized objective, obj(x) has the shape of x
        a, b (float or ndarray): bracket ends, a <= b elementwise
        tol (float): absolute bracket width at exit

    Returns:
        (x, obj(x)) with the shape of a and b
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    dist = b - a
    widest = float(np.max(dist)) if dist.size else 0.0
    if widest <= tol:
        x = (a + b) / 2
        return x, obj(x)

    n = int(math.ceil(math.log(tol / widest) / math.log(INV_PHI)))

    c = a + INV_PHI_SQ * dist
    d = a + INV_PHI * dist
    yc = obj(c)
    yd = obj(d)

    for _ in range(max(n - 1, 0)):
        left = yc < yd
        dist = INV_PHI * dist
        # left: keep [a, d]; right: keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = a + INV_PHI_SQ * dist
        new_d = a + INV_PHI * dist
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        yc, yd = np.where(left, np.nan, yd), np.where(left, yc, np.nan)
        x_new = np.where(left, c, d)
        fp = obj(x_new)
        yc = np.where(left, fp, yc)
        yd = np.where(left, yd, fp)

    x = np.where(yc < yd, c, d)
    fx = np.where(yc < yd, yc, yd)
    if x.ndim == 0:
        return float(x), float(fx)
    return x, fx


def golden_section_max(obj, a, b, tol=1e-10):
    """Golden-section maximizer; see golden_section_min"""
    x, fx = golden_section_min(lambda z: -np.asarray(obj(z)), a, b, tol)
    return x, -fx


def bracket_root(residual, lo=1e-12, hi=1e12, max_doublings=MAX_BRACKET_DOUBLINGS):
    """Grow [lo, hi] geometrically until residual changes sign"""
    r_lo, r_hi = residual(lo), residual(hi)
    doublings = 0
    while np.sign(r_lo) == np.sign(r_hi) and r_lo != 0 and r_hi != 0:
        if doublings >= max_doublings:
            raise NumericalError(
                f"Could not bracket root after {max_doublings} doublings "
                f"(lo={lo:g}, hi={hi:g})"
            )
        lo, hi = lo / 2, hi * 2
        r_lo, r_hi = residual(lo), residual(hi)
        doublings += 1
    if doublings:
        logger.info("root bracket grown %d times to [%g, %g]", doublings, lo, hi)
    return lo, hi


def bisect_root(residual, lo=1e-12, hi=1e12, rtol=1e-12, maxiter=200):
    """Bracket then bisect a monotone residual"""
    lo, hi = bracket_root(residual, lo, hi)
    if residual(lo) == 0:
        return lo
    if residual(hi) == 0:
        return hi
    try:
        return optimize.bisect(residual, lo, hi, xtol=1e-300, rtol=rtol, maxiter=maxiter)
    except (RuntimeError, ValueError) as e:
        raise NumericalError(f"Bisection failed on [{lo:g}, {hi:g}]: {e}") from e
