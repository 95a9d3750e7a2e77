"""Rician air-to-ground link: Marcum Q, outage probability, communication range."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import ive

from .errors import NotConverged, ValidationError

_BLOCK = 64


@dataclass(frozen=True)
class LinkParams:
    p_u: float = 5.0
    n0: float = 1e-4
    gamma_th: float = 10 ** -1.1
    beta: float = 2.0
    k_factor: float = 20.0
    epsilon: float = 0.01
    device_pos: tuple[float, float, float] = (1000.0, 3000.0, 0.0)

    def __post_init__(self):
        problems = []
        for name in ("p_u", "n0", "gamma_th", "beta"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0 (got {getattr(self, name)!r})")
        if not self.k_factor >= 0:
            problems.append(f"k_factor must be >= 0 (got {self.k_factor!r})")
        if not 0 < self.epsilon < 1:
            problems.append(f"epsilon must lie in (0, 1) (got {self.epsilon!r})")
        if len(self.device_pos) != 3:
            problems.append("device_pos must be a 3D point")
        if problems:
            raise ValidationError(problems)


def _ratio_bound(nu, x):
    """Upper bound on I_{nu+1}(x) / I_nu(x) (Amos), valid for nu >= 0."""
    return x / (nu + 0.5 + np.sqrt(x * x + (nu + 0.5) ** 2))


def marcum_q1(a: float, b: float, tol: float = 1e-13, max_terms: int = 20000) -> float:
    """First-order Marcum Q-function via its modified-Bessel series.

    For ``a < b``: ``Q1 = exp(-(a^2+b^2)/2) * sum_{k>=0} (a/b)^k I_k(ab)``;
    otherwise ``Q1 = 1 - exp(-(a^2+b^2)/2) * sum_{k>=1} (b/a)^k I_k(ab)``.
    Exponentially scaled Bessel values keep the terms finite.  Summation
    stops once a geometric bound on the remaining tail drops below ``tol``.
    """
    if a < 0 or b < 0:
        raise ValueError("marcum_q1 needs a, b >= 0")
    if b == 0:
        return 1.0
    if a == 0:
        return math.exp(-b * b / 2.0)
    x = a * b
    upper = a >= b
    r = b / a if upper else a / b
    scale = math.exp(-(a - b) ** 2 / 2.0)
    k0 = 1 if upper else 0
    total = 0.0
    for start in range(k0, max_terms, _BLOCK):
        k = np.arange(start, start + _BLOCK, dtype=float)
        terms = scale * r ** k * ive(k, x)
        partial = np.cumsum(terms)
        q = r * _ratio_bound(k, x)
        with np.errstate(divide="ignore"):
            tail = np.where(q < 1, terms * q / (1.0 - q), np.inf)
        done = np.nonzero(tail <= tol)[0]
        if done.size:
            total += partial[done[0]]
            break
        total += partial[-1]
    else:
        raise NotConverged(f"Marcum Q series did not converge for a={a}, b={b}")
    q1 = 1.0 - total if upper else total
    return min(max(q1, 0.0), 1.0)


def outage_probability(d: float, lp: LinkParams) -> float:
    """Probability that the received SNR at distance ``d`` falls below threshold."""
    if d <= 0:
        raise ValueError("distance must be > 0")
    a = math.sqrt(2.0 * lp.k_factor)
    b = math.sqrt(2.0 * lp.gamma_th * (1.0 + lp.k_factor) * lp.n0 * d ** lp.beta / lp.p_u)
    return 1.0 - marcum_q1(a, b)


def max_comm_distance(lp: LinkParams, xtol: float = 1e-4) -> float:
    """Distance at which the outage probability equals ``epsilon``."""
    def excess(d):
        return outage_probability(d, lp) - lp.epsilon

    lo, hi = 1e-6, 1.0
    while excess(hi) < 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise NotConverged("outage threshold not reached below 1e12 m")
    return bisect(excess, lo, hi, xtol=xtol, rtol=1e-15, maxiter=200)


def comm_energy(p_u: float, delta: float) -> float:
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return p_u * delta
