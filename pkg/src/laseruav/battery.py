"""Kinetic battery model (two-well) and the two-battery bank.

Sign convention: a positive current charges the battery, a negative one
discharges it.  Charges are in ampere-seconds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import Depleted, ValidationError

log = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class KibamParams:
    capacity: float = 36000.0
    omega: float = 0.8
    k_F: float = 4.5e-5
    e_nom: float = 11.1
    i_ch_max: float = 10.0
    e_tr: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.capacity > 0:
            problems.append(f"capacity must be > 0 (got {self.capacity!r})")
        if not 0 < self.omega < 1:
            problems.append(f"omega must lie in (0, 1) (got {self.omega!r})")
        if not self.k_F > 0:
            problems.append(f"k_F must be > 0 (got {self.k_F!r})")
        for name in ("e_nom", "e_tr"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0 (got {getattr(self, name)!r})")
        if not self.i_ch_max >= 0:
            problems.append(f"i_ch_max must be >= 0 (got {self.i_ch_max!r})")
        elif self.capacity > 0 and self.i_ch_max > self.one_c * (1 + 1e-12):
            problems.append(f"i_ch_max={self.i_ch_max} A exceeds the 1C rate "
                            f"{self.one_c:.6g} A of a {self.capacity} As battery")
        if problems:
            raise ValidationError(problems)

    @property
    def k_prime(self) -> float:
        return self.k_F / (self.omega * (1.0 - self.omega))

    @property
    def one_c(self) -> float:
        """Current (A) that would move the full capacity in one hour."""
        return self.capacity / SECONDS_PER_HOUR

    @property
    def y1_max(self) -> float:
        return self.omega * self.capacity

    @property
    def y2_max(self) -> float:
        # complement keeps y1_max + y2_max == capacity exactly
        return self.capacity - self.y1_max


@dataclass(frozen=True)
class KibamState:
    y1: float
    y2: float

    @property
    def total(self) -> float:
        return self.y1 + self.y2

    def heights(self, params: KibamParams) -> tuple[float, float]:
        return self.y1 / params.omega, self.y2 / (1.0 - params.omega)

    def soc(self, params: KibamParams) -> float:
        return self.total / params.capacity

    def is_valid(self, params: KibamParams, tol: float = 1e-9) -> bool:
        slack = tol * params.capacity
        return (-slack <= self.y1 <= params.y1_max + slack
                and -slack <= self.y2 <= params.y2_max + slack)


def init_full(params: KibamParams) -> KibamState:
    return KibamState(params.y1_max, params.y2_max)


def closed_form(y1, y2, i_bar, delta, params: KibamParams):
    """Well levels after ``delta`` seconds at constant current ``i_bar``.

    Works elementwise on arrays; no clamping or depletion handling.
    """
    w = params.omega
    kp = params.k_prime
    y = y1 + y2
    e = np.exp(-kp * delta)
    ramp = (kp * delta - 1.0 + e) / kp
    n1 = y1 * e + (y * kp * w + i_bar) * (1.0 - e) / kp + i_bar * w * ramp
    n2 = y2 * e + y * (1.0 - w) * (1.0 - e) + i_bar * (1.0 - w) * ramp
    return n1, n2


def min_available(y1, y2, i_bar, delta, params: KibamParams):
    """Lowest available-well level reached during a constant-current step.

    ``y1(t)`` is an exponential plus a linear term, so it has at most one
    interior extremum; this checks the end point and that extremum.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    i_bar = np.asarray(i_bar, dtype=float)
    delta = np.asarray(delta, dtype=float)
    w = params.omega
    kp = params.k_prime
    end1, _ = closed_form(y1, y2, i_bar, delta, params)
    lowest = np.minimum(y1, end1)
    denom = kp * ((y1 + y2) * w - y1) + i_bar * (1.0 - w)
    with np.errstate(divide="ignore", invalid="ignore"):
        e_star = np.where(denom != 0, -i_bar * w / denom, np.nan)
        t_star = np.where((e_star > 0) & (e_star < 1), -np.log(e_star) / kp, np.nan)
    inside = np.isfinite(t_star) & (t_star < delta)
    if np.any(inside):
        mid1, _ = closed_form(y1, y2, i_bar, np.where(inside, t_star, 0.0), params)
        lowest = np.where(inside, np.minimum(lowest, mid1), lowest)
    return lowest


def time_to_empty(state: KibamState, i_bar: float, params: KibamParams, horizon: float) -> float:
    """First time within ``horizon`` at which y1 reaches zero, or ``inf``."""
    if state.y1 <= 0:
        return 0.0
    if min_available(state.y1, state.y2, i_bar, horizon, params) >= 0:
        return math.inf

    def y1_at(t):
        return float(closed_form(state.y1, state.y2, i_bar, t, params)[0])

    # find an upper bracket: the first sample where y1 is negative
    grid = np.linspace(0.0, horizon, 65)
    vals = closed_form(state.y1, state.y2, i_bar, grid, params)[0]
    neg = np.nonzero(vals < 0)[0]
    if neg.size == 0:
        # dips below zero only between samples, near the interior minimum
        t_hi = horizon
        lo_idx = int(np.argmin(vals))
        grid = np.linspace(grid[max(lo_idx - 1, 0)], grid[min(lo_idx + 1, 64)], 4097)
        vals = closed_form(state.y1, state.y2, i_bar, grid, params)[0]
        neg = np.nonzero(vals < 0)[0]
        if neg.size == 0:
            return t_hi
    k = int(neg[0])
    return brentq(y1_at, grid[k - 1] if k > 0 else 0.0, grid[k], xtol=1e-12)


def step_constant_current(s: KibamState, i_bar: float, delta: float, params: KibamParams) -> KibamState:
    """Advance one battery by ``delta`` seconds at constant current ``i_bar``.

    Raises ``Depleted`` if the available well empties first.  Charge that
    would push a well above its capacity is discarded.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if i_bar < 0 and min_available(s.y1, s.y2, i_bar, delta, params) < 0:
        raise Depleted(time_to_empty(s, i_bar, params, delta))
    y1, y2 = closed_form(s.y1, s.y2, i_bar, delta, params)
    y1, y2 = float(y1), float(y2)
    spill = max(y1 - params.y1_max, 0.0) + max(y2 - params.y2_max, 0.0)
    if spill > 0:
        log.debug("charge saturated, %.6g As discarded", spill)
        y1 = min(y1, params.y1_max)
        y2 = min(y2, params.y2_max)
    return KibamState(y1, y2)


def step_ode(s: KibamState, current_fn: Callable, delta, params: KibamParams,
             h: float = 1e-3) -> KibamState:
    """Fixed-step RK4 integration of the two-well equations.

    ``s.y1``/``s.y2`` and ``delta`` may be arrays to integrate many cases at
    once; every case then takes the same number of steps, each of length
    ``delta / n`` with ``n = ceil(max(delta) / h)``.  ``current_fn(t)``
    receives the per-case elapsed time and returns the signed current.
    """
    w = params.omega
    kf = params.k_F
    y1 = np.array(s.y1, dtype=float)
    y2 = np.array(s.y2, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("delta must be >= 0")
    n = max(int(math.ceil(float(np.max(delta)) / h)), 1)
    step = delta / n

    def rhs(t, a, b):
        flow = kf * (b / (1.0 - w) - a / w)
        return current_fn(t) + flow, -flow

    depleted_at = np.full(np.shape(y1), np.inf)
    for k in range(n):
        t = k * step
        k1a, k1b = rhs(t, y1, y2)
        k2a, k2b = rhs(t + step / 2, y1 + step / 2 * k1a, y2 + step / 2 * k1b)
        k3a, k3b = rhs(t + step / 2, y1 + step / 2 * k2a, y2 + step / 2 * k2b)
        k4a, k4b = rhs(t + step, y1 + step * k3a, y2 + step * k3b)
        y1 = y1 + step / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        y2 = y2 + step / 6 * (k1b + 2 * k2b + 2 * k3b + k4b)
        newly = (y1 < 0) & ~np.isfinite(depleted_at)
        if np.any(newly):
            depleted_at = np.where(newly, t + step, depleted_at)
    if np.ndim(y1) == 0:
        if np.isfinite(depleted_at):
            raise Depleted(float(depleted_at))
        return KibamState(float(y1), float(y2))
    return KibamState(y1, y2)


def discharge_current(control_current: float, comm_power: float, params: KibamParams) -> float:
    return control_current + comm_power / params.e_tr


def charge_current_from_power(p0, params: KibamParams):
    return np.minimum(np.asarray(p0, dtype=float) / params.e_nom, params.i_ch_max)[()]


# -- two-battery bank ---------------------------------------------------------

def bank_step(y1, y2, i_dis, i_ch, dt, params: KibamParams):
    """Advance a batch of two-battery banks by one time slot.

    ``y1``/``y2`` have shape ``(M, 2)``.  The battery with the higher state
    of charge (lower index on ties) carries the discharge current and the
    other one receives the charge current.  If the discharging battery would
    empty its available well, the roles are swapped for this slot; if the
    other battery cannot carry the load either, the bank is depleted.

    Returns ``(y1, y2, depleted, spilled)``; depleted rows keep their input
    state.
    """
    m = y1.shape[0]
    i_dis = np.broadcast_to(np.asarray(i_dis, dtype=float), (m,))
    i_ch = np.broadcast_to(np.asarray(i_ch, dtype=float), (m,))
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (m,))
    rows = np.arange(m)
    soc = y1 + y2
    first = (soc[:, 1] > soc[:, 0]).astype(np.intp)

    def apply(dis_idx):
        cur = np.empty((m, 2))
        cur[rows, dis_idx] = -i_dis
        cur[rows, 1 - dis_idx] = i_ch
        low = min_available(y1[rows, dis_idx], y2[rows, dis_idx], -i_dis, dt, params)
        n1, n2 = closed_form(y1, y2, cur, dt[:, None], params)
        return n1, n2, (i_dis > 0) & (low < 0)

    n1, n2, empty = apply(first)
    if np.any(empty):
        s1, s2, empty2 = apply(1 - first)
        n1 = np.where(empty[:, None], s1, n1)
        n2 = np.where(empty[:, None], s2, n2)
        empty = empty & empty2
    spilled = (np.maximum(n1 - params.y1_max, 0.0).sum(axis=1)
               + np.maximum(n2 - params.y2_max, 0.0).sum(axis=1))
    n1 = np.minimum(n1, params.y1_max)
    n2 = np.minimum(n2, params.y2_max)
    if np.any(empty):
        n1 = np.where(empty[:, None], y1, n1)
        n2 = np.where(empty[:, None], y2, n2)
        spilled = np.where(empty, 0.0, spilled)
    return n1, n2, empty, spilled


@dataclass(frozen=True)
class BatteryBank:
    """Two identical batteries sharing one parameter set."""

    batteries: tuple[KibamState, KibamState]
    params: KibamParams

    @classmethod
    def full(cls, params: KibamParams) -> "BatteryBank":
        return cls((init_full(params), init_full(params)), params)

    @property
    def capacity(self) -> float:
        return len(self.batteries) * self.params.capacity

    def discharge_index(self) -> int:
        a, b = self.batteries
        return 1 if b.total > a.total else 0

    def step(self, i_dis: float, i_ch: float, dt: float) -> tuple["BatteryBank", float]:
        """One slot under the bank role policy; returns the new bank and discarded charge."""
        y1 = np.array([[b.y1 for b in self.batteries]])
        y2 = np.array([[b.y2 for b in self.batteries]])
        n1, n2, empty, spilled = bank_step(y1, y2, i_dis, i_ch, dt, self.params)
        if empty[0]:
            served = max(time_to_empty(b, -i_dis, self.params, dt) for b in self.batteries)
            raise Depleted(served)
        states = tuple(KibamState(float(n1[0, j]), float(n2[0, j])) for j in range(2))
        return BatteryBank(states, self.params), float(spilled[0])


def soc(bank: BatteryBank) -> float:
    return sum(b.total for b in bank.batteries) / bank.capacity
