"""Distributed laser charging: received power, harvested energy, source-power cap."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .battery import KibamParams
from .errors import QuadratureNotConverged, ValidationError

METERS_PER_KM = 1000.0


@dataclass(frozen=True)
class DlcParams:
    """Photovoltaic receiver fit ``P0 = a1*a2*nu*Ps + a2*b1*nu + b2`` and source setup.

    ``alpha`` is the attenuation per kilometre.  ``p_s=None`` means "use the
    largest source power the battery charger accepts" and is resolved by the
    scenario.
    """

    a1: float = 0.34
    b1: float = -1.1
    a2: float = 0.5434
    b2: float = -0.2761
    alpha: float = 0.1019
    p_s: float | None = None
    source_pos: tuple[float, float, float] = (1000.0, 0.0, 50.0)
    wavelength: float = 1550.0

    def __post_init__(self):
        problems = []
        for name in ("a1", "a2"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0 (got {getattr(self, name)!r})")
        if not self.alpha >= 0:
            problems.append(f"alpha must be >= 0 (got {self.alpha!r})")
        if self.p_s is not None and not self.p_s >= 0:
            problems.append(f"p_s must be >= 0 (got {self.p_s!r})")
        if len(self.source_pos) != 3:
            problems.append("source_pos must be a 3D point")
        if problems:
            raise ValidationError(problems)


def transmission_efficiency(d, params: DlcParams):
    """Average beam transmission over ``d`` metres."""
    return np.exp(-params.alpha * np.asarray(d, dtype=float) / METERS_PER_KM)[()]


def _source_power(params: DlcParams, p_s):
    p_s = params.p_s if p_s is None else p_s
    if p_s is None:
        raise ValueError("source power is unresolved; pass p_s or set DlcParams.p_s")
    return p_s


def received_power(d, params: DlcParams, p_s: float | None = None):
    """Electrical power out of the receiver, clamped at zero below cut-in."""
    p_s = _source_power(params, p_s)
    nu = transmission_efficiency(d, params)
    raw = params.a1 * params.a2 * nu * p_s + params.a2 * params.b1 * nu + params.b2
    return np.maximum(raw, 0.0)[()]


def harvesting_efficiency(d, params: DlcParams, p_s: float | None = None):
    """Receiver-to-source power ratio.

    With ``p_s=None`` and no ``params.p_s`` this returns the high-power limit
    ``a1*a2*nu(d)``, which is also the marginal efficiency at any power.
    """
    p_s = params.p_s if p_s is None else p_s
    if p_s is None:
        return params.a1 * params.a2 * transmission_efficiency(d, params)
    return received_power(d, params, p_s) / p_s


def harvested_energy(distance_fn: Callable[[float], float], t0: float, tf: float,
                     params: DlcParams, p_s: float | None = None) -> float:
    if tf < t0:
        raise ValueError("tf must be >= t0")
    if tf == t0:
        return 0.0
    p_s = _source_power(params, p_s)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(lambda t: float(received_power(distance_fn(t), params, p_s)),
                                    t0, tf, epsabs=0.0, epsrel=1e-11, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureNotConverged(str(exc)) from exc
    return val


def max_source_power(d, battery: KibamParams, params: DlcParams):
    """Largest emitted power whose received power stays within ``I_ch * e_nom``."""
    nu = transmission_efficiency(d, params)
    cap = battery.i_ch_max * battery.e_nom
    return ((cap - params.a2 * params.b1 * nu - params.b2) / (params.a1 * params.a2 * nu))[()]


def distance(a, b) -> float:
    return math.dist(a, b)
