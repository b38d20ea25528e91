"""Link-level model: blockage, direct and RIS path loss, RIS intercept, fading."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class LinkKind(enum.Enum):
    DIRECT_LOS = "los"
    DIRECT_NLOS = "nlos"
    RIS_REFLECTED = "ris"


@dataclass(frozen=True)
class AnglePair:
    """Incidence and reflection angles measured from the RIS normal."""

    theta_br: float
    theta_ru: float

    @classmethod
    def from_total(cls, theta: float, epsilon0: float) -> "AnglePair":
        return cls(epsilon0 * theta, (1.0 - epsilon0) * theta)


def los_probability(d, beta):
    """Probability ``exp(-beta d)`` that a BS at distance d is in LoS."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be >= 0")
    out = np.exp(-beta * d)
    return float(out) if out.ndim == 0 else out


def nlos_probability(d, beta):
    d = np.asarray(d, dtype=float)
    out = -np.expm1(-beta * d)
    return float(out) if out.ndim == 0 else out


def pathloss_direct(d, kind: LinkKind, params):
    """``C d^-alpha`` for a LoS or NLoS BS-UE link."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be > 0")
    if kind is LinkKind.DIRECT_LOS:
        c, alpha = params.c_l, params.alpha_l
    elif kind is LinkKind.DIRECT_NLOS:
        c, alpha = params.c_n, params.alpha_n
    else:
        raise ValueError("pathloss_direct handles direct links only")
    out = c * d**-alpha
    return float(out) if out.ndim == 0 else out


def pathloss_ris(d_br, d_ru, c_r, alpha_r):
    """Product-distance loss ``C_R (d_br d_ru)^-alpha_R`` of a reflected link."""
    d_br = np.asarray(d_br, dtype=float)
    d_ru = np.asarray(d_ru, dtype=float)
    if np.any(d_br <= 0) or np.any(d_ru <= 0):
        raise ValueError("distances must be > 0")
    out = c_r * (d_br * d_ru) ** -alpha_r
    return float(out) if out.ndim == 0 else out


def instantaneous_ris_intercept(half_length, angles: AnglePair):
    return half_length**2 / (16.0 * math.pi**2) * (math.cos(angles.theta_br) + math.cos(angles.theta_ru)) ** 2


def mean_ris_intercept(half_length, epsilon0):
    """RIS intercept averaged over a total angle uniform on [0, pi].

    Written with ``sin(2 pi e) / (1 - 2e) = pi sinc(1 - 2e)`` so that
    ``epsilon0 = 1/2`` needs no special case (the value there is L^2/(8 pi^2)).
    """
    e = float(epsilon0)
    if not 0 < e < 1:
        raise ValueError("epsilon0 must lie in (0, 1)")
    ratio = math.pi * np.sinc(1.0 - 2.0 * e) / (4.0 * e * (1.0 - e))
    return half_length**2 / (16.0 * math.pi**3) * (math.pi + float(ratio))


def sample_nakagami_power(m: int, rng: np.random.Generator, size=None):
    """Unit-mean Gamma(m, 1/m) power gain of a Nakagami-m amplitude."""
    if m < 1:
        raise ValueError("Nakagami order must be >= 1")
    return rng.gamma(m, 1.0 / m, size)
