"""Serving-distance laws and LoS-BS versus RIS association probabilities.

The typical UE is served either by its nearest LoS BS at distance ``d0`` or
through its nearest RIS by the BS nearest to that RIS, with composite
distance ``d_br * d_ru``.  It picks the path with the larger mean received
power, which reduces to comparing ``d0`` with ``phi(d_br * d_ru)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .config import SystemParams, derive
from .quadrature import QuadratureSpec, integrate_semi_infinite


class AssociationError(RuntimeError):
    """Association integral failed to converge; carries the quadrature outcome."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class BranchError(ValueError):
    """Closed form evaluated outside its real branch."""


class DensityKind(enum.Enum):
    NEAREST_LOS_BS = "nearest_los_bs"
    NEAREST_BS = "nearest_bs"
    NEAREST_RIS = "nearest_ris"
    PRODUCT_BS_RIS_UE = "product"


@dataclass(frozen=True)
class DistanceDensity:
    """One of the four serving-distance densities for a parameter snapshot."""

    kind: DensityKind
    params: SystemParams
    los_always: bool = False

    def pdf(self, x):
        p = self.params
        if self.kind is DensityKind.NEAREST_LOS_BS:
            return pdf_nearest_los_bs(x, p, los_always=self.los_always)
        if self.kind is DensityKind.NEAREST_BS:
            return pdf_nearest_point(x, p.lambda_b)
        if self.kind is DensityKind.NEAREST_RIS:
            return pdf_nearest_point(x, p.lambda_r)
        return pdf_product_distance(x, p)

    def survival(self, x):
        p = self.params
        if self.kind is DensityKind.NEAREST_LOS_BS:
            return survival_nearest_los_bs(x, p, los_always=self.los_always)
        if self.kind is DensityKind.NEAREST_BS:
            return np.exp(-math.pi * p.lambda_b * np.square(x))
        if self.kind is DensityKind.NEAREST_RIS:
            return np.exp(-math.pi * p.lambda_r * np.square(x))
        return survival_product_distance(x, p)

    def mass(self) -> float:
        if self.kind is DensityKind.NEAREST_LOS_BS and not self.los_always:
            return prob_los_exists(self.params)
        return 1.0


@dataclass(frozen=True)
class AssociationReport:
    a_l: float
    a_r: float
    upper_bound_pl: float
    lower_bound_pn: float
    est_error: float = 0.0


def _out(x_in, arr):
    return float(arr) if np.ndim(x_in) == 0 else arr


def prob_los_exists(params: SystemParams) -> float:
    """Probability that at least one BS is in LoS of the typical UE."""
    return -math.expm1(-2.0 * math.pi * params.lambda_b / params.beta_blockage**2)


def los_mass_integral(x, beta, los_always=False):
    """``int_0^x r p_L(r) dr`` in closed form."""
    x = np.asarray(x, dtype=float)
    if los_always:
        return _out(x, 0.5 * x * x)
    y = beta * x
    small = y < 1e-3
    ys = np.where(small, y, 0.0)
    series = ys**2 * (0.5 - ys * (1.0 / 3.0 - ys * (1.0 / 8.0 - ys * (1.0 / 30.0 - ys / 144.0))))
    yb = np.where(small, 1.0, y)
    direct = -np.expm1(-yb) - yb * np.exp(-yb)
    return _out(x, np.where(small, series, direct) / beta**2)


def survival_nearest_los_bs(x, params: SystemParams, los_always=False):
    """``P(no LoS BS within x)``; tends to ``P_N`` as x grows."""
    g = los_mass_integral(x, params.beta_blockage, los_always)
    return _out(x, np.exp(-2.0 * math.pi * params.lambda_b * np.asarray(g)))


def pdf_nearest_los_bs(x, params: SystemParams, los_always=False):
    """Improper density of the nearest LoS BS distance (total mass ``P_L``)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("distance must be >= 0")
    p_l = 1.0 if los_always else np.exp(-params.beta_blockage * xa)
    out = 2.0 * math.pi * params.lambda_b * xa * p_l * survival_nearest_los_bs(xa, params, los_always)
    return _out(x, out)


def pdf_nearest_point(x, density):
    """Nearest-neighbour distance density of a PPP of the given intensity."""
    xa = np.asarray(x, dtype=float)
    return _out(x, 2.0 * math.pi * density * xa * np.exp(-math.pi * density * xa * xa))


def _product_rate(params: SystemParams) -> float:
    return 2.0 * math.pi * math.sqrt(params.lambda_b * params.lambda_r)


def pdf_product_distance(z, params: SystemParams):
    """Density ``a^2 z K0(a z)`` of ``d_br * d_ru`` with ``a = 2 pi sqrt(lb lr)``."""
    za = np.asarray(z, dtype=float)
    if np.any(za <= 0):
        raise ValueError("product distance must be > 0")
    a = _product_rate(params)
    return _out(z, a * a * za * specfun.bessel_k0(a * za))


def survival_product_distance(z, params: SystemParams):
    """``P(d_br d_ru > z) = a z K1(a z)``, equal to 1 at z = 0."""
    za = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(za < 0):
        raise ValueError("product distance must be >= 0")
    a = _product_rate(params)
    out = np.ones_like(za)
    pos = za > 0
    if pos.any():
        u = a * za[pos]
        out[pos] = u * specfun.bessel_k1(u)
    return _out(z, out.reshape(np.shape(np.atleast_1d(z))) if np.ndim(z) else out[0])


def phi(x, params: SystemParams):
    """LoS distance giving the same mean power as a composite RIS distance x."""
    d = derive(params)
    xa = np.asarray(x, dtype=float)
    out = (params.c_l / d.c_r_mean) ** (1.0 / params.alpha_l) * xa ** (params.alpha_r / params.alpha_l)
    return _out(x, out)


def phi_inv(y, params: SystemParams):
    d = derive(params)
    ya = np.asarray(y, dtype=float)
    out = (d.c_r_mean / params.c_l) ** (1.0 / params.alpha_r) * ya ** (params.alpha_l / params.alpha_r)
    return _out(y, out)


def _default_scale(params: SystemParams) -> float:
    return 1.0 / _product_rate(params)


def assoc_prob_los(params: SystemParams, spec: QuadratureSpec | None = None,
                   los_always: bool = False) -> AssociationReport:
    """Probability that the typical UE is served by a direct LoS BS.

    Evaluated as ``P_L - int (F0(phi(x)) - P_N) f_prod(x) dx`` where ``F0`` is
    the nearest-LoS-BS survival.  The integrand is positive, so the strict
    bounds ``A_L < P_L`` and ``A_R > P_N`` hold by construction.  With
    ``los_always`` every BS is LoS (``P_L = 1``, ``P_N = 0``).
    """
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)
    spec = spec.replace(scale=_default_scale(params)) if spec.scale == 1.0 else spec
    p_l = 1.0 if los_always else prob_los_exists(params)
    p_n = 1.0 - p_l if los_always else math.exp(-2.0 * math.pi * params.lambda_b / params.beta_blockage**2)
    a = _product_rate(params)
    c = (params.c_l / derive(params).c_r_mean) ** (1.0 / params.alpha_l)
    expo = params.alpha_r / params.alpha_l
    # beyond this the K0 factor has underflowed (a x > 700)
    x_cut = 700.0 / a

    def gap(x):
        r = c * x**expo
        if los_always:
            excess = np.exp(-math.pi * params.lambda_b * r * r)
        else:
            # F0(r) - P_N = P_N (exp(2 pi lb int_r^inf t p_L(t) dt) - 1)
            y = params.beta_blockage * r
            tail = np.exp(-y) * (1.0 + y) / params.beta_blockage**2
            excess = p_n * np.expm1(2.0 * math.pi * params.lambda_b * tail)
        return np.where(x < x_cut, excess * a * a * x * specfun.bessel_k0(np.minimum(a * x, 700.0)), 0.0)

    res = integrate_semi_infinite(gap, 0.0, spec)
    if not res.converged:
        raise AssociationError("association integral did not converge", res)
    a_l = p_l - res.value
    return AssociationReport(a_l, 1.0 - a_l, p_l, p_n, res.est_error)


def assoc_prob_closed_double(params: SystemParams) -> float:
    """Closed-form LoS association when every BS is LoS and ``alpha_L = 2 alpha_R``."""
    if abs(params.alpha_l - 2.0 * params.alpha_r) > 1e-9 * params.alpha_l:
        raise ValueError("closed form requires alpha_l = 2 alpha_r")
    d = derive(params)
    c = d.c_lr_ratio
    lam = d.lambda_ratio_rb
    disc = c**4 - 4.0 * lam
    if disc <= 0:
        raise BranchError("closed form is complex-valued when c_LR^4 <= 4 lambda_RB")
    c2 = c * c
    root = math.sqrt(disc)
    term = (c2 / root) * math.log(c2 / (2.0 * math.sqrt(lam)) + math.sqrt(c**4 / (4.0 * lam) - 1.0)) - 1.0
    return 1.0 - (4.0 * lam / disc) * term


def assoc_prob_closed_equal(params: SystemParams) -> float:
    """Closed-form LoS association when every BS is LoS and ``alpha_L = alpha_R``."""
    if abs(params.alpha_l - params.alpha_r) > 1e-9 * params.alpha_l:
        raise ValueError("closed form requires alpha_l = alpha_r")
    c = derive(params).c_lr_ratio
    z = math.pi * params.lambda_r / (c * c)
    # e^{z/2} W(z) = sqrt(z) e^z E1(z)
    _, scaled = specfun._e1_parts(np.array([z]))
    return 1.0 - (math.sqrt(math.pi * params.lambda_r) / c) * math.sqrt(z) * float(scaled[0])
