"""Interference Laplace transforms, SINR and rate coverage of the typical UE.

Conditional coverage follows the Gamma-CDF lower bound
``P(h^2 < x) > (1 - e^{-eta x})^m``, which turns the fading average into an
alternating binomial sum of Laplace transforms.  Tier coverage integrates the
conditional values against the serving-distance laws of
:mod:`riseval.association`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import association as assoc
from .channel import LinkKind
from .config import SystemParams, derive
from .kernels import laplace_exponent
from .quadrature import QuadratureSpec, integrate_2d_semi_infinite, integrate_finite, integrate_semi_infinite
from .specfun import bessel_k0, gauss_2f1_negz

_EXACT_SUM_TAIL = 1e-6


class PathLossCase(enum.Enum):
    SMALL = "small"
    LARGE = "large"


class RateMode(enum.Enum):
    EXACT_SUM = "exact"
    MEAN_LOAD = "mean"


@dataclass(frozen=True)
class ThresholdSet:
    """SINR targets (linear) of the typical and connected UE, and rate targets (bit/s)."""

    tau_t: float
    tau_c: float
    rho_t: float = 1e6
    rho_c: float = 1e6

    def __post_init__(self):
        for name in ("tau_t", "tau_c", "rho_t", "rho_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def from_params(cls, params: SystemParams) -> "ThresholdSet":
        return cls(params.tau_t, params.tau_c, params.rho_t, params.rho_c)


@dataclass(frozen=True)
class EffectiveThreshold:
    """Fading thresholds of the two NOMA decoding cases; None marks an infeasible case."""

    tau_star: float | None
    tau_t_large: float | None


@dataclass(frozen=True)
class RisGeometry:
    d_br: float
    d_ru: float

    def __post_init__(self):
        if not (self.d_br > 0 and self.d_ru > 0):
            raise ValueError("RIS distances must be > 0")

    @property
    def product(self) -> float:
        return self.d_br * self.d_ru


@dataclass(frozen=True)
class CoverageBreakdown:
    total: float
    los: float
    ris: float
    est_error: float
    converged: bool


def effective_thresholds(tau_t: float, tau_c: float, a_s: float, a_l: float) -> EffectiveThreshold:
    """Thresholds on the serving fading power for the small and large path-loss cases.

    Small case: the UE first decodes the connected UE's signal (SIC), then its
    own.  Large case: the connected UE's signal is treated as noise.
    """
    gap_c = a_l - tau_c * a_s
    tau_star = max(tau_c / gap_c, tau_t / a_s) if gap_c > 0 else None
    gap_t = a_l - tau_t * a_s
    tau_large = tau_t / gap_t if gap_t > 0 else None
    return EffectiveThreshold(tau_star, tau_large)


def _thresholds(thresholds, params):
    return ThresholdSet.from_params(params) if thresholds is None else thresholds


def _case_tau(eff: EffectiveThreshold, case: PathLossCase):
    return eff.tau_star if case is PathLossCase.SMALL else eff.tau_t_large


def _scalar(x_in, arr):
    arr = np.asarray(arr, dtype=float)
    return float(arr) if np.ndim(x_in) == 0 and arr.ndim == 0 else arr


# ----------------------------------------------------------- Laplace transforms


def laplace_los(s, d_min, params: SystemParams):
    """``E[exp(-s I_L)]`` for active LoS interferers beyond ``d_min``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("s must be >= 0")
    lam = derive(params).lambda_b_active
    j = laplace_exponent(s_arr * params.p_b * params.c_l / params.m_l, d_min, params.alpha_l,
                         params.m_l, params.beta_blockage, True)
    out = np.exp(-2.0 * math.pi * lam * np.asarray(j))
    return float(out) if out.ndim == 0 else out


def laplace_nlos(s, params: SystemParams):
    """``E[exp(-s I_N)]`` for active NLoS interferers over the whole plane."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("s must be >= 0")
    lam = derive(params).lambda_b_active
    j = laplace_exponent(s_arr * params.p_b * params.c_n / params.m_n, 0.0, params.alpha_n,
                         params.m_n, params.beta_blockage, False)
    out = np.exp(-2.0 * math.pi * lam * np.asarray(j))
    return float(out) if out.ndim == 0 else out


def ris_q(n_eta_tau_over_m, params: SystemParams):
    """``2F1(m_R, -2/alpha_R; 1 - 2/alpha_R; -u) - 1`` for ``u = s delta_2``."""
    d = 2.0 / params.alpha_r
    return np.asarray(gauss_2f1_negz(params.m_r, -d, 1.0 - d, -np.asarray(n_eta_tau_over_m, dtype=float))) - 1.0


def laplace_ris(s, geom: RisGeometry, params: SystemParams):
    """``E[exp(-s I_R)]`` from active BSs reflected by the serving RIS."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("s must be >= 0")
    der = derive(params)
    delta1 = math.pi * der.lambda_b_active * geom.d_br**2 / 2.0
    delta2 = params.p_b * der.c_r_mean * geom.product ** -params.alpha_r / params.m_r
    out = np.exp(-delta1 * ris_q(s_arr * delta2, params))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------- conditional coverage


def _binomial_weights(m: int):
    n = np.arange(1, m + 1)
    c = np.array([math.comb(m, k) for k in n], dtype=float)
    return n, c * (-1.0) ** (n + 1)


def _los_conditional(x, tau, params: SystemParams, der):
    """Conditional coverage of a LoS-served UE at serving distances ``x`` (array)."""
    x = np.asarray(x, dtype=float)
    n, w = _binomial_weights(params.m_l)
    gain = params.c_l * x**-params.alpha_l
    s = (n[:, None] * der.eta_l * tau) / (params.p_b * gain[None, :])
    j_l = laplace_exponent(s * params.p_b * params.c_l / params.m_l, x[None, :], params.alpha_l,
                           params.m_l, params.beta_blockage, True)
    j_n = laplace_exponent(s * params.p_b * params.c_n / params.m_n, 0.0, params.alpha_n,
                           params.m_n, params.beta_blockage, False)
    expo = -2.0 * math.pi * der.lambda_b_active * (j_l + j_n) - s * der.sigma2
    return np.clip(w @ np.exp(expo), 0.0, 1.0)


def _ris_conditional_terms(z, tau, params: SystemParams, der):
    """Per-n factors of a RIS-served UE at composite distances ``z``.

    Returns ``(weights, q_n, g)`` with ``g[n, k]`` the LoS/NLoS/noise part; the
    RIS interference factor is ``exp(-pi lam_active d_br^2 q_n / 2)``.
    """
    z = np.asarray(z, dtype=float)
    n, w = _binomial_weights(params.m_r)
    q = ris_q(n * der.eta_r * tau / params.m_r, params)
    gain = der.c_r_mean * z**-params.alpha_r
    s = (n[:, None] * der.eta_r * tau) / (params.p_b * gain[None, :])
    d_min = assoc.phi(z, params)
    j_l = laplace_exponent(s * params.p_b * params.c_l / params.m_l, np.atleast_1d(d_min)[None, :],
                           params.alpha_l, params.m_l, params.beta_blockage, True)
    j_n = laplace_exponent(s * params.p_b * params.c_n / params.m_n, 0.0, params.alpha_n,
                           params.m_n, params.beta_blockage, False)
    g = np.exp(-2.0 * math.pi * der.lambda_b_active * (j_l + j_n) - s * der.sigma2)
    return w, np.atleast_1d(q), g


def _ris_conditional(d_br, d_ru, tau, params: SystemParams, der):
    d_br, d_ru = np.broadcast_arrays(np.asarray(d_br, dtype=float), np.asarray(d_ru, dtype=float))
    w, q, g = _ris_conditional_terms((d_br * d_ru).ravel(), tau, params, der)
    l_r = np.exp(-math.pi * der.lambda_b_active * d_br.ravel()[None, :] ** 2 * q[:, None] / 2.0)
    return np.clip(w @ (l_r * g), 0.0, 1.0).reshape(d_br.shape)


def conditional_coverage(link: LinkKind, pathloss_case: PathLossCase, distance,
                         thresholds: ThresholdSet | None = None, params: SystemParams | None = None):
    """Coverage given the serving link, the decoding case and the serving geometry.

    Parameters
    ----------
    link : LinkKind
        ``DIRECT_LOS`` or ``RIS_REFLECTED``.
    pathloss_case : PathLossCase
        ``SMALL`` (SIC first) or ``LARGE`` (connected UE treated as noise).
    distance : float, array_like or RisGeometry
        Serving distance for a LoS link, geometry for a RIS link.
    thresholds : ThresholdSet, optional
        Defaults to the thresholds held in ``params``.

    Returns
    -------
    float or ndarray
        Zero when the case is infeasible for the thresholds.
    """
    params = params or SystemParams()
    th = _thresholds(thresholds, params)
    tau = _case_tau(effective_thresholds(th.tau_t, th.tau_c, params.a_s, params.a_l_pow), pathloss_case)
    der = derive(params)
    if link is LinkKind.DIRECT_LOS:
        d = np.asarray(distance, dtype=float)
        if np.any(d <= 0):
            raise ValueError("serving distance must be > 0")
        if tau is None:
            return _scalar(distance, np.zeros(d.shape))
        return _scalar(distance, _los_conditional(np.atleast_1d(d).ravel(), tau, params, der).reshape(d.shape))
    if link is LinkKind.RIS_REFLECTED:
        if not isinstance(distance, RisGeometry):
            raise TypeError("a RIS link needs a RisGeometry")
        if tau is None:
            return 0.0
        return float(_ris_conditional(distance.d_br, distance.d_ru, tau, params, der))
    raise ValueError("NLoS BSs never serve the typical UE")


# --------------------------------------------------------------- SINR coverage


def _default_spec() -> QuadratureSpec:
    return QuadratureSpec(rel_tol=1e-6, abs_tol=1e-10, max_subdivisions=4000)


def _los_tier(eff: EffectiveThreshold, params: SystemParams, der, spec: QuadratureSpec):
    def integrand(tau):
        def f(x):
            return (_los_conditional(x, tau, params, der) * assoc.pdf_nearest_los_bs(x, params)
                    * assoc.survival_product_distance(assoc.phi_inv(x, params), params))
        return f

    total, err, ok = 0.0, 0.0, True
    if eff.tau_star is not None:
        r = integrate_finite(integrand(eff.tau_star), 0.0, params.d_c, spec)
        total, err, ok = total + r.value, err + r.est_error, ok and r.converged
    if eff.tau_t_large is not None:
        scale = min(1.0 / params.beta_blockage, 1.0 / math.sqrt(math.pi * params.lambda_b))
        r = integrate_semi_infinite(integrand(eff.tau_t_large), params.d_c, spec.replace(scale=scale))
        total, err, ok = total + r.value, err + r.est_error, ok and r.converged
    return total, err, ok


def _ris_tier_nested(eff: EffectiveThreshold, params: SystemParams, der, spec: QuadratureSpec):
    z_c = assoc.phi_inv(params.d_c, params)
    f_br = lambda x: assoc.pdf_nearest_point(x, params.lambda_b)
    f_ru = lambda x: assoc.pdf_nearest_point(x, params.lambda_r)

    def integrand(tau):
        def f(x1, x2):
            x2 = np.asarray(x2, dtype=float)
            p = _ris_conditional(x2, x1, tau, params, der)
            return p * assoc.survival_nearest_los_bs(assoc.phi(x1 * x2, params), params) * f_br(x2) * f_ru(x1)
        return f

    outer = spec.replace(scale=1.0 / math.sqrt(math.pi * params.lambda_r))
    inner = spec.replace(scale=1.0 / math.sqrt(math.pi * params.lambda_b),
                         rel_tol=spec.rel_tol * 0.1, abs_tol=spec.abs_tol * 0.1)
    total, err, ok = 0.0, 0.0, True
    if eff.tau_star is not None:
        r = integrate_2d_semi_infinite(integrand(eff.tau_star), outer, inner_upper=lambda x1: z_c / x1,
                                       inner_spec=inner)
        total, err, ok = total + r.value, err + r.est_error, ok and r.converged
    if eff.tau_t_large is not None:
        r = integrate_2d_semi_infinite(integrand(eff.tau_t_large), outer, inner_lower=lambda x1: z_c / x1,
                                       inner_spec=inner)
        total, err, ok = total + r.value, err + r.est_error, ok and r.converged
    return total, err, ok


def _ris_tier_reduced(eff: EffectiveThreshold, params: SystemParams, der, spec: QuadratureSpec):
    """RIS tier as a single integral over the composite distance z.

    For fixed z, integrating ``f_RU(z/x2) f_BR(x2) exp(-pi lam q x2^2 / 2) / x2``
    over x2 gives ``4 pi^2 lb lr z K0(2 pi z sqrt(lr (lb + lam q / 2)))``.
    """
    z_c = assoc.phi_inv(params.d_c, params)
    lb, lr, lam = params.lambda_b, params.lambda_r, der.lambda_b_active

    def integrand(tau):
        def f(z):
            w, q, g = _ris_conditional_terms(z, tau, params, der)
            rate = 2.0 * math.pi * np.sqrt(lr * (lb + lam * q / 2.0))
            arg = np.minimum(rate[:, None] * z[None, :], 700.0)
            kern = 4.0 * math.pi**2 * lb * lr * z[None, :] * bessel_k0(arg)
            surv = assoc.survival_nearest_los_bs(assoc.phi(z, params), params)
            return (w @ (g * kern)) * surv
        return f

    scale = 1.0 / (2.0 * math.pi * math.sqrt(lb * lr))
    total, err, ok = 0.0, 0.0, True
    if eff.tau_star is not None:
        r = integrate_finite(integrand(eff.tau_star), 0.0, z_c, spec)
        total, err, ok = total + r.value, err + r.est_error, ok and r.converged
    if eff.tau_t_large is not None:
        r = integrate_semi_infinite(integrand(eff.tau_t_large), z_c, spec.replace(scale=scale))
        total, err, ok = total + r.value, err + r.est_error, ok and r.converged
    return max(total, 0.0), err, ok


def sinr_coverage(thresholds: ThresholdSet | None = None, params: SystemParams | None = None, *,
                  spec: QuadratureSpec | None = None, method: str = "nested") -> CoverageBreakdown:
    """SINR coverage of the typical UE, split into LoS-BS and RIS tiers.

    Parameters
    ----------
    method : {"nested", "reduced"}
        ``"nested"`` integrates the RIS tier over (d_RU, d_BR) directly;
        ``"reduced"`` first integrates d_BR out in closed form for each
        binomial term, leaving one integral over the composite distance.
    """
    params = params or SystemParams()
    th = _thresholds(thresholds, params)
    spec = spec or _default_spec()
    der = derive(params)
    eff = effective_thresholds(th.tau_t, th.tau_c, params.a_s, params.a_l_pow)
    l_val, l_err, l_ok = _los_tier(eff, params, der, spec)
    if method == "nested":
        r_val, r_err, r_ok = _ris_tier_nested(eff, params, der, spec)
    elif method == "reduced":
        r_val, r_err, r_ok = _ris_tier_reduced(eff, params, der, spec)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CoverageBreakdown(l_val + r_val, l_val, r_val, l_err + r_err, l_ok and r_ok)


def _asymptote(tau, params: SystemParams) -> float:
    der = derive(params)
    n, w = _binomial_weights(params.m_r)
    q = ris_q(n * der.eta_r * tau / params.m_r, params)
    return float(w @ (params.lambda_b / (der.lambda_b_active / 2.0 * q + params.lambda_b)))


def sinr_coverage_asymptotic(thresholds: ThresholdSet | None = None, params: SystemParams | None = None) -> float:
    """Coverage limit as the RIS half-length grows without bound."""
    params = params or SystemParams()
    th = _thresholds(thresholds, params)
    tau = effective_thresholds(th.tau_t, th.tau_c, params.a_s, params.a_l_pow).tau_star
    return 0.0 if tau is None else _asymptote(tau, params)


# --------------------------------------------------------------- rate coverage


def log_load_pmf(n, params: SystemParams):
    """Log of the probability that a BS serves ``n >= 1`` UEs."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1) or np.any(n_arr != np.floor(n_arr)):
        raise ValueError("load must be an integer >= 1")
    r = params.lambda_u / params.lambda_b
    lg = np.vectorize(math.lgamma, otypes=[float])
    out = (3.5 * math.log(3.5) + lg(n_arr + 3.5) - math.lgamma(3.5) - lg(n_arr)
           + (n_arr - 1.0) * math.log(r) - (n_arr + 3.5) * math.log(3.5 + r))
    return float(out) if out.ndim == 0 else out


def load_pmf(n, params: SystemParams):
    out = np.exp(log_load_pmf(n, params))
    return float(out) if np.ndim(out) == 0 else out


def mean_load(params: SystemParams) -> float:
    return 1.0 + 1.28 * params.lambda_u / params.lambda_b


def rate_threshold(rate, bandwidth):
    """SINR needed for ``rate`` bit/s over ``bandwidth`` Hz: ``2^(rate/W) - 1``."""
    return np.expm1(np.asarray(rate, dtype=float) / bandwidth * math.log(2.0))


def load_truncation(params: SystemParams, tail: float = _EXACT_SUM_TAIL) -> int:
    """Smallest N with ``1 - sum_{n<=N} f_B(n) < tail``."""
    acc, n = 0.0, 0
    block = 64
    while True:
        ns = np.arange(n + 1, n + block + 1)
        pmf = load_pmf(ns, params)
        cum = acc + np.cumsum(pmf)
        hit = np.nonzero(1.0 - cum < tail)[0]
        if hit.size:
            return int(ns[hit[0]])
        acc, n = float(cum[-1]), n + block
        if n > 10**6:
            raise RuntimeError("load PMF tail did not fall below the truncation level")


def _rate_thresholds(th: ThresholdSet, load: float, params: SystemParams) -> ThresholdSet:
    tau_c = float(rate_threshold(load * th.rho_c, params.bandwidth_w))
    tau_t = float(rate_threshold(load * th.rho_t, params.bandwidth_w))
    return ThresholdSet(tau_t, tau_c, th.rho_t, th.rho_c)


def rate_coverage(thresholds: ThresholdSet | None = None, params: SystemParams | None = None,
                  mode: RateMode = RateMode.MEAN_LOAD, *, spec: QuadratureSpec | None = None,
                  method: str = "reduced") -> float:
    """Probability that the typical UE meets its rate target under NOMA load sharing.

    ``EXACT_SUM`` averages the SINR coverage over the load PMF, truncated once
    the remaining mass is below 1e-6; ``MEAN_LOAD`` evaluates it once at the
    mean load.
    """
    params = params or SystemParams()
    th = _thresholds(thresholds, params)
    if RateMode(mode) is RateMode.MEAN_LOAD:
        return sinr_coverage(_rate_thresholds(th, mean_load(params), params), params,
                             spec=spec, method=method).total
    n_max = load_truncation(params)
    pmf = load_pmf(np.arange(1, n_max + 1), params)
    total = 0.0
    for n, f in zip(range(1, n_max + 1), pmf):
        cov = sinr_coverage(_rate_thresholds(th, n, params), params, spec=spec, method=method).total
        total += f * cov
        # once both cases are infeasible every larger load gives zero
        eff = effective_thresholds(*_pair(_rate_thresholds(th, n, params)), params.a_s, params.a_l_pow)
        if eff.tau_star is None and eff.tau_t_large is None:
            break
    return total


def _pair(th: ThresholdSet):
    return th.tau_t, th.tau_c


def rate_coverage_asymptotic(thresholds: ThresholdSet | None = None, params: SystemParams | None = None) -> float:
    """Rate coverage limit as the RIS half-length grows, at the mean load."""
    params = params or SystemParams()
    th = _rate_thresholds(_thresholds(thresholds, params), mean_load(params), params)
    return sinr_coverage_asymptotic(th, params)
