"""Poisson-point-process simulator of the RIS-aided NOMA HetNet.

Every realization places BSs as a PPP in a disc around the typical UE at the
origin, marks each BS LoS with probability ``exp(-beta r)`` and active with
probability ``lambda_active / lambda_b``, and draws unit-mean Gamma fading for
each direct and each RIS-reflected link.  Only the nearest RIS matters (all
other RISs are inert), so it is drawn directly from the nearest-neighbour law
of the RIS PPP.

Randomness is drawn in fixed-size chunks, chunk ``c`` using
``SeedSequence(seed, spawn_key=(c,))``; results are therefore identical for
either kernel backend and independent of how many realizations are
requested beyond a chunk boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .channel import LinkKind, sample_nakagami_power
from .config import SystemParams, derive
from .coverage import (PathLossCase, RisGeometry, ThresholdSet, effective_thresholds, load_pmf,
                       load_truncation, mean_load, rate_threshold)


class Scheme(enum.Enum):
    NOMA_RIS = "noma_ris"
    OMA_RIS = "oma_ris"
    NOMA_MACRO = "noma_macro"


class EmptyEstimateError(ValueError):
    def __init__(self):
        super().__init__("empty estimate: n_realizations must be >= 1")


@dataclass(frozen=True)
class MCConfig:
    """Simulation controls.

    ``region_radius=None`` picks ``max(10/beta, 5/sqrt(pi lb), 5/sqrt(pi lr))``.
    """

    n_realizations: int = 100_000
    seed: int = 0
    region_radius: float | None = None
    instantaneous_cr: bool = False
    scheme: Scheme = Scheme.NOMA_RIS
    chunk_size: int = 10_000

    def radius(self, params: SystemParams) -> float:
        floor = max(10.0 / params.beta_blockage, 5.0 / math.sqrt(math.pi * params.lambda_b),
                    5.0 / math.sqrt(math.pi * params.lambda_r))
        if self.region_radius is None:
            return floor
        if self.region_radius < floor:
            raise ValueError(f"region_radius must be >= {floor:.1f} m for these parameters")
        return float(self.region_radius)

    def replace(self, **changes) -> "MCConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CoverageResult:
    """A probability (or expectation) with provenance and uncertainty."""

    estimate: float
    stderr: float
    n_or_tol: float
    engine: str = "montecarlo"
    metric: str = ""


@dataclass(frozen=True)
class NetworkRealization:
    bs_xy: np.ndarray
    los: np.ndarray
    active: np.ndarray
    h_direct: np.ndarray
    h_ris: np.ndarray
    ris_xy: np.ndarray
    load: int


@dataclass(frozen=True)
class ServingChoice:
    tier: str
    bs_index: int
    ris_index: int | None = None


@dataclass(frozen=True)
class SinrOutcome:
    sinr_t: float
    sic_ok: bool
    pathloss_case: PathLossCase
    tier: str


@dataclass
class Samples:
    """Per-realization association and unit-power link statistics."""

    tier: np.ndarray
    small: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    load: np.ndarray
    scheme: Scheme = Scheme.NOMA_RIS
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.tier.size)


# targets for :func:`estimate`


@dataclass(frozen=True)
class AssocProb:
    pass


@dataclass(frozen=True)
class SinrCoverage:
    thresholds: ThresholdSet | None = None


@dataclass(frozen=True)
class RateCoverage:
    thresholds: ThresholdSet | None = None


@dataclass(frozen=True)
class LaplaceAt:
    """``E[exp(-s I)]`` of one interference component.

    ``link`` picks LoS interferers beyond ``d_min``, NLoS interferers over the
    plane, or BSs reflected by a RIS at ``geometry``.
    """

    s: float
    link: LinkKind
    d_min: float = 0.0
    geometry: RisGeometry | None = None


@dataclass(frozen=True)
class ConditionalAt:
    """Coverage given the serving link and distance (RIS: geometry).

    ``exclusion=False`` drops the empty disc of radius ``d_br`` around the RIS
    for direct interferers, matching the independence assumption of the
    analytic conditional coverage.
    """

    link: LinkKind
    distance: float | RisGeometry
    thresholds: ThresholdSet | None = None
    exclusion: bool = True


# ------------------------------------------------------------------ sampling


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _load_cdf(params: SystemParams):
    n_max = max(load_truncation(params, 1e-12), 1)
    cdf = np.cumsum(load_pmf(np.arange(1, n_max + 1), params))
    cdf[-1] = 1.0
    return cdf


def _draw_chunk(rng: np.random.Generator, k: int, params: SystemParams, radius: float,
                need_fading: bool, load_cdf):
    """Draw one chunk of realizations; the draw order is part of the seed contract."""
    der = derive(params)
    counts = rng.poisson(params.lambda_b * math.pi * radius**2, size=k)
    u_ris = rng.random(k)
    phi_ris = rng.uniform(0.0, 2.0 * math.pi, size=k)
    u_load = rng.random(k)
    total = int(counts.sum())
    r = radius * np.sqrt(rng.random(total))
    ang = rng.uniform(0.0, 2.0 * math.pi, size=total)
    los = rng.random(total) < np.exp(-params.beta_blockage * r)
    active = rng.random(total) < der.lambda_b_active / params.lambda_b
    d_ru = np.sqrt(-np.log1p(-u_ris) / (math.pi * params.lambda_r))
    out = {
        "counts": counts,
        "bs_x": r * np.cos(ang),
        "bs_y": r * np.sin(ang),
        "los": los,
        "active": active,
        "ris_x": d_ru * np.cos(phi_ris),
        "ris_y": d_ru * np.sin(phi_ris),
        "load": np.searchsorted(load_cdf, u_load, side="right") + 1,
    }
    if need_fading:
        m = np.where(los, params.m_l, params.m_n).astype(float)
        out["h_dir"] = rng.gamma(m, 1.0 / m)
        out["h_ris"] = sample_nakagami_power(params.m_r, rng, total)
    else:
        out["h_dir"] = np.ones(total)
        out["h_ris"] = np.ones(total)
    return out


def _consts(params: SystemParams):
    der = derive(params)
    return (params.c_l, params.c_n, der.c_r_mean, params.alpha_l, params.alpha_n, params.alpha_r,
            params.epsilon0, params.ris_half_length_l, params.d_c)


def _scheme_code(scheme: Scheme) -> int:
    return kernels.SCHEME_MACRO if scheme is Scheme.NOMA_MACRO else kernels.SCHEME_RIS


def simulate(cfg: MCConfig, params: SystemParams, need_sinr: bool = True, backend=None) -> Samples:
    """Run ``cfg.n_realizations`` realizations and keep per-realization statistics."""
    if cfg.n_realizations < 1:
        raise EmptyEstimateError()
    radius = cfg.radius(params)
    cdf = _load_cdf(params)
    parts = []
    done = 0
    chunk = 0
    while done < cfg.n_realizations:
        k = min(cfg.chunk_size, cfg.n_realizations - done)
        d = _draw_chunk(_chunk_rng(cfg.seed, chunk), cfg.chunk_size, params, radius, need_sinr, cdf)
        res = kernels.system_kernel(d["counts"], d["bs_x"], d["bs_y"], d["los"], d["active"],
                                    d["h_dir"], d["h_ris"], d["ris_x"], d["ris_y"], _consts(params),
                                    _scheme_code(cfg.scheme), cfg.instantaneous_cr, need_sinr, backend)
        parts.append([a[:k] for a in res] + [d["load"][:k]])
        done += k
        chunk += 1
    cols = [np.concatenate(c) for c in zip(*parts)]
    return Samples(*cols, scheme=cfg.scheme)


def distance_samples(cfg: MCConfig, params: SystemParams) -> dict:
    """Per-realization serving distances read off the simulated geometry.

    Returns arrays ``d0_los`` (nearest LoS BS, ``inf`` if none), ``d_bs``
    (nearest BS), ``d_br`` (nearest BS to the nearest RIS) and ``d_ru``.
    """
    if cfg.n_realizations < 1:
        raise EmptyEstimateError()
    radius = cfg.radius(params)
    cdf = _load_cdf(params)
    cols = {"d0_los": [], "d_bs": [], "d_br": [], "d_ru": []}
    done, chunk = 0, 0
    while done < cfg.n_realizations:
        k = min(cfg.chunk_size, cfg.n_realizations - done)
        d = _draw_chunk(_chunk_rng(cfg.seed, chunk), cfg.chunk_size, params, radius, False, cdf)
        seg = np.repeat(np.arange(cfg.chunk_size), d["counts"])
        r = np.hypot(d["bs_x"], d["bs_y"])
        dr = np.hypot(d["bs_x"] - d["ris_x"][seg], d["bs_y"] - d["ris_y"][seg])
        out = {name: np.full(cfg.chunk_size, np.inf) for name in ("d0_los", "d_bs", "d_br")}
        np.minimum.at(out["d0_los"], seg[d["los"]], r[d["los"]])
        np.minimum.at(out["d_bs"], seg, r)
        np.minimum.at(out["d_br"], seg, dr)
        out["d_ru"] = np.hypot(d["ris_x"], d["ris_y"])
        for name in cols:
            cols[name].append(out[name][:k])
        done += k
        chunk += 1
    return {name: np.concatenate(v) for name, v in cols.items()}


def sample_realization(cfg: MCConfig, params: SystemParams, index: int) -> NetworkRealization:
    """Regenerate realization ``index`` of the batch defined by ``cfg``."""
    chunk, pos = divmod(index, cfg.chunk_size)
    d = _draw_chunk(_chunk_rng(cfg.seed, chunk), cfg.chunk_size, params, cfg.radius(params), True,
                    _load_cdf(params))
    start = int(d["counts"][:pos].sum())
    sl = slice(start, start + int(d["counts"][pos]))
    return NetworkRealization(
        bs_xy=np.column_stack([d["bs_x"][sl], d["bs_y"][sl]]),
        los=d["los"][sl], active=d["active"][sl],
        h_direct=d["h_dir"][sl], h_ris=d["h_ris"][sl],
        ris_xy=np.array([d["ris_x"][pos], d["ris_y"][pos]]),
        load=int(d["load"][pos]),
    )


def _run_single(real: NetworkRealization, params: SystemParams, scheme: Scheme, inst_cr: bool):
    n = real.los.size
    return kernels.system_kernel(np.array([n]), real.bs_xy[:, 0].copy(), real.bs_xy[:, 1].copy(),
                                 real.los, real.active, real.h_direct, real.h_ris,
                                 real.ris_xy[:1].copy(), real.ris_xy[1:].copy(), _consts(params),
                                 _scheme_code(scheme), inst_cr, True, "numpy")


def associate(real: NetworkRealization, params: SystemParams, scheme: Scheme = Scheme.NOMA_RIS) -> ServingChoice:
    """Max-average-power serving choice for one realization."""
    tier = int(_run_single(real, params, scheme, False)[0][0])
    r = np.hypot(real.bs_xy[:, 0], real.bs_xy[:, 1])
    if tier == kernels.TIER_LOS:
        idx = np.where(real.los, r, np.inf)
        return ServingChoice("los", int(np.argmin(idx)))
    if tier == kernels.TIER_RIS:
        dr = np.hypot(real.bs_xy[:, 0] - real.ris_xy[0], real.bs_xy[:, 1] - real.ris_xy[1])
        return ServingChoice("ris", int(np.argmin(dr)), 0)
    if tier == kernels.TIER_MACRO:
        g = np.where(real.los, params.c_l * r**-params.alpha_l, params.c_n * r**-params.alpha_n)
        return ServingChoice("macro", int(np.argmax(g)))
    return ServingChoice("none", -1)


def evaluate_sinr(real: NetworkRealization, params: SystemParams, thresholds: ThresholdSet | None = None,
                  scheme: Scheme = Scheme.NOMA_RIS) -> SinrOutcome:
    """Decoding SINR of the typical UE and the SIC outcome for one realization."""
    th = thresholds or ThresholdSet.from_params(params)
    tier, small, sig, intf = _run_single(real, params, scheme, False)
    names = {kernels.TIER_LOS: "los", kernels.TIER_RIS: "ris", kernels.TIER_MACRO: "macro"}
    name = names.get(int(tier[0]), "none")
    if name == "none":
        return SinrOutcome(0.0, False, PathLossCase.LARGE, name)
    x = sig[0] / (intf[0] + derive(params).sigma2 / params.p_b)
    if scheme is Scheme.OMA_RIS:
        return SinrOutcome(float(x), True, PathLossCase.LARGE, name)
    if small[0]:
        sic = params.a_l_pow * x / (params.a_s * x + 1.0)
        return SinrOutcome(float(params.a_s * x), bool(sic > th.tau_c), PathLossCase.SMALL, name)
    return SinrOutcome(float(params.a_l_pow * x / (params.a_s * x + 1.0)), True, PathLossCase.LARGE, name)


# ---------------------------------------------------------------- estimation


def _mean_se(ind) -> tuple[float, float]:
    ind = np.asarray(ind, dtype=float)
    n = ind.size
    mean = math.fsum(ind) / n
    var = math.fsum((ind - mean) ** 2) / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def covered(samples: Samples, params: SystemParams, tau_t, tau_c) -> np.ndarray:
    """Coverage indicator per realization; thresholds may be per-realization arrays."""
    sigma_rel = derive(params).sigma2 / params.p_b
    x = np.divide(samples.signal, samples.interference + sigma_rel)
    served = samples.tier != kernels.TIER_NONE
    tau_t = np.broadcast_to(np.asarray(tau_t, dtype=float), x.shape)
    tau_c = np.broadcast_to(np.asarray(tau_c, dtype=float), x.shape)
    if samples.scheme is Scheme.OMA_RIS:
        return served & (x > tau_t)
    a_s, a_l = params.a_s, params.a_l_pow
    gap_c = a_l - tau_c * a_s
    gap_t = a_l - tau_t * a_s
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_small = np.where(gap_c > 0, np.maximum(tau_c / gap_c, tau_t / a_s), np.inf)
        tau_large = np.where(gap_t > 0, tau_t / gap_t, np.inf)
    need = np.where(samples.small, tau_small, tau_large)
    return served & (x > need)


def sinr_coverage_from(samples: Samples, params: SystemParams, thresholds: ThresholdSet | None = None) -> CoverageResult:
    th = thresholds or ThresholdSet.from_params(params)
    m, se = _mean_se(covered(samples, params, th.tau_t, th.tau_c))
    return CoverageResult(m, se, samples.n, metric="sinr_cov")


def rate_coverage_from(samples: Samples, params: SystemParams, thresholds: ThresholdSet | None = None) -> CoverageResult:
    """Rate coverage with the per-BS load drawn per realization.

    NOMA splits the bandwidth over the drawn load ``N_B``; the OMA baseline
    uses the orthogonal share ``W / (2 N_mean)``.
    """
    th = thresholds or ThresholdSet.from_params(params)
    if samples.scheme is Scheme.OMA_RIS:
        share = 2.0 * mean_load(params)
        tau_t = rate_threshold(share * th.rho_t, params.bandwidth_w)
        tau_c = tau_t
    else:
        tau_t = rate_threshold(samples.load * th.rho_t, params.bandwidth_w)
        tau_c = rate_threshold(samples.load * th.rho_c, params.bandwidth_w)
    m, se = _mean_se(covered(samples, params, tau_t, tau_c))
    return CoverageResult(m, se, samples.n, metric="rate_cov")


def assoc_from(samples: Samples) -> CoverageResult:
    m, se = _mean_se(samples.tier == kernels.TIER_LOS)
    return CoverageResult(m, se, samples.n, metric="assoc")


_TAIL_MASS = 2e-3
_MAX_LAPLACE_RADIUS = 20_000.0


def _laplace_radius(cfg: MCConfig, params: SystemParams, t: LaplaceAt) -> float:
    """Disc radius leaving at most ``_TAIL_MASS`` of first-order interference mass outside."""
    base = cfg.radius(params)
    if cfg.region_radius is not None:
        return base
    der = derive(params)
    if t.link is LinkKind.RIS_REFLECTED:
        a = t.s * params.p_b * der.c_r_mean * t.geometry.d_ru ** -params.alpha_r
        expo = params.alpha_r - 2.0
        need = (math.pi * der.lambda_b_active * a / (expo * _TAIL_MASS)) ** (1.0 / expo)
    elif t.link is LinkKind.DIRECT_NLOS:
        a = t.s * params.p_b * params.c_n
        expo = params.alpha_n - 2.0
        need = (2.0 * math.pi * der.lambda_b_active * a / (expo * _TAIL_MASS)) ** (1.0 / expo)
    else:
        need = base
    return float(min(max(base, need), _MAX_LAPLACE_RADIUS))


def _laplace_mc(cfg: MCConfig, params: SystemParams, t: LaplaceAt) -> CoverageResult:
    if t.s == 0:
        return CoverageResult(1.0, 0.0, cfg.n_realizations, metric="laplace")
    der = derive(params)
    radius = _laplace_radius(cfg, params, t)
    p_act = der.lambda_b_active / params.lambda_b
    vals = []
    done, chunk = 0, 0
    while done < cfg.n_realizations:
        k = min(cfg.chunk_size, cfg.n_realizations - done)
        rng = _chunk_rng(cfg.seed, chunk)
        if t.link is LinkKind.RIS_REFLECTED:
            g = t.geometry
            # RIS at the origin; other BSs lie outside the disc of radius d_br
            # and only the reflecting half-plane contributes
            area = 0.5 * math.pi * (radius**2 - g.d_br**2)
            counts = rng.poisson(params.lambda_b * area, size=k)
            tot = int(counts.sum())
            rr = np.sqrt(g.d_br**2 + (radius**2 - g.d_br**2) * rng.random(tot))
            act = rng.random(tot) < p_act
            h = sample_nakagami_power(params.m_r, rng, tot)
            gain = der.c_r_mean * (rr * g.d_ru) ** -params.alpha_r
            contrib = np.where(act, params.p_b * gain * h, 0.0)
        else:
            counts = rng.poisson(params.lambda_b * math.pi * radius**2, size=k)
            tot = int(counts.sum())
            rr = radius * np.sqrt(rng.random(tot))
            los = rng.random(tot) < np.exp(-params.beta_blockage * rr)
            act = rng.random(tot) < p_act
            if t.link is LinkKind.DIRECT_LOS:
                h = sample_nakagami_power(params.m_l, rng, tot)
                keep = los & act & (rr > t.d_min)
                contrib = np.where(keep, params.p_b * params.c_l * rr ** -params.alpha_l * h, 0.0)
            else:
                h = sample_nakagami_power(params.m_n, rng, tot)
                keep = ~los & act & (rr > t.d_min)
                contrib = np.where(keep, params.p_b * params.c_n * np.maximum(rr, 1e-300) ** -params.alpha_n * h, 0.0)
        seg = np.repeat(np.arange(k), counts)
        intf = np.bincount(seg, weights=contrib, minlength=k)
        vals.append(np.exp(-t.s * intf))
        done += k
        chunk += 1
    m, se = _mean_se(np.concatenate(vals))
    return CoverageResult(m, se, cfg.n_realizations, metric="laplace")


def _conditional_mc(cfg: MCConfig, params: SystemParams, t: ConditionalAt) -> CoverageResult:
    """Coverage with the serving geometry pinned and association enforced.

    LoS link at distance d: no other LoS BS within d.  RIS link at
    (d_br, d_ru): no BS within d_br of the RIS (unless ``exclusion`` is off)
    and no LoS BS within ``phi(d_br d_ru)`` of the UE.  All other BSs form the
    unconditioned PPP.
    """
    from .association import phi

    th = t.thresholds or ThresholdSet.from_params(params)
    der = derive(params)
    radius = cfg.radius(params)
    p_act = der.lambda_b_active / params.lambda_b
    eff = effective_thresholds(th.tau_t, th.tau_c, params.a_s, params.a_l_pow)
    hits = []
    done, chunk = 0, 0
    while done < cfg.n_realizations:
        k = min(cfg.chunk_size, cfg.n_realizations - done)
        rng = _chunk_rng(cfg.seed, chunk)
        counts = rng.poisson(params.lambda_b * math.pi * radius**2, size=k)
        tot = int(counts.sum())
        rr = radius * np.sqrt(rng.random(tot))
        ang = rng.uniform(0.0, 2.0 * math.pi, size=tot)
        los = rng.random(tot) < np.exp(-params.beta_blockage * rr)
        act = rng.random(tot) < p_act
        m = np.where(los, params.m_l, params.m_n).astype(float)
        h_dir = rng.gamma(m, 1.0 / m)
        h_ris = sample_nakagami_power(params.m_r, rng, tot)
        seg = np.repeat(np.arange(k), counts)
        g_dir = np.where(los, params.c_l * rr ** -params.alpha_l, params.c_n * np.maximum(rr, 1e-300) ** -params.alpha_n)
        if t.link is LinkKind.DIRECT_LOS:
            d0 = float(t.distance)
            keep = act & ~(los & (rr <= d0))
            intf = np.bincount(seg, weights=np.where(keep, g_dir * h_dir, 0.0), minlength=k)
            g_serv = params.c_l * d0 ** -params.alpha_l
            h_serv = sample_nakagami_power(params.m_l, rng, k)
        else:
            g = t.distance
            ris_ang = rng.uniform(0.0, 2.0 * math.pi, size=k)
            srv_ang = rng.uniform(0.0, 2.0 * math.pi, size=k)
            rx, ry = g.d_ru * np.cos(ris_ang), g.d_ru * np.sin(ris_ang)
            bx = rr * np.cos(ang) - rx[seg]
            by = rr * np.sin(ang) - ry[seg]
            dr = np.hypot(bx, by)
            # serving BS direction and the reflecting normal
            ub_x, ub_y = np.cos(srv_ang), np.sin(srv_ang)
            uu_x, uu_y = -rx / g.d_ru, -ry / g.d_ru
            psi = np.arccos(np.clip(ub_x * uu_x + ub_y * uu_y, -1.0, 1.0))
            side = np.where(ub_x * uu_y - ub_y * uu_x >= 0.0, 1.0, -1.0)
            nang = srv_ang + side * params.epsilon0 * psi
            d_phi = float(phi(g.product, params))
            outside = dr > g.d_br
            keep = act & ~(los & (rr <= d_phi))
            if t.exclusion:
                keep &= outside
            direct = np.where(keep, g_dir * h_dir, 0.0)
            front = (bx * np.cos(nang)[seg] + by * np.sin(nang)[seg]) > 0.0
            refl = np.where(keep & outside & front, der.c_r_mean * (dr * g.d_ru) ** -params.alpha_r * h_ris, 0.0)
            intf = np.bincount(seg, weights=direct + refl, minlength=k)
            g_serv = der.c_r_mean * g.product ** -params.alpha_r
            h_serv = sample_nakagami_power(params.m_r, rng, k)
        small = g_serv >= params.c_l * params.d_c ** -params.alpha_l
        tau = eff.tau_star if small else eff.tau_t_large
        x = g_serv * h_serv / (intf + der.sigma2 / params.p_b)
        hits.append(np.zeros(k, dtype=bool) if tau is None else x > tau)
        done += k
        chunk += 1
    m_, se = _mean_se(np.concatenate(hits))
    return CoverageResult(m_, se, cfg.n_realizations, metric="conditional_cov")


def estimate(cfg: MCConfig, params: SystemParams, target) -> CoverageResult:
    """Monte Carlo estimate of ``target`` with its standard error."""
    if cfg.n_realizations < 1:
        raise EmptyEstimateError()
    if isinstance(target, AssocProb):
        return assoc_from(simulate(cfg, params, need_sinr=False))
    if isinstance(target, SinrCoverage):
        return sinr_coverage_from(simulate(cfg, params), params, target.thresholds)
    if isinstance(target, RateCoverage):
        return rate_coverage_from(simulate(cfg, params), params, target.thresholds)
    if isinstance(target, LaplaceAt):
        if target.s < 0:
            raise ValueError("s must be >= 0")
        if target.link is LinkKind.RIS_REFLECTED and target.geometry is None:
            raise ValueError("RIS Laplace target needs a geometry")
        return _laplace_mc(cfg, params, target)
    if isinstance(target, ConditionalAt):
        return _conditional_mc(cfg, params, target)
    raise TypeError(f"unknown target {target!r}")
