"""Deterministic adaptive Gauss-Kronrod (G10/K21) integration.

Integrands are called with a 1-D numpy array of abscissae and must return an
array of the same length (or shape ``(n, k)`` for k simultaneous components;
error control then follows component 0).  The rule never evaluates interval
end points, so integrable end-point singularities are fine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208626368127, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# 21 nodes on [-1, 1] and matching weights; Gauss weights sit on the odd
# Kronrod nodes.
NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
K_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
G_WEIGHTS = np.zeros(21)
G_WEIGHTS[[1, 3, 5, 7, 9]] = _WG
G_WEIGHTS[[19, 17, 15, 13, 11]] = _WG

_EPMACH = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny


class QuadratureError(RuntimeError):
    """Raised when the integrand returns a non-finite value."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    infinity_map: str = "rational"
    scale: float = 1.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.infinity_map not in ("rational", "exponential"):
            raise ValueError(f"unknown infinity_map {self.infinity_map!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def replace(self, **changes) -> "QuadratureSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class QuadratureOutcome:
    value: float
    est_error: float
    subdivisions_used: int
    converged: bool
    components: np.ndarray | None = None


def _rule(f, a, b):
    """Apply the 21-point pair to intervals ``[a_i, b_i]``."""
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float)
    ncomp = fx.size // x.size
    fx = fx.reshape(x.shape[0], 21, ncomp)
    if not np.all(np.isfinite(fx)):
        bad = np.argwhere(~np.isfinite(fx))[0]
        where = float(x[bad[0], bad[1]])
        raise QuadratureError(f"non-finite integrand value at x={where!r}", abscissa=where)
    resk = np.einsum("ijk,j->ik", fx, K_WEIGHTS) * half[:, None]
    resg = np.einsum("ijk,j->ik", fx, G_WEIGHTS) * half[:, None]
    f0 = fx[:, :, 0]
    mean = (resk[:, 0] / np.where(half == 0, 1.0, half)) * 0.5
    resabs = (np.abs(f0) @ K_WEIGHTS) * np.abs(half)
    resasc = (np.abs(f0 - mean[:, None]) @ K_WEIGHTS) * np.abs(half)
    err = np.abs(resk[:, 0] - resg[:, 0])
    scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), err)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    floor = 50.0 * _EPMACH * resabs
    err = np.where(resabs > _UFLOW / (50.0 * _EPMACH), np.maximum(err, floor), err)
    return resk, err


def _adaptive(f, a, b, spec: QuadratureSpec, breakpoints=()):
    edges = np.unique(np.concatenate([[a], [p for p in breakpoints if a < p < b], [b]]))
    lo, hi = edges[:-1].astype(float), edges[1:].astype(float)
    vals, errs = _rule(f, lo, hi)
    n_sub = len(lo)
    while True:
        total = vals.sum(axis=0)
        tol = max(spec.abs_tol, spec.rel_tol * abs(total[0]))
        toterr = errs.sum()
        if toterr <= tol:
            return total, toterr, n_sub, True
        width = hi - lo
        splittable = width > 1e3 * _EPMACH * np.maximum(np.abs(lo), np.abs(hi)) + _UFLOW
        if n_sub >= spec.max_subdivisions or not splittable.any():
            return total, toterr, n_sub, False
        order = np.argsort(-np.where(splittable, errs, -1.0))
        cum = np.cumsum(errs[order])
        # split the worst intervals until what is left is under half the budget
        n_split = int(np.searchsorted(-(toterr - cum), -0.5 * tol) + 1)
        n_split = max(1, min(n_split, int(splittable.sum()), spec.max_subdivisions - n_sub, 256))
        pick = order[:n_split]
        mid = 0.5 * (lo[pick] + hi[pick])
        new_lo = np.concatenate([lo[pick], mid])
        new_hi = np.concatenate([mid, hi[pick]])
        nv, ne = _rule(f, new_lo, new_hi)
        keep = np.ones(len(lo), dtype=bool)
        keep[pick] = False
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        n_sub += n_split


def _finish(total, err, n_sub, ok) -> QuadratureOutcome:
    comps = None if total.size == 1 else total.copy()
    return QuadratureOutcome(float(total[0]), float(err), int(n_sub), bool(ok), comps)


def integrate_finite(f, a: float, b: float, spec: QuadratureSpec = QuadratureSpec(),
                     breakpoints=()) -> QuadratureOutcome:
    """Integrate ``f`` over the finite interval ``[a, b]``."""
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a > b:
        raise ValueError("integrate_finite requires finite a <= b")
    if a == b:
        return QuadratureOutcome(0.0, 0.0, 0, True)
    return _finish(*_adaptive(f, a, b, spec, breakpoints))


def _map_to_unit(f, a, spec):
    s = spec.scale
    if spec.infinity_map == "rational":
        def g(t):
            u = 1.0 - t
            x = a + s * t / u
            return _times(f(x), s / (u * u))
    else:
        def g(t):
            u = 1.0 - t
            x = a - s * np.log(u)
            return _times(f(x), s / u)
    return g


def _times(fx, w):
    fx = np.asarray(fx, dtype=float)
    return fx * (w if fx.ndim == 1 else w[:, None])


def _unit_breakpoints(a, points, spec):
    s = spec.scale
    out = []
    for p in points:
        if p <= a:
            continue
        y = (p - a) / s
        out.append(y / (1.0 + y) if spec.infinity_map == "rational" else -math.expm1(-y))
    return out


def integrate_semi_infinite(f, a: float, spec: QuadratureSpec = QuadratureSpec(),
                            breakpoints=()) -> QuadratureOutcome:
    """Integrate ``f`` over ``[a, inf)`` after mapping it onto [0, 1).

    ``spec.scale`` sets the length unit of the map: half the unit interval
    covers ``[a, a + scale]`` under the rational map.
    """
    a = float(a)
    g = _map_to_unit(f, a, spec)
    return _finish(*_adaptive(g, 0.0, 1.0, spec, _unit_breakpoints(a, breakpoints, spec)))


def integrate(f, a: float, b: float, spec: QuadratureSpec = QuadratureSpec(),
              breakpoints=()) -> QuadratureOutcome:
    """Dispatch on whether the upper limit is infinite."""
    if math.isinf(b):
        return integrate_semi_infinite(f, a, spec, breakpoints)
    return integrate_finite(f, a, b, spec, breakpoints)


def integrate_2d_semi_infinite(f, spec: QuadratureSpec = QuadratureSpec(), *,
                               inner_lower=None, inner_upper=None,
                               outer_lower: float = 0.0, outer_upper: float = math.inf,
                               inner_spec: QuadratureSpec | None = None) -> QuadratureOutcome:
    """Nested integral ``int dx1 int_{lo(x1)}^{hi(x1)} f(x1, x2) dx2``.

    ``inner_lower`` / ``inner_upper`` are callables of the outer variable (or
    None for 0 and infinity).  ``f(x1, x2)`` receives a scalar ``x1`` and an
    array ``x2``.  The inner tolerance is ten times tighter than the outer
    one, and the outer integral of the inner error estimates is added to the
    reported error.
    """
    if inner_spec is None:
        inner_spec = spec.replace(rel_tol=spec.rel_tol * 0.1, abs_tol=spec.abs_tol * 0.1)
    worst_inner = [True]

    def outer(x1s):
        out = np.empty((len(x1s), 2))
        for i, x1 in enumerate(x1s):
            lo = 0.0 if inner_lower is None else float(inner_lower(x1))
            hi = math.inf if inner_upper is None else float(inner_upper(x1))
            if hi <= lo:
                out[i] = 0.0, 0.0
                continue
            res = integrate(lambda x2: f(x1, x2), lo, hi, inner_spec)
            worst_inner[0] &= res.converged
            out[i] = res.value, res.est_error
        return out

    res = integrate(outer, outer_lower, outer_upper, spec)
    inner_err = float(abs(res.components[1])) if res.components is not None else 0.0
    return QuadratureOutcome(res.value, res.est_error + inner_err, res.subdivisions_used,
                             res.converged and worst_inner[0])
