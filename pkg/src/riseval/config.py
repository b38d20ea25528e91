"""Model parameters: defaults, file loading, validation and derived constants.

All quantities are held in SI units (metres, watts, hertz, linear SINR).
Conversions from km^-2, dB and dBm happen only when reading a config file.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .channel import mean_ris_intercept

ENV_CONFIG = "RIS_HETNET_CONFIG"

_INT_FIELDS = ("m_l", "m_n", "m_r")
_DENSITY_FIELDS = ("lambda_b", "lambda_r", "lambda_u")
_THRESHOLD_FIELDS = ("tau_t", "tau_c")
_ALIASES = {"a_l": "a_l_pow"}


class ConfigError(ValueError):
    """Malformed config file or a violated parameter invariant."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class SystemParams:
    lambda_b: float = 10e-6
    lambda_r: float = 50e-6
    lambda_u: float = 100e-6
    p_b: float = 1.0
    bandwidth_w: float = 100e6
    alpha_l: float = 2.0
    alpha_n: float = 4.0
    alpha_r: float = 2.8
    c_l: float = 1.0
    c_n: float = 1.0
    m_l: int = 4
    m_n: int = 1
    m_r: int = 4
    ris_half_length_l: float = 1.0
    epsilon0: float = 0.5
    a_s: float = 0.3
    a_l_pow: float = 0.7
    beta_blockage: float = 1.0 / 141.4
    noise_figure_nf: float = 10.0
    d_c: float = 50.0
    tau_t: float = 0.01
    tau_c: float = 0.01
    rho_t: float = 1e6
    rho_c: float = 1e6

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def with_snr_db(self, snr_db: float) -> "SystemParams":
        """Return a copy whose transmit power gives ``P_B / sigma^2 = snr_db``."""
        return self.replace(p_b=noise_power(self) * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class DerivedParams:
    lambda_b_active: float
    sigma2: float
    eta_l: float
    eta_n: float
    eta_r: float
    c_r_mean: float
    p_los_exists: float
    p_nlos_all: float
    c_lr_ratio: float
    lambda_ratio_rb: float
    mean_load: float


def validate(p: SystemParams) -> None:
    for name in ("lambda_b", "lambda_r", "lambda_u", "p_b", "bandwidth_w", "c_l", "c_n",
                 "ris_half_length_l", "beta_blockage", "d_c", "tau_t", "tau_c",
                 "rho_t", "rho_c", "a_s", "a_l_pow"):
        value = getattr(p, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ConfigError(f"{name} must be finite and > 0 (got {value!r})", key=name)
    for name in _INT_FIELDS:
        value = getattr(p, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"{name} must be an integer >= 1 (got {value!r})", key=name)
    if abs(p.a_s + p.a_l_pow - 1.0) > 1e-9:
        raise ConfigError("a_s + a_l = 1 violated", key="a_s")
    if p.a_s > p.a_l_pow:
        raise ConfigError("a_s ≤ a_l violated", key="a_s")
    if not p.alpha_l > 0:
        raise ConfigError("alpha_l > 0 required", key="alpha_l")
    for name in ("alpha_n", "alpha_r"):
        if not getattr(p, name) > 2:
            raise ConfigError(f"{name} > 2 required", key=name)
    if not 0 < p.epsilon0 < 1:
        raise ConfigError("epsilon0 must lie in (0, 1)", key="epsilon0")
    if not math.isfinite(p.noise_figure_nf):
        raise ConfigError("noise_figure_nf must be finite", key="noise_figure_nf")


def noise_power(p: SystemParams) -> float:
    """Thermal noise in watts from ``-170 + 10 log10(W) + N_f`` dBm."""
    dbm = -170.0 + 10.0 * math.log10(p.bandwidth_w) + p.noise_figure_nf
    return 10.0 ** ((dbm - 30.0) / 10.0)


def active_bs_density(lambda_b: float, lambda_u: float) -> float:
    return lambda_b * -math.expm1(-3.5 * math.log1p(lambda_u / (3.5 * lambda_b)))


def alzer_eta(m: int) -> float:
    """``m (m!)^(-1/m)``: rate constant of the Gamma CDF lower bound."""
    return m * math.exp(-math.lgamma(m + 1.0) / m)


def derive(p: SystemParams) -> DerivedParams:
    c_r = mean_ris_intercept(p.ris_half_length_l, p.epsilon0)
    p_nlos = math.exp(-2.0 * math.pi * p.lambda_b / p.beta_blockage**2)
    return DerivedParams(
        lambda_b_active=active_bs_density(p.lambda_b, p.lambda_u),
        sigma2=noise_power(p),
        eta_l=alzer_eta(p.m_l),
        eta_n=alzer_eta(p.m_n),
        eta_r=alzer_eta(p.m_r),
        c_r_mean=c_r,
        p_los_exists=1.0 - p_nlos,
        p_nlos_all=p_nlos,
        c_lr_ratio=(p.c_l / c_r) ** (1.0 / p.alpha_l),
        lambda_ratio_rb=p.lambda_r / p.lambda_b,
        mean_load=1.0 + 1.28 * p.lambda_u / p.lambda_b,
    )


def _convert(key: str, raw: str):
    """Map one ``key = value`` entry onto a (field, SI value) pair."""
    key = _ALIASES.get(key, key)
    if key.endswith("_per_km2") and key[: -len("_per_km2")] in _DENSITY_FIELDS:
        return key[: -len("_per_km2")], float(raw) * 1e-6
    if key.endswith("_db") and key[: -len("_db")] in _THRESHOLD_FIELDS:
        return key[: -len("_db")], 10.0 ** (float(raw) / 10.0)
    if key in _INT_FIELDS:
        value = float(raw)
        if not value.is_integer():
            raise ConfigError(f"{key} must be an integer (got {raw})", key=key)
        return key, int(value)
    return key, float(raw)


def parse_params(text: str, base: SystemParams | None = None) -> SystemParams:
    names = {f.name for f in fields(SystemParams)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            name, value = _convert(key, raw)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: cannot parse value {raw!r} for {key}", key=key) from exc
        if name not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key=key)
        values[name] = value
    base = base or SystemParams()
    return dataclasses.replace(base, **values)


def load_params(path=None) -> SystemParams:
    """Read a flat ``key = value`` file; missing keys keep their defaults.

    With ``path=None`` the ``RIS_HETNET_CONFIG`` environment variable is used
    when set, otherwise the defaults are returned.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG)
        if not path:
            return SystemParams()
    return parse_params(Path(path).read_text())


def dump_params(p: SystemParams) -> str:
    lines = []
    for f in fields(SystemParams):
        value = getattr(p, f.name)
        lines.append(f"{f.name} = {value!r}")
    return "\n".join(lines) + "\n"


def save_params(p: SystemParams, path) -> None:
    Path(path).write_text(dump_params(p))
