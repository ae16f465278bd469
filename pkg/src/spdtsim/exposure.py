"""Inhaled-particle dose for SPDT links and the dose-response relationship.

All rates are per hour and all durations are hours inside this module;
callers convert trace steps to hours before calling in.  The closed forms
integrate the well-mixed concentration model: particles accumulate at a
constant emission rate against removal while the host is present, then
decay exponentially after the host leaves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import (ConfigError, DiseaseParams, EnvConfig,
                     EnvironmentModelError, R_MODE_ADDITIVE, R_MODE_LITERAL)

DIRECT_ONLY = "direct-only"
DIRECT_INDIRECT = "direct+indirect"
INDIRECT_ONLY = "indirect-only"


@dataclass(frozen=True)
class EnvironmentSample:
    """One link's environment: decay b, air exchange g, removal r, volume V."""

    b: float
    g: float
    r: float
    V: float


@dataclass(frozen=True)
class LinkExposure:
    """Direct and indirect inhaled dose for one link, in particles."""

    direct: float
    indirect: float

    @property
    def total(self) -> float:
        return self.direct + self.indirect


def particle_rate(params: DiseaseParams) -> float:
    """Particles emitted per hour: 0.2 * cough frequency * volume * concentration."""
    return 0.2 * params.f * params.v * params.c


def classify_link_case(t_a, t_c, t_d) -> str:
    """Which exposure components a link carries, from its timing alone."""
    if t_c >= t_a:
        return INDIRECT_ONLY
    if t_c + t_d <= t_a:
        return DIRECT_ONLY
    return DIRECT_INDIRECT


def _check_env(r):
    if np.any(np.asarray(r) <= 0):
        raise EnvironmentModelError("particle removal rate r must be positive")


def direct_exposure_hours(t_a, t_c, t_d, r, V, n, q):
    """Particles inhaled while host and neighbor are co-present (vectorized)."""
    _check_env(r)
    t_a, t_c, t_d = (np.asarray(x, dtype=float) for x in (t_a, t_c, t_d))
    k = r / V
    upper = np.minimum(t_c + t_d, t_a)
    span = np.maximum(upper - t_c, 0.0)
    return (q * n / r) * (span + np.exp(-k * t_c) * np.expm1(-k * span) / k)


def indirect_exposure_hours(t_a, t_c, t_d, r, V, n, q):
    """Particles inhaled from the decaying cloud after the host departs."""
    _check_env(r)
    t_a, t_c, t_d = (np.asarray(x, dtype=float) for x in (t_a, t_c, t_d))
    k = r / V
    end = t_c + t_d
    peak = -np.expm1(-k * t_a)           # 1 - e^{-k t_a}, cloud level at departure
    amp = n * q / (r * k)
    both = (t_c < t_a) & (end > t_a)
    only = t_c >= t_a
    out = np.zeros(np.broadcast(t_a, t_c, t_d, r).shape)
    e_both = amp * peak * (-np.expm1(-k * (end - t_a)))
    e_only = amp * peak * np.exp(-k * (t_c - t_a)) * (-np.expm1(-k * t_d))
    out = np.where(both, e_both, out)
    out = np.where(only, e_only, out)
    return out


def exposure_components_hours(t_a, t_c, t_d, r, V, n, q):
    """(direct, indirect) dose pair; total is their exact sum."""
    ed = direct_exposure_hours(t_a, t_c, t_d, r, V, n, q)
    ei = indirect_exposure_hours(t_a, t_c, t_d, r, V, n, q)
    return ed, ei


def link_exposure_hours(t_a, t_c, t_d, r, V, n, q):
    ed, ei = exposure_components_hours(t_a, t_c, t_d, r, V, n, q)
    return ed + ei


def link_exposure(link, env: EnvironmentSample, params: DiseaseParams,
                  step_minutes: float) -> LinkExposure:
    """Dose for a single trace link (timings in steps) under one environment."""
    h = step_minutes / 60.0
    n = particle_rate(params)
    ed, ei = exposure_components_hours(link.t_a * h, link.t_c * h, link.t_d * h,
                                       env.r, env.V, n, params.q)
    return LinkExposure(direct=float(ed), indirect=float(ei))


def infection_probability(total_exposure, sigma):
    """Dose-response: probability 1 - exp(-sigma * dose), in [0, 1)."""
    e = np.asarray(total_exposure, dtype=float)
    if np.any(e < 0):
        raise ValueError("total exposure must be nonnegative")
    out = -np.expm1(-sigma * e)
    return float(out) if out.ndim == 0 else out


def proximity_volume(radius, height) -> float:
    """Mixing volume of the proximity cylinder."""
    return math.pi * radius * radius * height


def removal_rate(b, g, mode):
    """Combined particle removal rate from decay b and air exchange g.

    'paper-literal' multiplies the raw complement values (1-b)(1-g);
    'additive-physical' converts b to per-hour and adds: 60*b + g.
    """
    b = np.asarray(b, dtype=float)
    g = np.asarray(g, dtype=float)
    if mode == R_MODE_LITERAL:
        return (1.0 - b) * (1.0 - g)
    if mode == R_MODE_ADDITIVE:
        return 60.0 * b + g
    raise ConfigError(f"unknown r_mode {mode!r}")


# ---------------------------------------------------------------------------
# environment sampling

def _truncated_exp_mean(k, width):
    # mean of rate-k exponential truncated to [0, width]
    if abs(k) < 1e-12:
        return width / 2.0
    kw = k * width
    if kw > 700.0:
        return 1.0 / k
    if kw < -700.0:
        return width + 1.0 / k
    return 1.0 / k - width / math.expm1(kw)


@lru_cache(maxsize=64)
def solve_truncated_exp_rate(lo, hi, mean) -> float:
    """Rate whose [lo,hi]-truncated exponential has the requested mean."""
    from scipy.optimize import brentq

    width = hi - lo
    target = mean - lo
    if not 0.0 < target < width:
        raise ConfigError(
            f"target mean {mean} infeasible for range ({lo}, {hi})")
    if abs(target - width / 2.0) < 1e-15 * width:
        return 0.0
    kmax = 1e9 / width
    f = lambda k: _truncated_exp_mean(k, width) - target
    if target < width / 2.0:
        return float(brentq(f, 1e-12 / width, kmax, xtol=1e-15, rtol=1e-14))
    return float(brentq(f, -kmax, -1e-12 / width, xtol=1e-15, rtol=1e-14))


def decay_rate_from_u(cfg: EnvConfig, u):
    """Inverse-CDF transform of uniforms into decay-rate samples b."""
    lo, hi = cfg.b_range
    k = solve_truncated_exp_rate(lo, hi, cfg.b_mean)
    u = np.asarray(u, dtype=float)
    if k == 0.0:
        return lo + u * (hi - lo)
    return lo - np.log1p(u * np.expm1(-k * (hi - lo))) / k


def exchange_rate_from_u(cfg: EnvConfig, u_side, u_val):
    """Median-pinned mixture of uniforms on the two halves of the g range."""
    lo, hi = cfg.g_range
    med = cfg.g_median
    u_side = np.asarray(u_side, dtype=float)
    u_val = np.asarray(u_val, dtype=float)
    low = lo + u_val * (med - lo)
    high = med + u_val * (hi - med)
    return np.where(u_side < 0.5, low, high)


def sample_environment(cfg: EnvConfig, rng, size=None):
    """Draw (b, g, r, V); b matches the target mean, g the target median."""
    n = 1 if size is None else size
    b = decay_rate_from_u(cfg, rng.random(n))
    g = exchange_rate_from_u(cfg, rng.random(n), rng.random(n))
    r = removal_rate(b, g, cfg.r_mode)
    V = proximity_volume(cfg.proximity_radius, cfg.ceiling_height)
    if size is None:
        return EnvironmentSample(b=float(b[0]), g=float(g[0]),
                                 r=float(r[0]), V=V)
    return b, g, r, V
