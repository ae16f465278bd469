"""SEIR propagation over a contact trace with end-of-day state updates.

Each day, links arriving that day from infectious hosts to susceptible
neighbors are collected, the host's emission interval is clipped to its
infectious window, per-neighbor doses are summed, and one infection draw
per exposed neighbor is made.  All randomness is counter-based (keyed by
the run seed plus day/node/link indices), so results are independent of
evaluation order and identical across worker counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, EpidemicConfig, config_hash
from .contact_net import ContactTrace
from .exposure import (decay_rate_from_u, exchange_rate_from_u,
                       infection_probability, link_exposure_hours,
                       particle_rate, proximity_volume, removal_rate)
from .seeding import hashed_randint, hashed_u01, stream_key

S, E, I, R = 0, 1, 2, 3
_NEVER = np.iinfo(np.int32).max


@dataclass(frozen=True)
class DailyMetrics:
    day: int
    new_infections: int
    prevalence: int
    cumulative: int


@dataclass
class EpidemicRun:
    """Daily metric series plus final node states for one epidemic run."""

    metrics: list[DailyMetrics]
    final_states: np.ndarray
    n_seeds: int
    seed: int
    config_digest: str
    violations: int = 0

    @property
    def new_by_day(self) -> np.ndarray:
        return np.array([m.new_infections for m in self.metrics], dtype=np.int64)

    @property
    def prevalence_by_day(self) -> np.ndarray:
        return np.array([m.prevalence for m in self.metrics], dtype=np.int64)

    @property
    def cumulative_by_day(self) -> np.ndarray:
        return np.array([m.cumulative for m in self.metrics], dtype=np.int64)

    @property
    def total_new_infections(self) -> int:
        return self.metrics[-1].cumulative if self.metrics else 0

    @property
    def outbreak_size(self) -> int:
        """Cumulative infections including the seed nodes."""
        return self.total_new_infections + self.n_seeds

    @property
    def peak_prevalence(self) -> int:
        return int(self.prevalence_by_day.max()) if self.metrics else 0


def seed_infectious_duration(rng, dur_range) -> int:
    """Uniform integer duration (days) from the inclusive range."""
    lo, hi = dur_range
    if not 1 <= lo <= hi:
        raise ConfigError(f"invalid infectious duration range {dur_range}")
    return int(rng.integers(lo, hi + 1))


def run_epidemic(trace: ContactTrace, cfg: EpidemicConfig,
                 check_invariants: bool = True) -> EpidemicRun:
    """Run one epidemic; deterministic given (trace, cfg)."""
    gcfg = trace.config
    M = gcfg.M
    spd = gcfg.steps_per_day
    step_h = gcfg.step_minutes / 60.0

    state = np.zeros(M, dtype=np.int8)
    day_inf = np.full(M, _NEVER, dtype=np.int64)   # day the node turns infectious
    day_rec = np.full(M, _NEVER, dtype=np.int64)   # day it recovers

    for node, dur in cfg.seeds:
        if not 0 <= node < M:
            raise ConfigError(f"seed node {node} not in trace (M={M})")
        state[node] = I
        day_inf[node] = 0
        day_rec[node] = dur

    k_env_b = stream_key(cfg.seed, "env-b")
    k_env_gs = stream_key(cfg.seed, "env-g-side")
    k_env_gv = stream_key(cfg.seed, "env-g-val")
    k_latent = stream_key(cfg.seed, "latent")
    k_course = stream_key(cfg.seed, "course")

    n_rate = particle_rate(cfg.disease)
    V = proximity_volume(cfg.env.proximity_radius, cfg.env.ceiling_height)
    q = cfg.disease.q
    sigma = cfg.disease.sigma
    lat_lo, lat_hi = cfg.latent_range
    inf_lo, inf_hi = cfg.infectious_range

    host = trace.host
    neighbor = trace.neighbor
    start = trace.start_step
    t_a = trace.t_a
    t_c = trace.t_c
    t_d = trace.t_d
    source = trace.source_index

    metrics: list[DailyMetrics] = []
    cumulative = 0
    violations = 0

    for day in range(cfg.horizon_days):
        prev_state = state.copy() if check_invariants else None

        # end-of-previous-day transitions take effect now
        state[(state == I) & (day_rec <= day)] = R
        state[(state == E) & (day_inf <= day)] = I

        if check_invariants:
            diff = state.astype(np.int16) - prev_state
            violations += int(np.count_nonzero((diff < 0) | (diff > 1)))
            counts = np.bincount(state, minlength=4)
            if int(counts.sum()) != M or counts.size > 4:
                violations += 1

        prevalence = int(np.count_nonzero(state == I))

        sl = trace.day_slice(day)
        idx = np.arange(sl.start, sl.stop)
        if idx.size:
            h = host[idx]
            used = (state[h] == I) & (state[neighbor[idx]] == S)
            if check_invariants:
                exposed_hosts = (state[h] == E) & used
                violations += int(np.count_nonzero(exposed_hosts))
            idx = idx[used]
        newly = np.empty(0, dtype=np.int64)
        if idx.size:
            h = host[idx]
            s = start[idx]
            # clip emission to the host's infectious window (in steps)
            e0 = np.maximum(s, day_inf[h] * spd)
            e1 = np.minimum(s + t_a[idx], day_rec[h] * spd)
            arr = s + t_c[idx]
            dep = arr + t_d[idx]
            tc_eff = arr - e0
            td_eff = np.where(tc_eff >= 0, t_d[idx], dep - e0)
            tc_eff = np.maximum(tc_eff, 0)
            ok = (e1 > e0) & (td_eff > 0)
            if np.any(ok):
                idx = idx[ok]
                src = source[idx]
                b = decay_rate_from_u(cfg.env, hashed_u01(k_env_b, src))
                g = exchange_rate_from_u(cfg.env,
                                         hashed_u01(k_env_gs, src),
                                         hashed_u01(k_env_gv, src))
                r = removal_rate(b, g, cfg.env.r_mode)
                dose = link_exposure_hours(
                    (e1 - e0)[ok] * step_h, tc_eff[ok] * step_h,
                    td_eff[ok] * step_h, r, V, n_rate, q)
                total = np.bincount(neighbor[idx], weights=dose, minlength=M)
                cand = np.nonzero(total > 0.0)[0]
                if cand.size:
                    p = infection_probability(total[cand], sigma)
                    u = hashed_u01(stream_key(cfg.seed, "infect", day), cand)
                    newly = cand[u < p]
        if newly.size:
            state[newly] = E
            lat = hashed_randint(k_latent, newly, lat_lo, lat_hi)
            dur = hashed_randint(k_course, newly, inf_lo, inf_hi)
            day_inf[newly] = day + lat
            day_rec[newly] = day_inf[newly] + dur
        cumulative += int(newly.size)
        metrics.append(DailyMetrics(day=day, new_infections=int(newly.size),
                                    prevalence=prevalence,
                                    cumulative=cumulative))

        if not np.any((state == E) | (state == I)):
            for rest in range(day + 1, cfg.horizon_days):
                metrics.append(DailyMetrics(day=rest, new_infections=0,
                                            prevalence=0,
                                            cumulative=cumulative))
            break

    return EpidemicRun(metrics=metrics, final_states=state,
                       n_seeds=len(cfg.seeds), seed=cfg.seed,
                       config_digest=config_hash(cfg), violations=violations)


def write_run_csv(run: EpidemicRun, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# spdt-run config_hash={run.config_digest} seed={run.seed}\n")
        fh.write("day,new_infections,prevalence,cumulative\n")
        for m in run.metrics:
            fh.write(f"{m.day},{m.new_infections},{m.prevalence},{m.cumulative}\n")


def read_run_csv(path):
    """Parse a run CSV back into (header dict, metrics list)."""
    meta = {}
    metrics = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.startswith("# spdt-run"):
            for tok in header.split()[2:]:
                k, _, v = tok.partition("=")
                meta[k] = v
        fh.readline()  # column names
        for line in fh:
            day, new, prev, cum = line.strip().split(",")
            metrics.append(DailyMetrics(int(day), int(new), int(prev), int(cum)))
    return meta, metrics
