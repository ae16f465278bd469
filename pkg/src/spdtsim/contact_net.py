"""Synthetic SPDT contact-trace generation and the SPST projection.

Nodes alternate geometric active/inactive periods (activity-driven model);
each active period emits a geometric number of directed host->neighbor
links whose arrival delay follows a truncated geometric law over the active
window plus an indirect window, and whose neighbor stay is geometric.
Neighbor choice balances memory of previous contacts against discovery of
new, propensity-weighted nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .config import ConfigError, GeneratorConfig, TraceFormatError, \
    generator_config_from_dict, generator_config_to_dict
from .seeding import derive_seed

TRACE_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# elementary samplers

def sample_active_duration(lam, rng, size=None):
    """Active-period length in steps, geometric on {1,2,...} with success lam."""
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"lambda must be in (0,1), got {lam}")
    return rng.geometric(lam, size=size)


def sample_inactive_duration(rho, rng, size=None):
    """Inactive-period length in steps, geometric on {1,2,...} with success rho."""
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rho must be in (0,1), got {rho}")
    return rng.geometric(rho, size=size)


def truncated_power_cdf(x, exponent, bounds):
    """CDF of the power-law density ~ x**(-exponent) truncated to bounds."""
    lo, hi = bounds
    x = np.clip(np.asarray(x, dtype=float), lo, hi)
    if exponent == 1.0:
        return np.log(x / lo) / np.log(hi / lo)
    e = 1.0 - exponent
    return (x ** e - lo ** e) / (hi ** e - lo ** e)


def sample_heterogeneity(exponent, bounds, rng, size=None):
    """Inverse-CDF draw from the truncated power law ~ x**(-exponent) on bounds."""
    lo, hi = bounds
    if not (0.0 < lo < hi < 1.0):
        raise ConfigError(f"bounds must be strictly ordered inside (0,1), got {bounds}")
    u = rng.random(size)
    if exponent == 1.0:
        return lo * (hi / lo) ** u
    e = 1.0 - exponent
    return (lo ** e + u * (hi ** e - lo ** e)) ** (1.0 / e)


def sample_degree(mu, rng, size=None):
    """Links per active period: Pr(d) = (1-mu) mu**(d-1) on {1,2,...}."""
    if not 0.0 <= mu < 1.0:
        raise ConfigError(f"mu must be in [0,1), got {mu}")
    if mu == 0.0:
        return 1 if size is None else np.ones(size, dtype=np.int64)
    return rng.geometric(1.0 - mu, size=size)


def link_delay_pmf(p_c, window):
    """PMF of the arrival delay on {0,...,window-1}."""
    if not 0.0 < p_c < 1.0:
        raise ConfigError(f"p_c must be in (0,1), got {p_c}")
    if window < 1:
        raise ValueError(f"delay window must be >= 1 step, got {window}")
    t = np.arange(window)
    pmf = p_c * (1.0 - p_c) ** t
    return pmf / (1.0 - (1.0 - p_c) ** window)


def sample_link_delay(p_c, window, rng, size=None):
    """Arrival delay t_c on {0,...,window-1}, truncated geometric."""
    if not 0.0 < p_c < 1.0:
        raise ConfigError(f"p_c must be in (0,1), got {p_c}")
    if window < 1:
        raise ValueError(f"delay window must be >= 1 step, got {window}")
    u = rng.random(size)
    z = 1.0 - (1.0 - p_c) ** window
    t = np.ceil(np.log1p(-u * z) / np.log1p(-p_c)) - 1.0
    t = np.clip(t, 0, window - 1)
    return int(t) if size is None else t.astype(np.int64)


def sample_link_duration(p_b, rng, size=None):
    """Neighbor stay t_d in steps, geometric on {1,2,...} with success p_b."""
    if not 0.0 < p_b < 1.0:
        raise ConfigError(f"p_b must be in (0,1), got {p_b}")
    return rng.geometric(p_b, size=size)


# ---------------------------------------------------------------------------
# neighbor selection

@dataclass
class NodeProfile:
    """Per-node generator state: heterogeneity values and contact memory."""

    node_id: int
    rho: float
    mu: float
    contact_list: list = field(default_factory=list)
    contact_set: set = field(default_factory=set)
    inbound_list: list = field(default_factory=list)
    inbound_set: set = field(default_factory=set)

    @property
    def n_contacts(self) -> int:
        return len(self.contact_list)


class Population:
    """All node profiles plus the propensity-weighted selection table."""

    def __init__(self, profiles: list[NodeProfile]):
        if len(profiles) < 2:
            raise ConfigError("population needs at least 2 nodes")
        self.profiles = profiles
        self.mu = np.array([p.mu for p in profiles], dtype=float)
        self.mean_mu = float(self.mu.mean())
        self._cdf = np.cumsum(self.mu)
        self._cdf /= self._cdf[-1]

    def __len__(self):
        return len(self.profiles)

    def weighted_pick(self, rng) -> int:
        return int(np.searchsorted(self._cdf, rng.random(), side="right"))


_REJECT_LIMIT = 64


def _pick_new_neighbor(host: NodeProfile, pop: Population, phi: float, rng) -> int | None:
    if phi > 0.0 and host.inbound_list and rng.random() < phi:
        pool = [j for j in host.inbound_list
                if j not in host.contact_set and j != host.node_id]
        if pool:
            return pool[rng.integers(len(pool))]
    for _ in range(_REJECT_LIMIT):
        j = pop.weighted_pick(rng)
        if j != host.node_id and j not in host.contact_set:
            return j
    # dense contact set: enumerate the remaining candidates explicitly
    eligible = [j for j in range(len(pop))
                if j != host.node_id and j not in host.contact_set]
    if not eligible:
        return None
    w = pop.mu[eligible]
    cdf = np.cumsum(w)
    return eligible[int(np.searchsorted(cdf / cdf[-1], rng.random(), side="right"))]


def select_neighbor(host: NodeProfile, pop: Population, theta: float,
                    phi: float, rng) -> int:
    """Pick a link target for the host and update contact memory.

    A new (never-contacted) neighbor is tried with probability
    mu*theta/(n_t + mu*theta); otherwise a uniformly chosen previous contact
    is revisited.  Either branch falls through to the other when its pool is
    empty, so the call always returns a valid node.
    """
    n_t = host.n_contacts
    p_new = host.mu * theta / (n_t + host.mu * theta) if n_t else 1.0
    if rng.random() < p_new or n_t == 0:
        j = _pick_new_neighbor(host, pop, phi, rng)
        if j is None:  # already contacted everyone
            return host.contact_list[rng.integers(n_t)]
        host.contact_list.append(j)
        host.contact_set.add(j)
        other = pop.profiles[j]
        if host.node_id not in other.inbound_set:
            other.inbound_set.add(host.node_id)
            other.inbound_list.append(host.node_id)
        return j
    return host.contact_list[rng.integers(n_t)]


# ---------------------------------------------------------------------------
# trace container

@dataclass(frozen=True)
class SPDTLink:
    """One directed host->neighbor co-location event, timings in steps."""

    host: int
    neighbor: int
    start_step: int
    t_a: int
    t_c: int
    t_d: int
    delta: int

    def __post_init__(self):
        if self.host == self.neighbor:
            raise ValueError("self-links are not allowed")
        if self.t_a < 1 or self.t_d < 1:
            raise ValueError("t_a and t_d must be >= 1 step")
        if not 0 <= self.t_c <= self.t_a + self.delta:
            raise ValueError("t_c must lie in [0, t_a + delta]")


@dataclass
class ContactTrace:
    """Immutable, arrival-ordered collection of SPDT links."""

    config: GeneratorConfig
    host: np.ndarray
    neighbor: np.ndarray
    start_step: np.ndarray
    t_a: np.ndarray
    t_c: np.ndarray
    t_d: np.ndarray
    delta: np.ndarray
    kind: str = "spdt"
    # Index of each link in the trace it was projected from (identity for a
    # generated trace); lets paired runs share per-link environment draws.
    source_index: np.ndarray | None = None

    def __post_init__(self):
        if self.source_index is None:
            self.source_index = np.arange(self.n_links, dtype=np.int64)

    @property
    def n_links(self) -> int:
        return int(self.host.shape[0])

    @property
    def arrival(self) -> np.ndarray:
        return self.start_step + self.t_c

    @property
    def steps_per_day(self) -> int:
        return self.config.steps_per_day

    @property
    def n_days(self) -> int:
        return -(-self.config.T // self.steps_per_day)

    @property
    def link_day(self) -> np.ndarray:
        return self.arrival // self.steps_per_day

    def day_slice(self, day: int) -> slice:
        spd = self.steps_per_day
        arr = self.arrival
        lo = int(np.searchsorted(arr, day * spd, side="left"))
        hi = int(np.searchsorted(arr, (day + 1) * spd, side="left"))
        return slice(lo, hi)


def _sorted_link_order(host, neighbor, arrival):
    return np.lexsort((neighbor, host, arrival))


def trace_from_links(config: GeneratorConfig, links: list[SPDTLink],
                     kind: str = "spdt") -> ContactTrace:
    """Build a trace from explicit links (sorted canonically); test/tool aid."""
    host = np.array([l.host for l in links], dtype=np.int64)
    neighbor = np.array([l.neighbor for l in links], dtype=np.int64)
    start = np.array([l.start_step for l in links], dtype=np.int64)
    t_a = np.array([l.t_a for l in links], dtype=np.int64)
    t_c = np.array([l.t_c for l in links], dtype=np.int64)
    t_d = np.array([l.t_d for l in links], dtype=np.int64)
    delta = np.array([l.delta for l in links], dtype=np.int64)
    idx = _sorted_link_order(host, neighbor, start + t_c)
    return ContactTrace(config=config, host=host[idx], neighbor=neighbor[idx],
                        start_step=start[idx], t_a=t_a[idx], t_c=t_c[idx],
                        t_d=t_d[idx], delta=delta[idx], kind=kind)


# ---------------------------------------------------------------------------
# generation

def _node_activation_schedule(rng, rho_i, lam, T):
    """Starts and (clipped) lengths of one node's active periods in [0, T)."""
    mean_cycle = 1.0 / lam + 1.0 / rho_i
    starts, lens = [], []
    t = 0
    need = max(4, int(T / mean_cycle) + 4)
    while t < T:
        w = rng.geometric(rho_i, size=need)
        a = rng.geometric(lam, size=need)
        for k in range(need):
            t += int(w[k])
            if t >= T:
                break
            starts.append(t)
            lens.append(min(int(a[k]), T - t))
            t += int(a[k])
            if t >= T:
                break
        else:
            need = max(4, need // 2)
            continue
        break
    return starts, lens


def generate_trace(config: GeneratorConfig) -> ContactTrace:
    """Generate a full SPDT trace; deterministic in config.master_seed."""
    cfg = config
    rng = np.random.default_rng(derive_seed(cfg.master_seed, "trace"))
    M, T, delta = cfg.M, cfg.T, cfg.delta

    rho = sample_heterogeneity(cfg.alpha, cfg.rho_bounds, rng, size=M)
    mu = sample_heterogeneity(cfg.beta, cfg.mu_bounds, rng, size=M)
    profiles = [NodeProfile(i, float(rho[i]), float(mu[i])) for i in range(M)]
    pop = Population(profiles)

    sched_node, sched_start, sched_len = [], [], []
    for i in range(M):
        starts, lens = _node_activation_schedule(rng, rho[i], cfg.lam, T)
        sched_node.extend([i] * len(starts))
        sched_start.extend(starts)
        sched_len.extend(lens)
    sched_node = np.array(sched_node, dtype=np.int64)
    sched_start = np.array(sched_start, dtype=np.int64)
    sched_len = np.array(sched_len, dtype=np.int64)
    order = np.lexsort((sched_node, sched_start))

    L_host, L_nb, L_start, L_ta, L_tc, L_td = [], [], [], [], [], []
    log1mp = np.log1p(-cfg.p_c)
    for k in order:
        i = int(sched_node[k])
        t0 = int(sched_start[k])
        ta = int(sched_len[k])
        prof = profiles[i]
        d = sample_degree(prof.mu, rng)
        window = ta + delta
        z = 1.0 - (1.0 - cfg.p_c) ** window
        for _ in range(int(d)):
            j = select_neighbor(prof, pop, cfg.theta, cfg.phi, rng)
            tc = int(np.ceil(np.log1p(-rng.random() * z) / log1mp) - 1.0)
            tc = min(max(tc, 0), window - 1)
            if t0 + tc >= T:
                continue  # neighbor would arrive past the horizon
            td = int(rng.geometric(cfg.p_b))
            td = min(td, T - (t0 + tc))
            L_host.append(i)
            L_nb.append(j)
            L_start.append(t0)
            L_ta.append(ta)
            L_tc.append(tc)
            L_td.append(td)

    host = np.array(L_host, dtype=np.int64)
    neighbor = np.array(L_nb, dtype=np.int64)
    start = np.array(L_start, dtype=np.int64)
    t_a = np.array(L_ta, dtype=np.int64)
    t_c = np.array(L_tc, dtype=np.int64)
    t_d = np.array(L_td, dtype=np.int64)
    idx = _sorted_link_order(host, neighbor, start + t_c)
    return ContactTrace(
        config=cfg, host=host[idx], neighbor=neighbor[idx],
        start_step=start[idx], t_a=t_a[idx], t_c=t_c[idx], t_d=t_d[idx],
        delta=np.full(idx.shape[0], delta, dtype=np.int64), kind="spdt")


# ---------------------------------------------------------------------------
# SPST projection

def project_spst(trace: ContactTrace) -> ContactTrace:
    """Keep only co-present portions of links: the direct-links-only network."""
    keep = trace.t_c < trace.t_a
    td = np.minimum(trace.t_c + trace.t_d, trace.t_a) - trace.t_c
    return ContactTrace(
        config=trace.config,
        host=trace.host[keep].copy(), neighbor=trace.neighbor[keep].copy(),
        start_step=trace.start_step[keep].copy(), t_a=trace.t_a[keep].copy(),
        t_c=trace.t_c[keep].copy(), t_d=td[keep],
        delta=np.zeros(int(keep.sum()), dtype=np.int64), kind="spst",
        source_index=trace.source_index[keep].copy())


# ---------------------------------------------------------------------------
# file format

def write_trace(trace: ContactTrace, path) -> None:
    cfg_items = " ".join(f"{k}={v}" for k, v in
                         generator_config_to_dict(trace.config).items())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# spdt-trace v{TRACE_FORMAT_VERSION} kind={trace.kind}\n")
        fh.write(f"# config: {cfg_items}\n")
        frame = pd.DataFrame({
            "host": trace.host, "neighbor": trace.neighbor,
            "start": trace.start_step, "t_a": trace.t_a,
            "t_c": trace.t_c, "t_d": trace.t_d, "delta": trace.delta,
        })
        frame.to_csv(fh, sep=" ", header=False, index=False, lineterminator="\n")


def _scan_for_bad_line(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if raw.startswith("#"):
                continue
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 7 or not all(p.lstrip("-").isdigit() for p in parts):
                raise TraceFormatError(f"{path}: malformed trace line {lineno}: {raw.rstrip()!r}")
    raise TraceFormatError(f"{path}: unreadable trace data")


def read_trace(path) -> ContactTrace:
    with open(path, "r", encoding="utf-8") as fh:
        head1 = fh.readline()
        head2 = fh.readline()
    if not head1.startswith("# spdt-trace v"):
        raise TraceFormatError(f"{path}: missing trace header")
    try:
        version = int(head1.split("v")[1].split()[0])
        kind = head1.split("kind=")[1].strip()
    except (IndexError, ValueError):
        raise TraceFormatError(f"{path}: unparseable trace header: {head1.rstrip()!r}") from None
    if version != TRACE_FORMAT_VERSION:
        raise TraceFormatError(f"{path}: unsupported trace version {version}")
    if not head2.startswith("# config:"):
        raise TraceFormatError(f"{path}: missing config header line")
    kv = {}
    for tok in head2[len("# config:"):].split():
        if "=" not in tok:
            raise TraceFormatError(f"{path}: malformed config token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    cfg = generator_config_from_dict(kv)

    try:
        frame = pd.read_csv(path, sep=r"\s+", comment="#", header=None,
                            dtype=np.int64,
                            names=["host", "neighbor", "start", "t_a",
                                   "t_c", "t_d", "delta"])
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame({k: np.empty(0, dtype=np.int64) for k in
                              ["host", "neighbor", "start", "t_a", "t_c",
                               "t_d", "delta"]})
    except (ValueError, pd.errors.ParserError):
        _scan_for_bad_line(path)
    if frame.isnull().values.any():
        _scan_for_bad_line(path)
    return ContactTrace(
        config=cfg, host=frame["host"].to_numpy(),
        neighbor=frame["neighbor"].to_numpy(),
        start_step=frame["start"].to_numpy(), t_a=frame["t_a"].to_numpy(),
        t_c=frame["t_c"].to_numpy(), t_d=frame["t_d"].to_numpy(),
        delta=frame["delta"].to_numpy(), kind=kind)


# ---------------------------------------------------------------------------
# validation

def validate_trace(trace: ContactTrace) -> list[str]:
    """Structural invariant checks; returns one message per violated rule."""
    problems = []
    T = trace.config.T
    M = trace.config.M

    def check(mask, rule):
        bad = np.nonzero(~np.asarray(mask))[0] if np.ndim(mask) else ([] if mask else [0])
        if len(bad):
            problems.append(f"{rule}: {len(bad)} links, first at link index {bad[0]}")

    if trace.n_links == 0:
        return problems
    check(trace.host != trace.neighbor, "host != neighbor")
    check((trace.host >= 0) & (trace.host < M), "host id in [0, M)")
    check((trace.neighbor >= 0) & (trace.neighbor < M), "neighbor id in [0, M)")
    check(trace.t_a >= 1, "t_a >= 1")
    check(trace.t_d >= 1, "t_d >= 1")
    check(trace.t_c >= 0, "t_c >= 0")
    check(trace.delta >= 0, "delta >= 0")
    check(trace.t_c <= trace.t_a + trace.delta, "t_c <= t_a + delta")
    check(trace.start_step >= 0, "start_step >= 0")
    check(trace.start_step + trace.t_a <= T, "active window ends by T")
    check(trace.arrival + trace.t_d <= T, "neighbor stay ends by T")
    arr = trace.arrival
    ordered = bool(np.all(np.diff(arr) >= 0))
    if not ordered:
        problems.append("links not sorted by arrival step")
    return problems


def _randomized_pit(x, cdf_at, rng):
    """Randomized PIT for discrete samples: uniform iff x follows the law."""
    hi = cdf_at(x)
    lo = cdf_at(x - 1)
    return lo + rng.random(len(x)) * (hi - lo)


def trace_distribution_report(trace: ContactTrace, alpha=0.001, seed=0):
    """KS goodness-of-fit of the realized trace against the generator laws.

    Samples whose value may have been clipped by the horizon are excluded.
    Returns {statistic_name: (p_value, n_samples, passed)}.
    """
    from scipy import stats

    cfg = trace.config
    rng = np.random.default_rng(derive_seed(seed, "trace-gof"))
    out = {}
    if trace.n_links == 0:
        return out
    # safety margin past which geometric draws essentially never reach
    tail = lambda p: int(np.ceil(np.log(1e-12) / np.log1p(-p))) + 1

    period_key = trace.host * (cfg.T + 1) + trace.start_step
    _, first_idx = np.unique(period_key, return_index=True)

    # active durations, one sample per active period
    ta = trace.t_a[first_idx]
    t0 = trace.start_step[first_idx]
    ok = t0 + tail(cfg.lam) <= cfg.T
    if ok.sum() >= 100:
        u = _randomized_pit(ta[ok].astype(float),
                            lambda k: np.where(k < 1, 0.0, -np.expm1(np.log1p(-cfg.lam) * k)),
                            rng)
        out["active_duration"] = stats.kstest(u, "uniform").pvalue

    # arrival delays, conditional on each link's window
    window = trace.t_a + trace.delta
    ok = trace.start_step + window <= cfg.T
    if ok.sum() >= 100:
        w = window[ok].astype(float)
        z = -np.expm1(np.log1p(-cfg.p_c) * w)

        def cdf_tc(k):
            k = np.asarray(k, dtype=float)
            val = -np.expm1(np.log1p(-cfg.p_c) * (k + 1)) / z
            return np.where(k < 0, 0.0, np.minimum(val, 1.0))

        u = _randomized_pit(trace.t_c[ok].astype(float), cdf_tc, rng)
        out["link_delay"] = stats.kstest(u, "uniform").pvalue

    # neighbor stay durations
    ok = trace.arrival + tail(cfg.p_b) <= cfg.T
    if ok.sum() >= 100:
        u = _randomized_pit(trace.t_d[ok].astype(float),
                            lambda k: np.where(k < 1, 0.0, -np.expm1(np.log1p(-cfg.p_b) * k)),
                            rng)
        out["link_duration"] = stats.kstest(u, "uniform").pvalue

    return {name: (float(p), bool(p > alpha)) for name, p in out.items()}
