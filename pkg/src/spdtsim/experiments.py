"""Hidden-spreader experiments: P-sweep, low-connectivity and single-seed studies.

All studies run paired on the full trace and its direct-links-only (SPST)
projection with shared seed sets and shared randomness streams, which
sharpens the comparison between the two network views.  The experiment
grid is embarrassingly parallel; every cell derives its own seed from the
master seed, so results do not depend on worker count or execution order.
When an output directory is given, each cell persists one raw CSV per run
and existing files are reused, so interrupted experiments resume where
they stopped.
"""
from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from .config import (ConfigError, DiseaseParams, EnvConfig, EpidemicConfig,
                     ScenarioConfig)
from .contact_net import ContactTrace, project_spst
from .seeding import derive_seed, hashed_randint, stream_key
from .seir import read_run_csv, run_epidemic, write_run_csv

HIDDEN = "hidden"
NON_HIDDEN = "non-hidden"
ISOLATED = "isolated"

VARIANTS = ("spdt", "spst")


# ---------------------------------------------------------------------------
# seed classification

def classify_all(trace: ContactTrace, window_days) -> np.ndarray:
    """Class of every node for infectious windows starting at day 0.

    window_days may be a scalar (same window for all nodes) or a per-node
    array of days.  Returns an object array of {hidden, non-hidden, isolated}.
    """
    M = trace.config.M
    windows = np.broadcast_to(np.asarray(window_days, dtype=np.int64), (M,))
    in_window = trace.link_day < windows[trace.host]
    hosts_any = np.zeros(M, dtype=bool)
    hosts_direct = np.zeros(M, dtype=bool)
    hosts_any[trace.host[in_window]] = True
    direct = in_window & (trace.t_c < trace.t_a)
    hosts_direct[trace.host[direct]] = True
    out = np.full(M, ISOLATED, dtype=object)
    out[hosts_any & ~hosts_direct] = HIDDEN
    out[hosts_direct] = NON_HIDDEN
    return out


def classify_seed(trace: ContactTrace, node: int, window_days: int) -> str:
    """Class of one node for an infectious window of window_days from day 0."""
    if not 0 <= node < trace.config.M:
        raise ConfigError(f"node {node} not in trace")
    mask = (trace.host == node) & (trace.link_day < window_days)
    if not np.any(mask):
        return ISOLATED
    if np.any(mask & (trace.t_c < trace.t_a)):
        return NON_HIDDEN
    return HIDDEN


def find_low_connectivity_set(trace: ContactTrace, window_days: int = 5,
                              max_direct_neighbors: int = 2) -> np.ndarray:
    """Nodes with 1..max distinct direct-link neighbors in the first days.

    Connectivity is measured on the SPST projection, so indirect-only links
    do not count toward the neighbor total.
    """
    spst = trace if trace.kind == "spst" else project_spst(trace)
    M = spst.config.M
    mask = spst.link_day < window_days
    key = spst.host[mask].astype(np.int64) * M + spst.neighbor[mask]
    uniq = np.unique(key)
    counts = np.bincount((uniq // M).astype(np.int64), minlength=M)
    sel = (counts >= 1) & (counts <= max_direct_neighbors)
    return np.nonzero(sel)[0]


def seed_duration_table(trace: ContactTrace, master_seed: int,
                        dur_range=(1, 5)) -> np.ndarray:
    """Per-node infectious duration used for classification and seeding."""
    lo, hi = dur_range
    if not 1 <= lo <= hi:
        raise ConfigError(f"invalid seed duration range {dur_range}")
    return hashed_randint(stream_key(master_seed, "seed-duration"),
                          np.arange(trace.config.M), lo, hi)


def build_seed_pools(trace: ContactTrace, durations: np.ndarray):
    """(hidden_ids, non_hidden_ids) under per-node infectious windows."""
    classes = classify_all(trace, durations)
    return (np.nonzero(classes == HIDDEN)[0],
            np.nonzero(classes == NON_HIDDEN)[0])


# ---------------------------------------------------------------------------
# parallel cell execution (fork-based; cells read the shared module context)

_CTX: dict | None = None


def _map_cells(fn, cells, workers):
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with multiprocessing.get_context("fork").Pool(workers) as pool:
        return pool.map(fn, cells, chunksize=1)


def _run_or_load(variant, cfg, ctx, cell_name):
    """Run one epidemic, or reload its raw CSV if it already exists."""
    path = None
    if ctx.get("out_dir"):
        path = os.path.join(ctx["out_dir"], "raw", f"{cell_name}_{variant}.csv")
        if os.path.exists(path):
            _, metrics = read_run_csv(path)
            new = np.array([m.new_infections for m in metrics], dtype=np.int64)
            prev = np.array([m.prevalence for m in metrics], dtype=np.int64)
            return new, prev, 0
    run = run_epidemic(ctx["trace"][variant], cfg)
    if path is not None:
        tmp = path + ".tmp"
        write_run_csv(run, tmp)
        os.replace(tmp, path)
    return run.new_by_day, run.prevalence_by_day, run.violations


def _sweep_cell(cell):
    p_idx, rep = cell
    ctx = _CTX
    rng = np.random.default_rng(derive_seed(ctx["master_seed"], "pick", p_idx, rep))
    n_h = ctx["n_hidden"][p_idx]
    n_seeds = ctx["n_seeds"]
    hidden = rng.choice(ctx["hidden_pool"], size=n_h, replace=False)
    non_hidden = rng.choice(ctx["non_hidden_pool"], size=n_seeds - n_h,
                            replace=False)
    nodes = np.concatenate([hidden, non_hidden])
    dur = ctx["durations"]
    seeds = tuple((int(n), int(dur[n])) for n in nodes)
    cfg = EpidemicConfig(
        seeds=seeds, horizon_days=ctx["horizon_days"], env=ctx["env"],
        disease=ctx["disease"],
        seed=derive_seed(ctx["master_seed"], "sweep-run", p_idx, rep),
        latent_range=ctx["latent_range"],
        infectious_range=ctx["infectious_range"])
    name = f"P{ctx['p_values'][p_idx]:g}_rep{rep}"
    return p_idx, rep, {v: _run_or_load(v, cfg, ctx, name) for v in VARIANTS}


@dataclass
class SweepResult:
    """Per-(P, rep, variant) daily series from a hidden-fraction sweep."""

    p_values: tuple[float, ...]
    reps: int
    n_seeds: int
    horizon_days: int
    # arrays shaped (n_P, reps, n_variants, horizon_days)
    new_infections: np.ndarray
    prevalence: np.ndarray
    violations: int

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.new_infections, axis=-1)

    def mean_outbreak(self, variant: str) -> np.ndarray:
        """Mean total new infections (beyond seeds) per P value."""
        v = VARIANTS.index(variant)
        return self.cumulative[:, :, v, -1].mean(axis=1)


def run_p_sweep(trace: ContactTrace, p_values, n_seeds, reps,
                env: EnvConfig, disease: DiseaseParams, master_seed: int,
                horizon_days: int = 32, seed_dur_range=(1, 5),
                latent_range=(1, 2), infectious_range=(3, 5),
                spst: ContactTrace | None = None, workers: int = 1,
                out_dir=None) -> SweepResult:
    """Paired SPDT/SPST sweep over the hidden-spreader seed fraction P."""
    global _CTX
    p_values = tuple(float(p) for p in p_values)
    durations = seed_duration_table(trace, master_seed, seed_dur_range)
    hidden_pool, non_hidden_pool = build_seed_pools(trace, durations)

    n_hidden = []
    for p in p_values:
        raw = p * n_seeds
        n_h = int(round(raw))
        if abs(raw - n_h) > 1e-9:
            raise ConfigError(f"P={p} with {n_seeds} seeds is not an integral split")
        n_hidden.append(n_h)
    need_h = max(n_hidden)
    need_nh = n_seeds - min(n_hidden)
    if len(hidden_pool) < need_h:
        raise ConfigError(f"hidden-spreader pool too small: have "
                          f"{len(hidden_pool)}, need {need_h}")
    if len(non_hidden_pool) < need_nh:
        raise ConfigError(f"non-hidden pool too small: have "
                          f"{len(non_hidden_pool)}, need {need_nh}")

    if spst is None:
        spst = project_spst(trace)
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, "raw"), exist_ok=True)
    _CTX = dict(trace={"spdt": trace, "spst": spst}, master_seed=master_seed,
                n_hidden=n_hidden, n_seeds=n_seeds, durations=durations,
                hidden_pool=hidden_pool, non_hidden_pool=non_hidden_pool,
                p_values=p_values, horizon_days=horizon_days, env=env,
                disease=disease, latent_range=latent_range,
                infectious_range=infectious_range, out_dir=out_dir)
    cells = [(pi, r) for pi in range(len(p_values)) for r in range(reps)]
    try:
        results = _map_cells(_sweep_cell, cells, workers)
    finally:
        _CTX = None

    new = np.zeros((len(p_values), reps, len(VARIANTS), horizon_days), dtype=np.int64)
    prev = np.zeros_like(new)
    violations = 0
    for p_idx, rep, runs in results:
        for v, variant in enumerate(VARIANTS):
            series_new, series_prev, viol = runs[variant]
            new[p_idx, rep, v] = series_new
            prev[p_idx, rep, v] = series_prev
            violations += viol
    return SweepResult(p_values=p_values, reps=reps, n_seeds=n_seeds,
                       horizon_days=horizon_days, new_infections=new,
                       prevalence=prev, violations=violations)


# ---------------------------------------------------------------------------
# single-seed studies

def _single_cell(cell):
    sc_idx, node, rep = cell
    ctx = _CTX
    scenario: ScenarioConfig = ctx["scenarios"][sc_idx]
    env, disease = scenario.apply(ctx["env"], ctx["disease"])
    cfg = EpidemicConfig(
        seeds=((int(node), int(ctx["infectious_days"])),),
        horizon_days=ctx["horizon_days"], env=env, disease=disease,
        # shared across scenarios and variants: common random numbers
        seed=derive_seed(ctx["master_seed"], "single-run", node, rep),
        latent_range=ctx["latent_range"],
        infectious_range=ctx["infectious_range"])
    name = f"{scenario.name}_node{node}_rep{rep}"
    out = {}
    for variant in VARIANTS:
        new, prev, viol = _run_or_load(variant, cfg, ctx, name)
        out[variant] = (int(new.sum()) + 1, int(prev.max()), viol)
    return sc_idx, node, rep, out


@dataclass
class SingleSeedResult:
    """Outbreak outcome for every (scenario, variant, node, repetition)."""

    scenarios: tuple[str, ...]
    nodes: np.ndarray
    reps_per_node: int
    # arrays shaped (n_scenarios, n_variants, n_nodes, reps)
    outbreak_size: np.ndarray
    peak_prevalence: np.ndarray
    violations: int

    def triggering_counts(self, threshold: int = 10) -> dict:
        """Nodes whose outbreak exceeded threshold in at least one repetition."""
        out = {}
        for si, name in enumerate(self.scenarios):
            for vi, variant in enumerate(VARIANTS):
                trig = (self.outbreak_size[si, vi] > threshold).any(axis=1)
                out[(name, variant)] = int(trig.sum())
        return out

    def max_outbreak(self) -> dict:
        out = {}
        for si, name in enumerate(self.scenarios):
            for vi, variant in enumerate(VARIANTS):
                out[(name, variant)] = int(self.outbreak_size[si, vi].max())
        return out


def run_single_seed_study(trace: ContactTrace, seed_set, scenarios,
                          env: EnvConfig, disease: DiseaseParams,
                          master_seed: int, reps_per_node: int = 1,
                          infectious_days: int = 5, horizon_days: int = 32,
                          latent_range=(1, 2), infectious_range=(3, 5),
                          spst: ContactTrace | None = None,
                          workers: int = 1, out_dir=None) -> SingleSeedResult:
    """Run each node of seed_set as the sole seed under each scenario."""
    global _CTX
    nodes = np.asarray(seed_set, dtype=np.int64)
    if nodes.size == 0:
        raise ConfigError("seed set is empty")
    if spst is None:
        spst = project_spst(trace)
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, "raw"), exist_ok=True)
    _CTX = dict(trace={"spdt": trace, "spst": spst}, master_seed=master_seed,
                scenarios=tuple(scenarios), env=env, disease=disease,
                infectious_days=infectious_days, horizon_days=horizon_days,
                latent_range=latent_range, infectious_range=infectious_range,
                out_dir=out_dir)
    cells = [(si, int(node), rep)
             for si in range(len(scenarios))
             for node in nodes
             for rep in range(reps_per_node)]
    try:
        results = _map_cells(_single_cell, cells, workers)
    finally:
        _CTX = None

    node_pos = {int(n): i for i, n in enumerate(nodes)}
    shape = (len(scenarios), len(VARIANTS), nodes.size, reps_per_node)
    outbreak = np.zeros(shape, dtype=np.int64)
    peak = np.zeros(shape, dtype=np.int64)
    violations = 0
    for si, node, rep, out in results:
        ni = node_pos[node]
        for vi, variant in enumerate(VARIANTS):
            size, pk, viol = out[variant]
            outbreak[si, vi, ni, rep] = size
            peak[si, vi, ni, rep] = pk
            violations += viol
    return SingleSeedResult(
        scenarios=tuple(s.name for s in scenarios), nodes=nodes,
        reps_per_node=reps_per_node, outbreak_size=outbreak,
        peak_prevalence=peak, violations=violations)


# ---------------------------------------------------------------------------
# summary tables

def _fmt(x) -> str:
    return f"{x:.6f}"


def summarize_sweep(result: SweepResult, thresholds=(100, 500, 1000)) -> dict:
    """CSV summary tables keyed by table name, recomputable from raw series."""
    cum = result.cumulative
    tables = {}

    for label, data in (("prevalence_by_day", result.prevalence),
                        ("cumulative_by_day", cum)):
        lines = ["variant,P,day,mean,sd"]
        for vi, variant in enumerate(VARIANTS):
            for pi, p in enumerate(result.p_values):
                series = data[pi, :, vi, :]
                mean = series.mean(axis=0)
                sd = series.std(axis=0)
                for day in range(result.horizon_days):
                    lines.append(f"{variant},{p:g},{day},"
                                 f"{_fmt(mean[day])},{_fmt(sd[day])}")
        tables[label] = "\n".join(lines) + "\n"

    lines = ["variant,P,mean_outbreak,sd_outbreak"]
    for vi, variant in enumerate(VARIANTS):
        for pi, p in enumerate(result.p_values):
            final = cum[pi, :, vi, -1]
            lines.append(f"{variant},{p:g},{_fmt(final.mean())},{_fmt(final.std())}")
    tables["outbreak_sizes"] = "\n".join(lines) + "\n"

    lines = ["variant,P,threshold,n_reached,mean_day"]
    for vi, variant in enumerate(VARIANTS):
        for pi, p in enumerate(result.p_values):
            for thr in thresholds:
                days = []
                for rep in range(result.reps):
                    reached = np.nonzero(cum[pi, rep, vi] >= thr)[0]
                    if reached.size:
                        days.append(int(reached[0]))
                if days:
                    lines.append(f"{variant},{p:g},{thr},{len(days)},"
                                 f"{_fmt(float(np.mean(days)))}")
                else:
                    lines.append(f"{variant},{p:g},{thr},0,not_reached")
    tables["days_to_threshold"] = "\n".join(lines) + "\n"

    lines = ["P,spdt_mean_outbreak,spst_mean_outbreak,outbreak_difference"]
    spdt_mean = result.mean_outbreak("spdt")
    spst_mean = result.mean_outbreak("spst")
    for pi, p in enumerate(result.p_values):
        lines.append(f"{p:g},{_fmt(spdt_mean[pi])},{_fmt(spst_mean[pi])},"
                     f"{_fmt(spdt_mean[pi] - spst_mean[pi])}")
    tables["spst_spdt_differences"] = "\n".join(lines) + "\n"
    return tables


def summarize_single_seed(result: SingleSeedResult, threshold: int = 10) -> dict:
    trig = result.triggering_counts(threshold)
    mx = result.max_outbreak()
    lines = ["scenario,variant,n_nodes,n_triggering,max_outbreak"]
    for name in result.scenarios:
        for variant in VARIANTS:
            lines.append(f"{name},{variant},{result.nodes.size},"
                         f"{trig[(name, variant)]},{mx[(name, variant)]}")
    per_node = ["scenario,variant,node,rep,outbreak_size,peak_prevalence"]
    for si, name in enumerate(result.scenarios):
        for vi, variant in enumerate(VARIANTS):
            for ni, node in enumerate(result.nodes):
                for rep in range(result.reps_per_node):
                    per_node.append(
                        f"{name},{variant},{int(node)},{rep},"
                        f"{int(result.outbreak_size[si, vi, ni, rep])},"
                        f"{int(result.peak_prevalence[si, vi, ni, rep])}")
    return {"triggering_summary": "\n".join(lines) + "\n",
            "per_node_outbreaks": "\n".join(per_node) + "\n"}
