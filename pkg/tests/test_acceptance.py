"""Acceptance suite: one test (and one printed PASS line) per criterion.

Criteria 4-6 and 8 share one full-size trace (M=30,000 nodes, 32 days) built
once per session; the remaining criteria are self-contained.  Safety-property
counters from every epidemic run in criteria 4-6 are aggregated and checked
in criterion 8.
"""
import os
import time

import numpy as np
import pytest
from scipy import stats

from conftest import make_disease, make_env, make_generator_config
from oracles import ode_exposure
from spdtsim.cli import EXIT_OK, main
from spdtsim.config import (BUILTIN_SCENARIOS, EpidemicConfig,
                            R_MODE_ADDITIVE, R_MODE_LITERAL,
                            generator_config_from_dict,
                            generator_config_to_dict)
from spdtsim.contact_net import (generate_trace, link_delay_pmf, project_spst,
                                 sample_active_duration, sample_degree,
                                 sample_heterogeneity, sample_link_delay,
                                 sample_link_duration, truncated_power_cdf)
from spdtsim.experiments import (HIDDEN, classify_all,
                                 find_low_connectivity_set, run_p_sweep,
                                 run_single_seed_study)
from spdtsim.exposure import (exposure_components_hours, infection_probability,
                              removal_rate)
from spdtsim.presets import DESK_GENERATOR, default_disease, default_env
from spdtsim.seeding import derive_seed
from spdtsim.seir import run_epidemic


def report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


@pytest.fixture(scope="module")
def desk():
    cfg = generator_config_from_dict(DESK_GENERATOR)
    trace = generate_trace(cfg)
    return trace, project_spst(trace)


@pytest.fixture(scope="module")
def hidden_nullity_runs(desk):
    """Criterion 4 data: hidden single seeds run on the SPST projection."""
    trace, spst = desk
    master = trace.config.master_seed
    pool = np.nonzero(classify_all(trace, 5) == HIDDEN)[0]
    rng = np.random.default_rng(derive_seed(master, "acceptance-hidden"))
    nodes = np.sort(rng.choice(pool, size=min(400, pool.size), replace=False))
    totals, violations = [], 0
    for node in nodes:
        for rep in range(2):
            cfg = EpidemicConfig(
                seeds=((int(node), 5),), horizon_days=32, env=default_env(),
                disease=default_disease(),
                seed=derive_seed(master, "hidden-nullity", int(node), rep))
            run = run_epidemic(spst, cfg)
            totals.append(run.total_new_infections)
            violations += run.violations
    return np.array(totals), len(nodes), violations


@pytest.fixture(scope="module")
def sweep_result(desk):
    """Criterion 5 data: the full desk-scale P sweep, timed."""
    trace, spst = desk
    start = time.time()
    result = run_p_sweep(
        trace, p_values=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0), n_seeds=200, reps=20,
        env=default_env(), disease=default_disease(),
        master_seed=trace.config.master_seed, horizon_days=32, spst=spst)
    return result, time.time() - start


@pytest.fixture(scope="module")
def single_seed_result(desk):
    """Criterion 6 data: the low-connectivity single-seed study."""
    trace, spst = desk
    master = trace.config.master_seed
    low = find_low_connectivity_set(spst)
    rng = np.random.default_rng(derive_seed(master, "subsample"))
    pool = np.sort(rng.choice(low, size=600, replace=False))
    scenarios = [BUILTIN_SCENARIOS[n] for n in ("S-1", "S-2", "S-3")]
    return run_single_seed_study(
        trace, pool, scenarios, env=default_env(), disease=default_disease(),
        master_seed=master, reps_per_node=1, infectious_days=5,
        horizon_days=32, spst=spst)


def test_criterion_1_exposure_oracle():
    rng = np.random.default_rng(derive_seed(1, "acceptance-oracle"))
    start = time.time()
    worst = 0.0
    for r_mode in (R_MODE_LITERAL, R_MODE_ADDITIVE):
        t_a = rng.uniform(1 / 60, 8.0, 500)
        t_c = rng.uniform(0.0, t_a + 2.0)
        t_d = rng.uniform(1 / 60, 8.0, 500)
        b = rng.uniform(0.005, 0.05, 500)
        g = rng.uniform(0.25, 0.95 if r_mode == R_MODE_LITERAL else 5.0, 500)
        r = removal_rate(b, g, r_mode)
        V, n, q = 15079.6, 8.925e-2, 0.45
        od, oi = ode_exposure(t_a, t_c, t_d, r, V, n, q)
        cd, ci = exposure_components_hours(t_a, t_c, t_d, r, V, n, q)
        for closed, oracle in ((cd, od), (ci, oi)):
            scale = np.maximum(np.abs(oracle), 1e-300)
            err = np.where((closed == 0) & (oracle == 0), 0.0,
                           np.abs(closed - oracle) / scale)
            worst = max(worst, float(err.max()))
    elapsed = time.time() - start
    report("criterion 1 (exposure oracle, 1000 tuples)",
           worst <= 1e-6 and elapsed <= 60.0,
           f"max rel err {worst:.3g}, {elapsed:.1f}s")


def test_criterion_2_dose_response_anchor():
    p = infection_probability(1.0, 0.693)
    report("criterion 2 (dose-response anchor)", abs(p - 0.5) <= 5e-4,
           f"P(infect | dose 1) = {p:.6f}")


def geometric_chisq_pvalue(x, p):
    """Chi-square p-value against geometric(p) on {1,2,...}.

    Values are binned individually up to the point where the lumped tail
    still expects ~20 samples, keeping every expected count healthy.
    """
    size = x.size
    cap = max(2, int(np.ceil(np.log(20.0 / size) / np.log(1.0 - p))))
    observed = np.bincount(np.minimum(x, cap), minlength=cap + 1)[1:]
    pmf = p * (1.0 - p) ** np.arange(cap)          # values 1..cap
    pmf[-1] = (1.0 - p) ** (cap - 1)               # lumped tail P(X >= cap)
    return stats.chisquare(observed, pmf * size).pvalue


def test_criterion_3_generator_distributions():
    rng = np.random.default_rng(derive_seed(1, "acceptance-gof"))
    size = 10 ** 5
    pvals = {}

    pvals["active_duration"] = geometric_chisq_pvalue(
        sample_active_duration(0.3, rng, size=size), 0.3)
    pvals["degree"] = geometric_chisq_pvalue(
        sample_degree(0.4, rng, size=size), 0.6)
    pvals["link_duration"] = geometric_chisq_pvalue(
        sample_link_duration(0.25, rng, size=size), 0.25)

    window = 10
    x = sample_link_delay(0.15, window, rng, size=size)
    pvals["link_delay"] = stats.chisquare(
        np.bincount(x, minlength=window),
        link_delay_pmf(0.15, window) * size).pvalue

    for exponent, bounds, label in ((2.5, (0.002, 0.05), "rho_power_law"),
                                    (2.5, (0.1, 0.7), "mu_power_law"),
                                    (1.0, (0.1, 0.7), "log_power_law")):
        x = sample_heterogeneity(exponent, bounds, rng, size=size)
        pvals[label] = stats.kstest(
            x, lambda v: truncated_power_cdf(v, exponent, bounds)).pvalue

    ok = all(p > 0.01 for p in pvals.values())
    report("criterion 3 (sampler goodness of fit)", ok,
           ", ".join(f"{k} p={v:.3f}" for k, v in pvals.items()))


def test_criterion_4_hidden_spreader_nullity(hidden_nullity_runs):
    totals, n_nodes, _ = hidden_nullity_runs
    report("criterion 4 (hidden-seed nullity on direct-only network)",
           bool(np.all(totals == 0)),
           f"{n_nodes} hidden seeds x 2 reps, max new infections "
           f"{int(totals.max())}")


def test_criterion_5_p_sweep_directional(sweep_result):
    result, elapsed = sweep_result
    spdt = result.mean_outbreak("spdt")
    spst = result.mean_outbreak("spst")
    non_increasing = bool(np.all(np.diff(spst) <= 0))
    null_at_one = spst[-1] == 0.0
    variation = float((spdt.max() - spdt.min()) / spdt.max())
    dominates = bool(np.all(spdt >= spst))
    ok = (non_increasing and null_at_one and variation <= 0.15 and dominates
          and elapsed <= 1800.0)
    report("criterion 5 (P sweep directional)", ok,
           f"spst means {np.array2string(spst, precision=1)}, "
           f"spdt variation {variation:.1%}, dominance {dominates}, "
           f"{elapsed:.0f}s")


def test_criterion_6_low_connectivity_directional(single_seed_result):
    trig = single_seed_result.triggering_counts(threshold=10)
    s1_spdt = trig[("S-1", "spdt")]
    s1_spst = trig[("S-1", "spst")]
    s2_spdt = trig[("S-2", "spdt")]
    s3_spdt = trig[("S-3", "spdt")]
    ok = s1_spdt > s1_spst and s3_spdt >= s1_spdt and s2_spdt >= s1_spdt
    report("criterion 6 (low-connectivity scenarios)", ok,
           f"S-1 {s1_spdt}>{s1_spst}, S-2 {s2_spdt}, S-3 {s3_spdt}")


def test_criterion_7_cli_determinism(tmp_path):
    cfg_path = tmp_path / "generator.cfg"
    kv = generator_config_to_dict(make_generator_config())
    cfg_path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    traces = []
    for name in ("t1.txt", "t2.txt"):
        out = tmp_path / name
        assert main(["generate", "--config", str(cfg_path),
                     "--out", str(out)]) == EXIT_OK
        traces.append(out.read_bytes())

    epi_cfg = tmp_path / "epidemic.cfg"
    epi_cfg.write_text("seeds = 0:5,1:4\nseed = 17\nhorizon_days = 16\n")
    sims = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        assert main(["simulate", str(tmp_path / "t1.txt"), "--config",
                     str(epi_cfg), "--out", str(out)]) == EXIT_OK
        sims.append((out / "metrics.csv").read_bytes())

    exp_cfg = tmp_path / "exp.cfg"
    exp_cfg.write_text("kind = p_sweep\ntrace = t1.txt\nseed = 5\n"
                       "p_values = 0,1\nn_seeds = 4\nreps = 2\n"
                       "horizon_days = 6\n")
    grids = []
    for name, workers in (("e1", "1"), ("e2", "4")):
        out = tmp_path / name
        assert main(["experiment", "--config", str(exp_cfg), "--out",
                     str(out), "--workers", workers]) == EXIT_OK
        files = {}
        for sub in ("raw", "summary"):
            for f in sorted(os.listdir(out / sub)):
                files[f"{sub}/{f}"] = (out / sub / f).read_bytes()
        grids.append(files)

    ok = traces[0] == traces[1] and sims[0] == sims[1] and grids[0] == grids[1]
    report("criterion 7 (byte-identical reruns, any worker count)", ok,
           f"trace={traces[0] == traces[1]}, simulate={sims[0] == sims[1]}, "
           f"experiment={grids[0] == grids[1]}")


def test_criterion_8_seir_safety(hidden_nullity_runs, sweep_result,
                                 single_seed_result):
    total = (hidden_nullity_runs[2] + sweep_result[0].violations
             + single_seed_result.violations)
    report("criterion 8 (SEIR safety, all runs of criteria 4-6)", total == 0,
           f"{total} violations")
