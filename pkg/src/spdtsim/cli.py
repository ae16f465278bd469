"""Command-line entry point.

Subcommands: generate, project, simulate, experiment, validate.
Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 validation / trace-format failure.
"""
from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .config import (BUILTIN_SCENARIOS, ConfigError, DiseaseParams, EnvConfig,
                     EpidemicConfig, EnvironmentModelError, TraceFormatError,
                     config_hash, parse_kv_text)
from . import config as _config
from .contact_net import (generate_trace, project_spst, read_trace,
                          trace_distribution_report, validate_trace,
                          write_trace)
from .experiments import (classify_all, find_low_connectivity_set, HIDDEN,
                          run_p_sweep, run_single_seed_study,
                          summarize_single_seed, summarize_sweep)
from .presets import (EXPERIMENT_PRESETS, GENERATOR_PRESETS, default_disease,
                      default_env)
from .seeding import derive_seed
from .seir import run_epidemic, write_run_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _read_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


def _write_manifest(path, command, cfg_hash, master_seed, inputs, outputs):
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config_hash": cfg_hash,
        "master_seed": master_seed,
        "inputs": inputs,
        "outputs": outputs,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# epidemic / experiment config parsing

_ENV_DISEASE_KEYS = {
    "b_lo": float, "b_hi": float, "b_mean": float,
    "g_lo": float, "g_hi": float, "g_median": float,
    "radius": float, "height": float, "r_mode": str,
    "f": float, "v": float, "c": float, "q": float, "sigma": float,
}

_EPIDEMIC_KEYS = {
    "seeds": str, "horizon_days": int, "seed": int,
    "latent_min": int, "latent_max": int,
    "infectious_min": int, "infectious_max": int,
    **_ENV_DISEASE_KEYS,
}

_EXPERIMENT_KEYS = {
    "kind": str, "trace": str, "seed": int,
    "p_values": str, "n_seeds": int, "reps": int,
    "scenarios": str, "window_days": int, "max_direct_neighbors": int,
    "max_seed_nodes": int, "reps_per_node": int,
    "seed_infectious_days": int, "horizon_days": int,
    "thresholds": str, "seed_dur_min": int, "seed_dur_max": int,
    "latent_min": int, "latent_max": int,
    "infectious_min": int, "infectious_max": int,
    **_ENV_DISEASE_KEYS,
}


def _typed(kv: dict, schema: dict, what: str) -> dict:
    unknown = set(kv) - set(schema)
    if unknown:
        raise ConfigError(f"unknown {what} config keys: {sorted(unknown)}")
    return {k: _config._convert(k, v, schema[k]) for k, v in kv.items()}


def _env_disease_from(c: dict):
    base_env = default_env()
    base_dis = default_disease()
    env = EnvConfig(
        b_range=(c.get("b_lo", base_env.b_range[0]),
                 c.get("b_hi", base_env.b_range[1])),
        b_mean=c.get("b_mean", base_env.b_mean),
        g_range=(c.get("g_lo", base_env.g_range[0]),
                 c.get("g_hi", base_env.g_range[1])),
        g_median=c.get("g_median", base_env.g_median),
        proximity_radius=c.get("radius", base_env.proximity_radius),
        ceiling_height=c.get("height", base_env.ceiling_height),
        r_mode=c.get("r_mode", base_env.r_mode))
    disease = DiseaseParams(
        f=c.get("f", base_dis.f), v=c.get("v", base_dis.v),
        c=c.get("c", base_dis.c), q=c.get("q", base_dis.q),
        sigma=c.get("sigma", base_dis.sigma))
    return env, disease


def _parse_seeds(text: str):
    seeds = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        node, _, dur = item.partition(":")
        try:
            seeds.append((int(node), int(dur) if dur else 5))
        except ValueError:
            raise ConfigError(f"bad seed entry {item!r}; expected node:days") from None
    return tuple(seeds)


def _epidemic_config_from(kv: dict, seed_override=None) -> EpidemicConfig:
    c = _typed(kv, _EPIDEMIC_KEYS, "epidemic")
    for key in ("seeds", "seed"):
        if key not in c and not (key == "seed" and seed_override is not None):
            raise ConfigError(f"missing epidemic config key {key!r}")
    env, disease = _env_disease_from(c)
    return EpidemicConfig(
        seeds=_parse_seeds(c["seeds"]),
        horizon_days=c.get("horizon_days", 32),
        env=env, disease=disease,
        seed=seed_override if seed_override is not None else c["seed"],
        latent_range=(c.get("latent_min", 1), c.get("latent_max", 2)),
        infectious_range=(c.get("infectious_min", 3), c.get("infectious_max", 5)))


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    kv = dict(GENERATOR_PRESETS[args.preset]) if args.preset else {}
    if args.config:
        kv.update(_read_config_file(args.config))
    if not kv:
        raise ConfigError("generate needs --config and/or --preset")
    if args.seed is not None:
        kv["master_seed"] = str(args.seed)
    cfg = _config.generator_config_from_dict(kv)
    trace = generate_trace(cfg)
    write_trace(trace, args.out)
    _write_manifest(args.out + ".manifest.json", "generate", config_hash(cfg),
                    cfg.master_seed, inputs=[args.config or f"preset:{args.preset}"],
                    outputs=[args.out])
    print(f"wrote {trace.n_links} links to {args.out}")
    return EXIT_OK


def cmd_project(args) -> int:
    trace = read_trace(args.trace)
    spst = project_spst(trace)
    write_trace(spst, args.out)
    _write_manifest(args.out + ".manifest.json", "project",
                    config_hash(trace.config), trace.config.master_seed,
                    inputs=[args.trace], outputs=[args.out])
    print(f"kept {spst.n_links} of {trace.n_links} links")
    return EXIT_OK


def cmd_simulate(args) -> int:
    trace = read_trace(args.trace)
    cfg = _epidemic_config_from(_read_config_file(args.config), args.seed)
    run = run_epidemic(trace, cfg)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "metrics.csv")
    write_run_csv(run, out_csv)
    _write_manifest(os.path.join(args.out, "manifest.json"), "simulate",
                    run.config_digest, cfg.seed,
                    inputs=[args.trace, args.config], outputs=[out_csv])
    print(f"{run.total_new_infections} infections over "
          f"{cfg.horizon_days} days -> {out_csv}")
    return EXIT_OK


def _experiment_scenarios(c):
    names = [s.strip() for s in c.get("scenarios", "S-1").split(",") if s.strip()]
    out = []
    for name in names:
        if name not in BUILTIN_SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; "
                              f"available: {sorted(BUILTIN_SCENARIOS)}")
        out.append(BUILTIN_SCENARIOS[name])
    return out


def _subsample(nodes, limit, master_seed):
    if limit is None or len(nodes) <= limit:
        return nodes
    rng = np.random.default_rng(derive_seed(master_seed, "subsample"))
    return np.sort(rng.choice(nodes, size=limit, replace=False))


def cmd_experiment(args) -> int:
    kv = dict(EXPERIMENT_PRESETS[args.preset]) if args.preset else {}
    kv.update(_read_config_file(args.config))
    c = _typed(kv, _EXPERIMENT_KEYS, "experiment")
    for key in ("kind", "trace", "seed"):
        if key not in c and not (key == "seed" and args.seed is not None):
            raise ConfigError(f"missing experiment config key {key!r}")
    master_seed = args.seed if args.seed is not None else c["seed"]
    kind = c["kind"]
    env, disease = _env_disease_from(c)
    horizon = c.get("horizon_days", 32)
    latent = (c.get("latent_min", 1), c.get("latent_max", 2))
    infectious = (c.get("infectious_min", 3), c.get("infectious_max", 5))

    trace_path = c["trace"]
    if not os.path.isabs(trace_path):
        trace_path = os.path.join(os.path.dirname(os.path.abspath(args.config)),
                                  trace_path)
    trace = read_trace(trace_path)
    spst = project_spst(trace)
    os.makedirs(args.out, exist_ok=True)
    summary_dir = os.path.join(args.out, "summary")
    os.makedirs(summary_dir, exist_ok=True)

    if kind == "p_sweep":
        p_values = [float(x) for x in c.get("p_values", "0,0.5,1").split(",")]
        thresholds = tuple(int(x) for x in
                           c.get("thresholds", "100,500,1000").split(","))
        result = run_p_sweep(
            trace, p_values=p_values, n_seeds=c.get("n_seeds", 200),
            reps=c.get("reps", 20), env=env, disease=disease,
            master_seed=master_seed, horizon_days=horizon,
            seed_dur_range=(c.get("seed_dur_min", 1), c.get("seed_dur_max", 5)),
            latent_range=latent, infectious_range=infectious, spst=spst,
            workers=args.workers, out_dir=args.out)
        tables = summarize_sweep(result, thresholds)
    elif kind in ("low_connectivity", "hidden_single"):
        window = c.get("window_days", 5)
        if kind == "low_connectivity":
            pool = find_low_connectivity_set(
                spst, window_days=window,
                max_direct_neighbors=c.get("max_direct_neighbors", 2))
            reps = c.get("reps_per_node", 1)
        else:
            classes = classify_all(trace, window)
            pool = np.nonzero(classes == HIDDEN)[0]
            reps = c.get("reps_per_node", 10)
        if pool.size == 0:
            raise ConfigError(f"empty seed pool for {kind} "
                              f"(window_days={window})")
        pool = _subsample(pool, c.get("max_seed_nodes"), master_seed)
        result = run_single_seed_study(
            trace, pool, _experiment_scenarios(c), env=env, disease=disease,
            master_seed=master_seed, reps_per_node=reps,
            infectious_days=c.get("seed_infectious_days", 5),
            horizon_days=horizon, latent_range=latent,
            infectious_range=infectious, spst=spst, workers=args.workers,
            out_dir=args.out)
        tables = summarize_single_seed(result)
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    for name, text in sorted(tables.items()):
        with open(os.path.join(summary_dir, name + ".csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    _write_manifest(os.path.join(args.out, "manifest.json"), f"experiment:{kind}",
                    config_hash(env, disease) + "-" + kind, master_seed,
                    inputs=[args.config, trace_path], outputs=[summary_dir])
    print(f"experiment {kind} complete; summaries in {summary_dir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    trace = read_trace(args.trace)
    problems = validate_trace(trace)
    for p in problems:
        print(f"FAIL {p}")
    if trace.n_links == 0:
        print("WARN trace has no links")
    gof = trace_distribution_report(trace, alpha=args.alpha)
    for name, (p, ok) in sorted(gof.items()):
        status = "ok" if ok else "FAIL"
        print(f"{status} goodness-of-fit {name}: p={p:.4g}")
        if not ok:
            problems.append(f"goodness-of-fit {name}")
    if problems:
        print(f"{len(problems)} violations")
        return EXIT_VALIDATION
    print("trace valid")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spdtsim",
        description="Simulate airborne-disease spread over synthetic "
                    "same-place-different-time contact networks.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic contact trace")
    g.add_argument("--config", help="generator config file (key = value)")
    g.add_argument("--preset", choices=sorted(GENERATOR_PRESETS))
    g.add_argument("--out", required=True, help="output trace path")
    g.add_argument("--seed", type=int, help="override master_seed")
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("project", help="project a trace to direct links only")
    p.add_argument("trace", help="input trace file")
    p.add_argument("--out", required=True, help="output trace path")
    p.set_defaults(func=cmd_project)

    s = sub.add_parser("simulate", help="run one epidemic on a trace")
    s.add_argument("trace", help="input trace file")
    s.add_argument("--config", required=True, help="epidemic config file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, help="override rng seed")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run an experiment grid")
    e.add_argument("--config", required=True, help="experiment spec file")
    e.add_argument("--preset", choices=sorted(EXPERIMENT_PRESETS))
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--seed", type=int, help="override master seed")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("validate", help="check a trace file")
    v.add_argument("trace", help="trace file to validate")
    v.add_argument("--alpha", type=float, default=0.001,
                   help="goodness-of-fit significance level")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EnvironmentModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceFormatError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
