"""Configuration objects, key=value config files, and config hashing.

All on-disk configuration uses a flat ``key = value`` text format with
``#`` comments.  Unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class TraceFormatError(ValueError):
    """A trace file violates the trace format or its invariants."""


class EnvironmentModelError(ValueError):
    """The sampled or configured environment is unusable (e.g. removal rate <= 0)."""


R_MODE_LITERAL = "paper-literal"
R_MODE_ADDITIVE = "additive-physical"

MINUTES_PER_DAY = 1440.0


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the synthetic SPDT contact-trace generator."""

    M: int
    T: int
    lam: float
    alpha: float
    rho_bounds: tuple[float, float]
    beta: float
    mu_bounds: tuple[float, float]
    delta: int
    p_c: float
    p_b: float
    theta: float
    phi: float
    master_seed: int
    step_minutes: float = 5.0

    def __post_init__(self):
        _require(self.M >= 2, "M must be >= 2")
        _require(self.T >= 1, "T must be >= 1")
        _require(0.0 < self.lam < 1.0, "lambda must be in (0,1)")
        _require(self.step_minutes > 0, "step_minutes must be positive")
        for name, (lo, hi) in (("rho", self.rho_bounds), ("mu", self.mu_bounds)):
            _require(0.0 < lo < hi < 1.0,
                     f"{name}_bounds must be strictly ordered inside (0,1)")
        _require(self.delta >= 0, "delta must be >= 0 steps")
        _require(0.0 < self.p_c < 1.0, "p_c must be in (0,1)")
        _require(0.0 < self.p_b < 1.0, "p_b must be in (0,1)")
        _require(self.theta > 0.0, "theta must be positive")
        _require(0.0 <= self.phi <= 1.0, "phi must be in [0,1]")

    @property
    def steps_per_day(self) -> int:
        spd = MINUTES_PER_DAY / self.step_minutes
        return int(round(spd))


@dataclass(frozen=True)
class EnvConfig:
    """Per-link environment sampling: decay rate b, air exchange g, proximity size."""

    b_range: tuple[float, float] = (0.005, 0.05)
    b_mean: float = 0.01
    g_range: tuple[float, float] = (0.25, 5.0)
    g_median: float = 1.0
    proximity_radius: float = 40.0
    ceiling_height: float = 3.0
    r_mode: str = R_MODE_ADDITIVE

    def __post_init__(self):
        b_lo, b_hi = self.b_range
        g_lo, g_hi = self.g_range
        _require(0.0 < b_lo < b_hi, "b_range must be positive and ordered")
        _require(0.0 < g_lo < g_hi, "g_range must be positive and ordered")
        _require(b_lo < self.b_mean < b_hi,
                 f"b_mean {self.b_mean} not strictly inside b_range {self.b_range}")
        _require(g_lo < self.g_median < g_hi,
                 f"g_median {self.g_median} not strictly inside g_range {self.g_range}")
        _require(self.proximity_radius > 0, "proximity_radius must be positive")
        _require(self.ceiling_height > 0, "ceiling_height must be positive")
        _require(self.r_mode in (R_MODE_LITERAL, R_MODE_ADDITIVE),
                 f"unknown r_mode {self.r_mode!r}")
        if self.r_mode == R_MODE_LITERAL:
            # (1-b)(1-g) <= 0 whenever g >= 1, so the literal product is only
            # usable when the whole g range sits below 1.
            _require(g_hi < 1.0 and b_hi < 1.0,
                     "paper-literal r_mode needs b_range and g_range below 1 "
                     "(otherwise the removal rate (1-b)(1-g) is not positive)")


@dataclass(frozen=True)
class DiseaseParams:
    """Pathogen and host constants, hour-based units throughout."""

    f: float = 18.0        # coughs/hour
    v: float = 6.7e-9      # m^3 per cough
    c: float = 3.7e6       # particles/m^3 of cough fluid
    q: float = 0.45        # m^3/hour pulmonary ventilation
    sigma: float = 0.693   # infection probability per inhaled particle

    def __post_init__(self):
        for name in ("f", "v", "c", "q"):
            _require(getattr(self, name) > 0, f"{name} must be positive")
        _require(0.0 < self.sigma <= 1.0, "sigma must be in (0,1]")


@dataclass(frozen=True)
class EpidemicConfig:
    """One epidemic run: seeds, horizon, disease course ranges, environment."""

    seeds: tuple[tuple[int, int], ...]
    horizon_days: int
    env: EnvConfig
    disease: DiseaseParams
    seed: int
    latent_range: tuple[int, int] = (1, 2)
    infectious_range: tuple[int, int] = (3, 5)

    def __post_init__(self):
        _require(self.horizon_days >= 1, "horizon_days must be >= 1")
        ids = [n for n, _ in self.seeds]
        _require(len(ids) == len(set(ids)), "seed nodes must be distinct")
        for n, d in self.seeds:
            _require(d >= 1, f"seed {n}: infectious duration must be >= 1 day")
        for name, (lo, hi) in (("latent_range", self.latent_range),
                               ("infectious_range", self.infectious_range)):
            _require(1 <= lo <= hi, f"{name} must be an ordered range of days >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Named environment/infectivity scenario overriding the baseline."""

    name: str
    b_mean: float
    g_median: float
    sigma: float

    def apply(self, env: EnvConfig, disease: DiseaseParams):
        env = EnvConfig(b_range=env.b_range, b_mean=self.b_mean,
                        g_range=env.g_range, g_median=self.g_median,
                        proximity_radius=env.proximity_radius,
                        ceiling_height=env.ceiling_height, r_mode=env.r_mode)
        disease = DiseaseParams(f=disease.f, v=disease.v, c=disease.c,
                                q=disease.q, sigma=self.sigma)
        return env, disease


# S-3 nominally sets the mean of b to the lower end of its range; the truncated
# sampler cannot realize a boundary mean, so it is nudged just inside.
BUILTIN_SCENARIOS = {
    "S-1": ScenarioConfig("S-1", b_mean=0.01, g_median=1.0, sigma=0.69),
    "S-2": ScenarioConfig("S-2", b_mean=0.01, g_median=0.5, sigma=0.69),
    "S-3": ScenarioConfig("S-3", b_mean=0.0051, g_median=1.0, sigma=0.80),
}


# ---------------------------------------------------------------------------
# key=value parsing

def parse_kv_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key, val = key.strip(), val.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def _convert(key, val, typ):
    try:
        if typ is int:
            return int(val)
        if typ is float:
            return float(val)
        return val
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {val!r} as {typ.__name__}") from None


GENERATOR_KEYS = {
    "M": int, "T": int, "step_minutes": float, "lambda": float, "alpha": float,
    "rho_min": float, "rho_max": float, "beta": float, "mu_min": float,
    "mu_max": float, "delta": int, "p_c": float, "p_b": float, "theta": float,
    "phi": float, "master_seed": int,
}

_GENERATOR_OPTIONAL = {"step_minutes"}


def generator_config_from_dict(kv: dict[str, str]) -> GeneratorConfig:
    unknown = set(kv) - set(GENERATOR_KEYS)
    if unknown:
        raise ConfigError(f"unknown generator config keys: {sorted(unknown)}")
    missing = set(GENERATOR_KEYS) - set(kv) - _GENERATOR_OPTIONAL
    if missing:
        raise ConfigError(f"missing generator config keys: {sorted(missing)}")
    c = {k: _convert(k, v, GENERATOR_KEYS[k]) for k, v in kv.items()}
    return GeneratorConfig(
        M=c["M"], T=c["T"], step_minutes=c.get("step_minutes", 5.0),
        lam=c["lambda"], alpha=c["alpha"],
        rho_bounds=(c["rho_min"], c["rho_max"]),
        beta=c["beta"], mu_bounds=(c["mu_min"], c["mu_max"]),
        delta=c["delta"], p_c=c["p_c"], p_b=c["p_b"],
        theta=c["theta"], phi=c["phi"], master_seed=c["master_seed"])


def generator_config_to_dict(cfg: GeneratorConfig) -> dict[str, str]:
    return {
        "M": str(cfg.M), "T": str(cfg.T),
        "step_minutes": repr(cfg.step_minutes),
        "lambda": repr(cfg.lam), "alpha": repr(cfg.alpha),
        "rho_min": repr(cfg.rho_bounds[0]), "rho_max": repr(cfg.rho_bounds[1]),
        "beta": repr(cfg.beta),
        "mu_min": repr(cfg.mu_bounds[0]), "mu_max": repr(cfg.mu_bounds[1]),
        "delta": str(cfg.delta), "p_c": repr(cfg.p_c), "p_b": repr(cfg.p_b),
        "theta": repr(cfg.theta), "phi": repr(cfg.phi),
        "master_seed": str(cfg.master_seed),
    }


def generator_config_from_file(path) -> GeneratorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return generator_config_from_dict(parse_kv_text(fh.read()))


# ---------------------------------------------------------------------------
# hashing

def _flatten(obj, prefix=""):
    items = []
    if hasattr(obj, "__dataclass_fields__"):
        for f in fields(obj):
            items.extend(_flatten(getattr(obj, f.name), f"{prefix}{f.name}."))
    elif isinstance(obj, (tuple, list)):
        for i, v in enumerate(obj):
            items.extend(_flatten(v, f"{prefix}{i}."))
    else:
        items.append((prefix.rstrip("."), repr(obj)))
    return items


def config_hash(*objs) -> str:
    """Stable hash over the semantic fields of one or more config objects."""
    h = hashlib.sha256()
    for obj in objs:
        for key, val in _flatten(obj):
            h.update(f"{key}={val}\n".encode())
    return h.hexdigest()[:16]
