"""Stochastic simulator of airborne-disease spread over synthetic
same-place-different-time (SPDT) contact networks."""

__version__ = "0.1.0"

from .config import (BUILTIN_SCENARIOS, ConfigError, DiseaseParams, EnvConfig,
                     EpidemicConfig, EnvironmentModelError, GeneratorConfig,
                     ScenarioConfig, TraceFormatError)
from .contact_net import (ContactTrace, SPDTLink, generate_trace,
                          project_spst, read_trace, write_trace)
from .exposure import (EnvironmentSample, LinkExposure, classify_link_case,
                       infection_probability, link_exposure, particle_rate,
                       sample_environment)
from .seir import EpidemicRun, run_epidemic
from .experiments import (SingleSeedResult, SweepResult, classify_seed,
                          find_low_connectivity_set, run_p_sweep,
                          run_single_seed_study)
