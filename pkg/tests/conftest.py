"""Shared fixtures: a small generated trace and config helpers."""
import numpy as np
import pytest

from spdtsim.config import DiseaseParams, EnvConfig, GeneratorConfig
from spdtsim.contact_net import generate_trace, project_spst


def make_generator_config(**overrides) -> GeneratorConfig:
    base = dict(M=200, T=2016, lam=0.3, alpha=2.5, rho_bounds=(0.002, 0.05),
                beta=2.5, mu_bounds=(0.1, 0.7), delta=6, p_c=0.15, p_b=0.25,
                theta=50.0, phi=0.1, master_seed=7, step_minutes=5.0)
    base.update(overrides)
    return GeneratorConfig(**base)


def make_env(**overrides) -> EnvConfig:
    base = dict(b_range=(0.005, 0.05), b_mean=0.01, g_range=(0.25, 5.0),
                g_median=1.0, proximity_radius=3.0, ceiling_height=3.0)
    base.update(overrides)
    return EnvConfig(**base)


def make_disease(**overrides) -> DiseaseParams:
    base = dict(c=6.0e10, sigma=0.69)
    base.update(overrides)
    return DiseaseParams(**base)


@pytest.fixture(scope="session")
def small_config():
    return make_generator_config()


@pytest.fixture(scope="session")
def small_trace(small_config):
    return generate_trace(small_config)


@pytest.fixture(scope="session")
def small_spst(small_trace):
    return project_spst(small_trace)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
