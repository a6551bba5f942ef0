import numpy as np
import pytest

from kernelhm.ensemble import Design, Ensemble, Observation, OutputEnsemble
from kernelhm.kernels import (CenteredKernelSystem, KernelSpec,
                              identity_weight)
from kernelhm.toysim import ToyConfig, auto_label, make_ensemble


def random_fields(l, n, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(l, n))


def linear_identity_spec(l) -> KernelSpec:
    """omega=1, W=I: kernel is the plain dot product."""
    return KernelSpec(omega=1.0, sigma=1.0, delta=1.0,
                      weight=identity_weight(l))


def small_linear_system(l=7, n=5, seed=0) -> CenteredKernelSystem:
    F = random_fields(l, n, seed)
    return CenteredKernelSystem.build(linear_identity_spec(l), F)


@pytest.fixture(scope="session")
def toy_config():
    return ToyConfig()


@pytest.fixture(scope="session")
def toy_ensemble(toy_config):
    return make_ensemble(toy_config, n=30, seed=0)


@pytest.fixture(scope="session")
def toy_labels(toy_config, toy_ensemble):
    return auto_label(toy_config, toy_ensemble.design)
