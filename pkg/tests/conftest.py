"""Shared fixtures: small synthetic spectra and fast sampler settings."""

import numpy as np
import pytest

from linewidth.lineshape import LineShapeParams, NoiseSpec, synth_spectrum
from linewidth.mcmc import DramConfig
from linewidth.pipeline import PipelineConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spectrum():
    """Single Lorentzian band on a coarse grid; fast to fit."""
    params = LineShapeParams([10.0], [1650.0], [10.0], [0.0])
    grid = np.linspace(1550.0, 1750.0, 64)
    return synth_spectrum(params, grid, NoiseSpec(0.02, 99))


@pytest.fixture
def fast_config():
    """Pipeline settings sized for sub-second end-to-end runs."""
    return PipelineConfig(
        realizations=4,
        gamma_samples=120,
        truncation=8,
        seed=7,
        stage1=DramConfig(400, 150),
        stage2=DramConfig(400, 150),
    )
