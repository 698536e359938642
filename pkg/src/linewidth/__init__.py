"""Estimate the area-weighted mean Lorentzian line width of a spectrum.

The estimator works in two stages: a Gaussian process is fit to the
measured spectrum and sampled, the Fourier magnitudes of the sampled
realizations are fit with a second Gaussian process that supports
derivative prediction, and the ratio of derivative to value at zero
frequency yields posterior samples of the mean line width.
"""

from linewidth.lineshape import (
    LineShapeParams,
    NoiseSpec,
    Scenario,
    Spectrum,
    gaussian,
    lorentzian,
    pseudo_voigt,
    sample_scenario,
    synth_spectrum,
    true_mean_gamma,
)
from linewidth.pipeline import GammaPosterior, PipelineConfig, run, sensitivity_scan, summarize

__version__ = "0.1.0"

__all__ = [
    "GammaPosterior",
    "LineShapeParams",
    "NoiseSpec",
    "PipelineConfig",
    "Scenario",
    "Spectrum",
    "__version__",
    "gaussian",
    "lorentzian",
    "pseudo_voigt",
    "run",
    "sample_scenario",
    "sensitivity_scan",
    "summarize",
    "synth_spectrum",
    "true_mean_gamma",
]
