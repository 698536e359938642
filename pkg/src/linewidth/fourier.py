"""Discrete Fourier magnitudes of spectra and width estimates from them.

A spectrum sampled at spacing ``delta_nu`` transforms to magnitudes on
the frequency grid ``xi_k = k / (N * delta_nu)``; scaling the raw DFT by
``delta_nu`` makes the magnitudes approximate the continuous transform.
For a Lorentzian band of half width gamma the magnitude decays like
``exp(-2*pi*gamma*xi)``, so the width is recovered from the value and
derivative of the magnitude at zero frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def fft_magnitude(values, delta_nu: float) -> tuple[np.ndarray, np.ndarray]:
    """Magnitudes of the scaled DFT of one realization.

    Returns ``(xi, magnitude)``, both of the input length, with
    ``xi[k] = k / (N * delta_nu)`` and magnitudes ``|DFT| * delta_nu``.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("values must be a 1-d array with at least 2 samples")
    if delta_nu <= 0:
        raise ValueError(f"delta_nu must be positive, got {delta_nu}")
    n = values.size
    xi = np.arange(n) / (n * delta_nu)
    return xi, np.abs(np.fft.fft(values)) * delta_nu


@dataclass(frozen=True)
class FourierDataset:
    """Truncated Fourier magnitudes of several spectrum realizations.

    ``magnitudes`` has one row per realization, one column per retained
    frequency; ``xi`` holds the retained frequencies, starting at zero.
    """

    xi: np.ndarray
    magnitudes: np.ndarray
    delta_nu: float
    n_points: int

    def __post_init__(self):
        if self.magnitudes.ndim != 2:
            raise ValueError("magnitudes must be 2-d (realizations x frequencies)")
        if self.xi.shape != (self.magnitudes.shape[1],):
            raise ValueError("xi length must match the magnitude columns")
        if self.xi[0] != 0.0 or np.any(np.diff(self.xi) <= 0):
            raise ValueError("xi must start at zero and increase")
        if np.any(self.magnitudes < 0):
            raise ValueError("magnitudes must be nonnegative")
        if self.truncation > self.n_points:
            raise ValueError("cannot retain more frequencies than grid points")

    @property
    def n_realizations(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def truncation(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def stacked_magnitudes(self) -> np.ndarray:
        """All rows concatenated, realization by realization."""
        return self.magnitudes.reshape(-1)


def build_dataset(realizations, delta_nu: float, truncation: int) -> FourierDataset:
    """Fourier-transform realizations and keep the first ``truncation`` bins.

    ``realizations`` is (J x N): one spectrum realization per row, all on
    the same grid with spacing ``delta_nu``.
    """
    realizations = np.atleast_2d(np.asarray(realizations, dtype=float))
    n = realizations.shape[1]
    if not 1 <= truncation <= n:
        raise ValueError(f"truncation must lie in [1, {n}], got {truncation}")
    mags = np.empty((realizations.shape[0], truncation))
    xi = None
    for j in range(realizations.shape[0]):
        xi_full, mag = fft_magnitude(realizations[j], delta_nu)
        mags[j] = mag[:truncation]
        if xi is None:
            xi = xi_full[:truncation]
    return FourierDataset(xi, mags, float(delta_nu), n)


def gamma_estimate_from_point(value: float, derivative: float) -> float:
    """Mean line width implied by a magnitude and its derivative at zero.

    The magnitude of a mean-width-``gamma`` band mixture decays like
    ``exp(-2*pi*gamma*xi)`` near zero frequency, so
    ``gamma = -derivative / (2*pi*value)``. The value must be positive;
    the result is negative when the derivative is positive, and callers
    treat such draws as rejected.
    """
    if value <= 0:
        raise ValueError(f"magnitude at zero frequency must be positive, got {value}")
    return -derivative / (2.0 * math.pi * value)


@dataclass(frozen=True)
class GammaCurve:
    """Pointwise width-estimate statistics along a frequency grid.

    ``excluded`` counts sample evaluations dropped because the sampled
    magnitude was not positive at that grid point.
    """

    xi: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    excluded: int

    def __post_init__(self):
        q = self.xi.size
        for name in ("mean", "lower", "upper"):
            if getattr(self, name).shape != (q,):
                raise ValueError(f"{name} must have shape ({q},)")
        if np.any(self.lower > self.upper):
            raise ValueError("lower must not exceed upper")


def gamma_curve(xi, value_samples, derivative_samples) -> GammaCurve:
    """Summarize width estimates over sampled curves.

    ``value_samples`` and ``derivative_samples`` are (S x Q): one sampled
    curve per row over the Q-point grid ``xi``. Entries with nonpositive
    sampled values are excluded pointwise; each grid point needs at least
    one valid sample. Reports the pointwise mean and central 95% interval.
    """
    xi = np.asarray(xi, dtype=float)
    values = np.atleast_2d(np.asarray(value_samples, dtype=float))
    derivs = np.atleast_2d(np.asarray(derivative_samples, dtype=float))
    if values.shape != derivs.shape or values.shape[1] != xi.size:
        raise ValueError("value and derivative samples must both be (S x len(xi))")
    valid = values > 0
    excluded = int(values.size - np.count_nonzero(valid))
    if np.any(~valid.any(axis=0)):
        raise ValueError("some grid points have no positive sampled magnitudes")
    with np.errstate(divide="ignore", invalid="ignore"):
        gammas = -derivs / (2.0 * math.pi * values)
    gammas = np.where(valid, gammas, np.nan)
    mean = np.nanmean(gammas, axis=0)
    lower = np.nanquantile(gammas, 0.025, axis=0)
    upper = np.nanquantile(gammas, 0.975, axis=0)
    return GammaCurve(xi, mean, lower, upper, excluded)


def write_dataset(path, dataset: FourierDataset) -> None:
    """Write magnitudes as text rows: realization, bin, frequency, magnitude."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# delta_nu {dataset.delta_nu!r}\n")
        fh.write(f"# n_points {dataset.n_points}\n")
        fh.write("# realization bin xi magnitude\n")
        for j in range(dataset.n_realizations):
            for k in range(dataset.truncation):
                fh.write(
                    f"{j} {k} {float(dataset.xi[k])!r} {float(dataset.magnitudes[j, k])!r}\n"
                )


def write_curve(path, curve: GammaCurve) -> None:
    """Write a width curve as four text columns: xi, mean, lower, upper."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# excluded {curve.excluded}\n")
        fh.write("# xi mean lower upper\n")
        for i in range(curve.xi.size):
            fh.write(
                f"{float(curve.xi[i])!r} {float(curve.mean[i])!r} "
                f"{float(curve.lower[i])!r} {float(curve.upper[i])!r}\n"
            )
