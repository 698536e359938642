"""Unit-area band profiles, synthetic spectra, and scenario sampling.

Profiles are normalized to unit area on the infinite line: a Lorentzian
parameterized by its half width at half maximum ``gamma``, a Gaussian
parameterized by its standard deviation ``sigma``, and a pseudo-Voigt
blend of the two driven by the fifth-order total-width combination rule.
A scenario is a bundle of band parameters plus a noise level; synthetic
spectra are sums of scaled profiles on a uniform wavenumber grid with
additive Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

DEFAULT_GRID_MIN = 1550.0
DEFAULT_GRID_MAX = 1750.0
DEFAULT_GRID_POINTS = 512

# Band-parameter distributions used by sample_scenario.
AREA_LOW, AREA_HIGH = 1.0, 30.0
LOCATION_LOW, LOCATION_HIGH = 1625.0, 1675.0
LORENTZ_GAMMA_LOW, LORENTZ_GAMMA_HIGH = 2.5, 20.0
GAUSS_SIGMA_LOW, GAUSS_SIGMA_HIGH = 10.0, 30.0
VOIGT_WIDTH_SIGMA = 0.4  # lognormal sigma of the total-width draw
VOIGT_WIDTH_MU = math.log(25.0) - 0.5 * VOIGT_WIDTH_SIGMA**2  # mean width 25
NOISE_FRACTION = 0.05  # noise std as a fraction of the noise-free maximum

_GAUSS_FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))

SCENARIO_KINDS = ("lorentzian", "gaussian", "voigt")


def default_grid() -> np.ndarray:
    """Uniform wavenumber grid used when a caller does not supply one."""
    return np.linspace(DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS)


def lorentzian(nu, gamma: float) -> np.ndarray:
    """Unit-area Lorentzian centered at zero.

    Parameters
    ----------
    nu : array_like
        Offsets from the band center, in wavenumbers.
    gamma : float
        Half width at half maximum, > 0.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    nu = np.asarray(nu, dtype=float)
    return gamma / (math.pi * (nu * nu + gamma * gamma))


def gaussian(nu, sigma: float) -> np.ndarray:
    """Unit-area Gaussian centered at zero with standard deviation sigma."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    nu = np.asarray(nu, dtype=float)
    return np.exp(-0.5 * (nu / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def lorentz_fwhm(gamma):
    """Full width at half maximum of a Lorentzian with half width gamma."""
    return 2.0 * np.asarray(gamma, dtype=float)


def gauss_fwhm(sigma):
    """Full width at half maximum of a Gaussian with standard deviation sigma."""
    return _GAUSS_FWHM_FACTOR * np.asarray(sigma, dtype=float)


def total_fwhm(fwhm_lorentz, fwhm_gauss):
    """Combined full width of a Voigt-like profile from its component widths.

    Uses the standard fifth-order mixing rule; exact for either pure limit.
    """
    fl = np.asarray(fwhm_lorentz, dtype=float)
    fg = np.asarray(fwhm_gauss, dtype=float)
    return (
        fg**5
        + 2.69269 * fg**4 * fl
        + 2.42843 * fg**3 * fl**2
        + 4.47163 * fg**2 * fl**3
        + 0.07842 * fg * fl**4
        + fl**5
    ) ** 0.2


def mixing_fraction(fwhm_lorentz, fwhm_total):
    """Lorentzian weight of the pseudo-Voigt blend.

    Cubic polynomial in the width ratio; 0 at the pure-Gaussian limit and
    exactly 1 at the pure-Lorentzian limit.
    """
    q = np.asarray(fwhm_lorentz, dtype=float) / np.asarray(fwhm_total, dtype=float)
    return q * (1.36603 + q * (-0.47719 + q * 0.11116))


def pseudo_voigt(nu, gamma: float, sigma: float) -> np.ndarray:
    """Unit-area pseudo-Voigt profile centered at zero.

    A weighted sum of the unit-area Lorentzian (half width ``gamma``) and
    Gaussian (standard deviation ``sigma``). Reduces exactly to the pure
    profile when the other width is zero.
    """
    if gamma < 0 or sigma < 0 or (gamma == 0 and sigma == 0):
        raise ValueError(f"need gamma >= 0, sigma >= 0, not both zero; got gamma={gamma} sigma={sigma}")
    if sigma == 0:
        return lorentzian(nu, gamma)
    if gamma == 0:
        return gaussian(nu, sigma)
    fl = 2.0 * gamma
    fg = _GAUSS_FWHM_FACTOR * sigma
    eta = float(mixing_fraction(fl, total_fwhm(fl, fg)))
    return eta * lorentzian(nu, gamma) + (1.0 - eta) * gaussian(nu, sigma)


def gaussian_fwhm_for_total(total: float, fwhm_lorentz: float) -> float:
    """Gaussian component width that makes the combined width equal ``total``.

    Inverts :func:`total_fwhm` in its Gaussian argument by bisection to a
    tolerance of 1e-10 * total. Requires 0 <= fwhm_lorentz <= total.
    """
    if total <= 0:
        raise ValueError(f"total width must be positive, got {total}")
    if not 0.0 <= fwhm_lorentz <= total:
        raise ValueError(f"need 0 <= fwhm_lorentz <= total, got {fwhm_lorentz} vs {total}")
    if fwhm_lorentz == total:
        return 0.0
    # total_fwhm is strictly increasing in the Gaussian width, and the
    # combined width always meets or exceeds either component, so the root
    # is bracketed by [0, total].
    return float(
        bisect(lambda fg: total_fwhm(fwhm_lorentz, fg) - total, 0.0, total, xtol=1e-10 * total)
    )


@dataclass(frozen=True)
class LineShapeParams:
    """Parameters of M bands: area, center location, and the two widths.

    ``gammas`` are Lorentzian half widths, ``sigmas`` Gaussian standard
    deviations; every band needs at least one of them positive.
    """

    areas: np.ndarray
    locations: np.ndarray
    gammas: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "areas", np.atleast_1d(np.asarray(self.areas, dtype=float)))
        object.__setattr__(self, "locations", np.atleast_1d(np.asarray(self.locations, dtype=float)))
        object.__setattr__(self, "gammas", np.atleast_1d(np.asarray(self.gammas, dtype=float)))
        object.__setattr__(self, "sigmas", np.atleast_1d(np.asarray(self.sigmas, dtype=float)))
        m = self.areas.size
        if m == 0:
            raise ValueError("need at least one band")
        for name in ("areas", "locations", "gammas", "sigmas"):
            arr = getattr(self, name)
            if arr.shape != (m,):
                raise ValueError(f"{name} must have shape ({m},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(self.areas <= 0):
            raise ValueError("areas must be positive")
        if np.any(self.locations <= 0):
            raise ValueError("locations must be positive wavenumbers")
        if np.any(self.gammas < 0) or np.any(self.sigmas < 0):
            raise ValueError("widths must be nonnegative")
        if np.any((self.gammas == 0) & (self.sigmas == 0)):
            raise ValueError("every band needs gamma > 0 or sigma > 0")

    @property
    def n_bands(self) -> int:
        return self.areas.size


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise: standard deviation and generator seed."""

    sigma_epsilon: float
    rng_seed: int

    def __post_init__(self):
        if not (np.isfinite(self.sigma_epsilon) and self.sigma_epsilon >= 0):
            raise ValueError(f"sigma_epsilon must be finite and >= 0, got {self.sigma_epsilon}")


@dataclass(frozen=True)
class Spectrum:
    """Intensities sampled on a strictly increasing uniform wavenumber grid."""

    wavenumbers: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "wavenumbers", np.asarray(self.wavenumbers, dtype=float))
        object.__setattr__(self, "intensities", np.asarray(self.intensities, dtype=float))
        nu, y = self.wavenumbers, self.intensities
        if nu.ndim != 1 or y.shape != nu.shape:
            raise ValueError("wavenumbers and intensities must be 1-d arrays of equal length")
        if nu.size < 8:
            raise ValueError(f"need at least 8 grid points, got {nu.size}")
        steps = np.diff(nu)
        if np.any(steps <= 0):
            raise ValueError("wavenumbers must be strictly increasing")
        mean_step = float(np.mean(steps))
        if np.max(np.abs(steps - mean_step)) > 1e-9 * mean_step:
            raise ValueError("wavenumber grid must be uniform to 1e-9 relative spacing")
        if not np.all(np.isfinite(y)):
            raise ValueError("intensities must be finite")

    @property
    def n_points(self) -> int:
        return self.wavenumbers.size

    @property
    def delta_nu(self) -> float:
        """Grid spacing in wavenumbers."""
        return float((self.wavenumbers[-1] - self.wavenumbers[0]) / (self.wavenumbers.size - 1))

    def crop(self, low: float, high: float) -> "Spectrum":
        """Restrict to wavenumbers within [low, high] (at least 8 points)."""
        if high < low:
            low, high = high, low
        keep = (self.wavenumbers >= low) & (self.wavenumbers <= high)
        if np.count_nonzero(keep) < 8:
            raise ValueError(f"region [{low}, {high}] keeps fewer than 8 grid points")
        return Spectrum(self.wavenumbers[keep], self.intensities[keep])


@dataclass(frozen=True)
class Scenario:
    """A band-parameter set with its noise level and synthesis grid."""

    kind: str
    params: LineShapeParams
    sigma_epsilon: float
    seed: int
    grid_min: float = DEFAULT_GRID_MIN
    grid_max: float = DEFAULT_GRID_MAX
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if not self.grid_max > self.grid_min:
            raise ValueError("grid_max must exceed grid_min")
        if self.grid_points < 8:
            raise ValueError("grid_points must be at least 8")

    def grid(self) -> np.ndarray:
        return np.linspace(self.grid_min, self.grid_max, self.grid_points)


def noise_free_spectrum(params: LineShapeParams, grid: np.ndarray) -> np.ndarray:
    """Sum of scaled band profiles evaluated on ``grid`` without noise."""
    grid = np.asarray(grid, dtype=float)
    total = np.zeros_like(grid)
    for a, loc, g, s in zip(params.areas, params.locations, params.gammas, params.sigmas):
        total += a * pseudo_voigt(grid - loc, g, s)
    return total


def synth_spectrum(params: LineShapeParams, grid: np.ndarray, noise: NoiseSpec) -> Spectrum:
    """Synthesize a noisy spectrum on a uniform grid.

    The noise draw is fully determined by ``noise.rng_seed``, so repeated
    calls with identical arguments return identical spectra.
    """
    grid = np.asarray(grid, dtype=float)
    clean = noise_free_spectrum(params, grid)
    rng = np.random.default_rng(noise.rng_seed)
    return Spectrum(grid, clean + noise.sigma_epsilon * rng.standard_normal(grid.size))


def true_mean_gamma(params: LineShapeParams) -> float:
    """Area-weighted mean of the Lorentzian half widths."""
    return float(np.dot(params.areas, params.gammas) / np.sum(params.areas))


def sample_scenario(kind: str, n_bands: int, seed: int, grid: np.ndarray | None = None) -> Scenario:
    """Draw a random band-parameter scenario of the given kind.

    Areas are uniform on [1, 30] and locations uniform on [1625, 1675] for
    every kind. Lorentzian scenarios draw half widths uniform on
    [2.5, 20]; Gaussian scenarios draw standard deviations uniform on
    [10, 30]; Voigt scenarios draw a lognormal total width per band, give
    a uniform share of it to the Lorentzian component, and solve the
    width-combination rule for the Gaussian remainder. The noise level is
    5% of the noise-free maximum on the synthesis grid.
    """
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"kind must be one of {SCENARIO_KINDS}, got {kind!r}")
    if n_bands < 1:
        raise ValueError(f"n_bands must be >= 1, got {n_bands}")
    rng = np.random.default_rng(seed)
    areas = rng.uniform(AREA_LOW, AREA_HIGH, n_bands)
    locations = rng.uniform(LOCATION_LOW, LOCATION_HIGH, n_bands)
    if kind == "lorentzian":
        gammas = rng.uniform(LORENTZ_GAMMA_LOW, LORENTZ_GAMMA_HIGH, n_bands)
        sigmas = np.zeros(n_bands)
    elif kind == "gaussian":
        gammas = np.zeros(n_bands)
        sigmas = rng.uniform(GAUSS_SIGMA_LOW, GAUSS_SIGMA_HIGH, n_bands)
    else:
        totals = rng.lognormal(VOIGT_WIDTH_MU, VOIGT_WIDTH_SIGMA, n_bands)
        lorentz_parts = rng.uniform(0.0, totals)
        gammas = lorentz_parts / 2.0
        sigmas = np.array(
            [gaussian_fwhm_for_total(t, fl) for t, fl in zip(totals, lorentz_parts)]
        ) / _GAUSS_FWHM_FACTOR
    params = LineShapeParams(areas, locations, gammas, sigmas)
    if grid is None:
        grid = default_grid()
        grid_min, grid_max, grid_points = DEFAULT_GRID_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS
    else:
        grid = np.asarray(grid, dtype=float)
        grid_min, grid_max, grid_points = float(grid[0]), float(grid[-1]), grid.size
    sigma_eps = NOISE_FRACTION * float(np.max(noise_free_spectrum(params, grid)))
    return Scenario(kind, params, sigma_eps, seed, grid_min, grid_max, grid_points)


# ---------------------------------------------------------------------------
# File formats: scenarios and spectra are plain text, '#' starts a comment.

def write_scenario(path, scenario: Scenario) -> None:
    """Write a scenario file: key-value header, then one row per band."""
    p = scenario.params
    lines = [
        "# band scenario",
        f"kind {scenario.kind}",
        f"bands {p.n_bands}",
        f"seed {scenario.seed}",
        f"sigma_epsilon {float(scenario.sigma_epsilon)!r}",
        f"grid_min {float(scenario.grid_min)!r}",
        f"grid_max {float(scenario.grid_max)!r}",
        f"grid_points {scenario.grid_points}",
        "# area location gamma sigma",
    ]
    for a, loc, g, s in zip(p.areas, p.locations, p.gammas, p.sigmas):
        lines.append(f"{float(a)!r} {float(loc)!r} {float(g)!r} {float(s)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scenario(path) -> Scenario:
    """Parse a scenario file written by :func:`write_scenario`."""
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) == 2 and not _is_number(parts[0]):
                header[parts[0]] = parts[1]
            elif len(parts) == 4 and all(_is_number(tok) for tok in parts):
                rows.append([float(tok) for tok in parts])
            else:
                raise ValueError(
                    f"{path} line {lineno}: cannot parse scenario line {raw.rstrip()!r}"
                )
    for key in ("kind", "bands", "seed", "sigma_epsilon"):
        if key not in header:
            raise ValueError(f"{path}: missing scenario header key {key!r}")
    n = int(header["bands"])
    if len(rows) != n:
        raise ValueError(f"{path}: header says {n} bands but found {len(rows)} rows")
    table = np.asarray(rows, dtype=float)
    params = LineShapeParams(table[:, 0], table[:, 1], table[:, 2], table[:, 3])
    return Scenario(
        kind=header["kind"],
        params=params,
        sigma_epsilon=float(header["sigma_epsilon"]),
        seed=int(header["seed"]),
        grid_min=float(header.get("grid_min", DEFAULT_GRID_MIN)),
        grid_max=float(header.get("grid_max", DEFAULT_GRID_MAX)),
        grid_points=int(header.get("grid_points", DEFAULT_GRID_POINTS)),
    )


def write_spectrum(path, spectrum: Spectrum, comment: str | None = None) -> None:
    """Write a two-column spectrum file (wavenumber, intensity)."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("# wavenumber intensity")
    for nu, y in zip(spectrum.wavenumbers, spectrum.intensities):
        lines.append(f"{float(nu)!r} {float(y)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum(path) -> Spectrum:
    """Parse a two-column spectrum file, ignoring '#' comments."""
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or not all(_is_number(tok) for tok in parts):
                raise ValueError(
                    f"{path} line {lineno}: cannot parse spectrum line {raw.rstrip()!r}"
                )
            rows.append([float(parts[0]), float(parts[1])])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    return Spectrum(table[:, 0], table[:, 1])


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True
