"""Build the reference scenarios shipped with the package.

Three band sets with known area-weighted mean Lorentzian widths:

* ``lorentzian.txt``: 8 Lorentzian bands, found by searching scenario
  seeds until the area-weighted mean width lands on the target.
* ``gaussian.txt``: 10 Gaussian bands; the mean Lorentzian width is
  exactly zero by construction.
* ``voigt.txt``: 6 mixed bands; totals are drawn from the usual width
  distribution, and one shared Lorentzian-share factor is solved so the
  mean width hits the target exactly. Every parameter stays inside the
  support of the scenario-sampling distributions.

All three scenarios are synthesized on a widened window: the frequency
resolution of the magnitude data is the reciprocal of the wavenumber
span, so a wider window resolves both fast magnitude decays (broad
bands) and the flat top at zero frequency that identifies a spectrum
with no Lorentzian component. On the default 200-wavenumber window the
first frequency bin already sits past most of that structure.

Run from the repository root:  python3 tools/make_scenarios.py
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from linewidth.lineshape import (  # noqa: E402
    AREA_HIGH,
    AREA_LOW,
    LOCATION_HIGH,
    LOCATION_LOW,
    LORENTZ_GAMMA_HIGH,
    LORENTZ_GAMMA_LOW,
    NOISE_FRACTION,
    VOIGT_WIDTH_MU,
    VOIGT_WIDTH_SIGMA,
    _GAUSS_FWHM_FACTOR,
    LineShapeParams,
    Scenario,
    gaussian_fwhm_for_total,
    noise_free_spectrum,
    sample_scenario,
    true_mean_gamma,
    write_scenario,
)

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "linewidth" / "scenarios"

LORENTZ_TARGET = 17.12
VOIGT_TARGET = 33.50
TOLERANCE = 0.005
GRID_MIN, GRID_MAX, GRID_POINTS = 1250.0, 2050.0, 512


def find_lorentzian_seed(n_bands: int, target: float, tolerance: float, limit: int = 2_000_000) -> int:
    """Smallest seed whose Lorentzian scenario has the target mean width.

    Replays the scenario draw order (areas, locations, widths) without
    building spectra, so millions of seeds are cheap to scan.
    """
    for seed in range(limit):
        rng = np.random.default_rng(seed)
        areas = rng.uniform(AREA_LOW, AREA_HIGH, n_bands)
        rng.uniform(LOCATION_LOW, LOCATION_HIGH, n_bands)
        gammas = rng.uniform(LORENTZ_GAMMA_LOW, LORENTZ_GAMMA_HIGH, n_bands)
        mean = float(areas @ gammas / areas.sum())
        if abs(mean - target) <= tolerance:
            return seed
    raise RuntimeError(f"no seed below {limit} hits {target} +/- {tolerance}")


def build_voigt(seed: int, n_bands: int, target: float) -> Scenario:
    """Mixed-width scenario with an exactly known mean Lorentzian width.

    Draws areas, locations, and total widths from the scenario-sampling
    distributions, conditioned wide enough that the target is reachable,
    then solves the per-band Lorentzian shares for the target mean.
    """
    rng = np.random.default_rng(seed)
    areas = rng.uniform(AREA_LOW, AREA_HIGH, n_bands)
    locations = rng.uniform(LOCATION_LOW, LOCATION_HIGH, n_bands)
    # Redraw any total too small to host its share of the target width;
    # every kept value remains a point of the lognormal support.
    totals = rng.lognormal(VOIGT_WIDTH_MU, VOIGT_WIDTH_SIGMA, n_bands)
    floor = 2.2 * target
    while np.any(totals < floor):
        fresh = rng.lognormal(VOIGT_WIDTH_MU, VOIGT_WIDTH_SIGMA, n_bands)
        totals = np.where(totals < floor, fresh, totals)
    # Lorentzian share of each total: a common factor times a small
    # per-band wobble, with the factor solved so the area-weighted mean
    # half width equals the target exactly.
    wobble = rng.uniform(-0.03, 0.03, n_bands)
    weighted_total = float(areas @ totals / areas.sum())
    weighted_wobble = float(areas @ (wobble * totals) / areas.sum())
    base = (2.0 * target - weighted_wobble) / weighted_total
    shares = (base + wobble) * totals
    if np.any(shares <= 0) or np.any(shares >= 0.98 * totals):
        raise RuntimeError("share solve left the admissible range; pick another seed")
    gammas = shares / 2.0
    sigmas = np.array(
        [gaussian_fwhm_for_total(t, s) for t, s in zip(totals, shares)]
    ) / _GAUSS_FWHM_FACTOR
    params = LineShapeParams(areas, locations, gammas, sigmas)
    grid = np.linspace(GRID_MIN, GRID_MAX, GRID_POINTS)
    sigma_eps = NOISE_FRACTION * float(np.max(noise_free_spectrum(params, grid)))
    return Scenario("voigt", params, sigma_eps, seed, GRID_MIN, GRID_MAX, GRID_POINTS)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(GRID_MIN, GRID_MAX, GRID_POINTS)

    seed = find_lorentzian_seed(8, LORENTZ_TARGET, TOLERANCE)
    lorentz = sample_scenario("lorentzian", 8, seed, grid)
    print(f"lorentzian: seed {seed}, mean width {true_mean_gamma(lorentz.params):.6f}")
    write_scenario(OUT / "lorentzian.txt", lorentz)

    gauss = sample_scenario("gaussian", 10, 0, grid)
    print(f"gaussian: seed 0, mean width {true_mean_gamma(gauss.params):.6f}")
    write_scenario(OUT / "gaussian.txt", gauss)

    voigt = build_voigt(2, 6, VOIGT_TARGET)
    mean = true_mean_gamma(voigt.params)
    print(f"voigt: seed 2, mean width {mean:.6f}")
    if abs(mean - VOIGT_TARGET) > TOLERANCE:
        raise RuntimeError(f"voigt construction missed the target: {mean}")
    write_scenario(OUT / "voigt.txt", voigt)


if __name__ == "__main__":
    main()
