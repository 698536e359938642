"""Dry-run of every acceptance computation, printing margins.

Runs, in order: the single-band calibration case, the three scenario
validations (ten repeats each, identical to the shipped test settings),
and the truncation scan on the Lorentzian scenario. Prints one summary
line per item so the tolerances in the acceptance tests can be frozen
against real numbers.
"""

import json
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from linewidth import cli, lineshape, pipeline  # noqa: E402
from linewidth.mcmc import DramConfig  # noqa: E402

SCENARIOS = pathlib.Path(__file__).resolve().parents[1] / "src" / "linewidth" / "scenarios"


def single_band_case() -> None:
    grid = np.linspace(1250.0, 2050.0, 512)
    params = lineshape.LineShapeParams([10.0], [1650.0], [10.0], [0.0])
    clean = lineshape.noise_free_spectrum(params, grid)
    sigma_eps = 0.01 * float(clean.max())
    spectrum = lineshape.synth_spectrum(params, grid, lineshape.NoiseSpec(sigma_eps, 42))
    config = pipeline.PipelineConfig(
        realizations=30,
        gamma_samples=2000,
        truncation=30,
        seed=11,
        stage1=DramConfig(10000, 5000),
        stage2=DramConfig(10000, 5000),
    )
    t0 = time.time()
    result = pipeline.run(spectrum, config)
    post = result.posterior
    lo, hi = post.interval
    rel = abs(post.mean - 10.0) / 10.0
    print(
        "single-band: %.0fs mean=%.4f rel_err=%.2f%% ci=[%.3f, %.3f] covers=%s rejected=%d"
        % (time.time() - t0, post.mean, 100 * rel, lo, hi, lo <= 10.0 <= hi, post.rejected),
        flush=True,
    )


def validations() -> None:
    for kind in ("lorentzian", "gaussian", "voigt"):
        scenario_path = SCENARIOS / f"{kind}.txt"
        scenario = lineshape.read_scenario(scenario_path)
        t0 = time.time()
        report = cli.run_validation(
            scenario, repeats=10, settings=dict(cli._VALIDATE_DEFAULTS), progress=None
        )
        print(
            "%s: covered %d/10 passed=%s true=%.4f elapsed=%.0fs"
            % (kind, report["covered"], report["passed"], report["true_gamma"], time.time() - t0),
            flush=True,
        )
        for row in report["rows"]:
            print("    %s" % json.dumps(row), flush=True)


def truncation_scan() -> None:
    scenario = lineshape.read_scenario(SCENARIOS / "lorentzian.txt")
    spectrum = lineshape.synth_spectrum(
        scenario.params, scenario.grid(), lineshape.NoiseSpec(scenario.sigma_epsilon, scenario.seed)
    )
    config = pipeline.desk_config(seed=0)
    t0 = time.time()
    rows = pipeline.sensitivity_scan(spectrum, config, (20, 30, 50, 100))
    print("truncation scan: %.0fs" % (time.time() - t0), flush=True)
    means = []
    for row in rows:
        print(
            "    P=%d mean=%.4f ci=[%.4f, %.4f] error=%s"
            % (row.truncation, row.gamma_mean, row.lower, row.upper, row.error),
            flush=True,
        )
        means.append(row.gamma_mean)
    means = np.asarray(means)
    if np.all(np.isfinite(means)):
        spread = (means.max() - means.min()) / means.min()
        print("    pairwise max spread: %.1f%%" % (100 * spread), flush=True)


if __name__ == "__main__":
    stages = sys.argv[1:] or ["single", "scan", "validate"]
    if "single" in stages:
        single_band_case()
    if "scan" in stages:
        truncation_scan()
    if "validate" in stages:
        validations()
