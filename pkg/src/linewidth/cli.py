"""Command-line front end: synthesize, estimate, scan, and validate.

Subcommands:

* ``synth`` draws or loads a band scenario and writes a noisy spectrum.
* ``estimate`` runs the two-stage width estimation on a spectrum file.
* ``sensitivity`` repeats the frequency-domain stage over several
  truncation choices.
* ``validate`` replays a known scenario many times and checks how often
  the reported interval covers the true width.

Every run writes a manifest echoing the command, inputs, and effective
settings, so outputs are traceable. All numeric output uses ``repr``
floats: reruns with the same arguments produce identical files apart
from manifest timestamps.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from linewidth import __version__
from linewidth.fourier import write_curve, write_dataset
from linewidth.gp import IllConditionedError
from linewidth.lineshape import (
    SCENARIO_KINDS,
    NoiseSpec,
    Scenario,
    default_grid,
    read_scenario,
    read_spectrum,
    sample_scenario,
    synth_spectrum,
    true_mean_gamma,
    write_scenario,
    write_spectrum,
)
from linewidth.mcmc import DramConfig, write_chain
from linewidth.pipeline import (
    STAGE1_PARAM_NAMES,
    STAGE2_PARAM_NAMES,
    EstimationFailed,
    PipelineConfig,
    run,
    sensitivity_scan,
    summarize,
)

# Coverage is checked against the raw interval, except when the truth sits
# at or below the reported lower bound while at least 2.5% of the width
# draws were rejected as nonpositive: the rejections then account for the
# posterior mass the one-sided interval cannot reach.
BOUNDARY_REJECTION_FRACTION = 0.025
COVERAGE_THRESHOLD = 0.8

_ESTIMATE_DEFAULTS = {
    "seed": 0,
    "region": None,
    "truncation": 30,
    "realizations": 50,
    "gamma_samples": 5000,
    "chain_length": 50000,
    "burn_in": 25000,
    "curve": False,
    "curve_points": 61,
    "curve_draws": 400,
}

_VALIDATE_DEFAULTS = dict(_ESTIMATE_DEFAULTS, chain_length=10000, burn_in=5000)


@dataclass
class RunManifest:
    """Provenance block written into every report."""

    command: str
    inputs: list
    region: object
    seed: int
    version: str
    started: str
    finished: str


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_region(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"region must look like LOW:HIGH, got {text!r}")
    try:
        low, high = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ValueError(f"region must look like LOW:HIGH, got {text!r}") from exc
    if low == high:
        raise ValueError(f"region endpoints must differ, got {text!r}")
    return (min(low, high), max(low, high))


def _parse_truncations(text: str) -> list[int]:
    """A single count, or an inclusive START:STEP:STOP progression."""
    parts = text.split(":")
    try:
        numbers = [int(p) for p in parts]
    except ValueError as exc:
        raise ValueError(f"truncations must be N or START:STEP:STOP, got {text!r}") from exc
    if len(numbers) == 1:
        return numbers
    if len(numbers) != 3:
        raise ValueError(f"truncations must be N or START:STEP:STOP, got {text!r}")
    start, step, stop = numbers
    if step <= 0 or stop < start:
        raise ValueError(f"need a positive step and START <= STOP, got {text!r}")
    return list(range(start, stop + 1, step))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"cannot interpret {text!r} as true/false")


_CONFIG_CASTERS = {
    "seed": int,
    "region": _parse_region,
    "truncation": int,
    "realizations": int,
    "gamma_samples": int,
    "chain_length": int,
    "burn_in": int,
    "curve": _parse_bool,
    "curve_points": int,
    "curve_draws": int,
}


def _read_config_file(path) -> dict:
    """Flat key-value settings, one pair per line, '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(
                    f"{path} line {lineno}: cannot parse config line {raw.rstrip()!r}"
                )
            key, value = parts
            if key not in _CONFIG_CASTERS:
                raise ValueError(f"{path} line {lineno}: unknown config key {key!r}")
            values[key] = _CONFIG_CASTERS[key](value)
    return values


def _merge_settings(args, defaults: dict) -> dict:
    """Defaults, overridden by a config file, overridden by CLI flags."""
    settings = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        settings.update(_read_config_file(config_path))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _pipeline_config(settings: dict) -> PipelineConfig:
    stage = DramConfig(
        chain_length=settings["chain_length"], burn_in=settings["burn_in"]
    )
    return PipelineConfig(
        realizations=settings["realizations"],
        gamma_samples=settings["gamma_samples"],
        truncation=settings["truncation"],
        region=settings["region"],
        seed=settings["seed"],
        stage1=stage,
        stage2=stage,
        compute_curve=settings["curve"],
        curve_points=settings["curve_points"],
        curve_draws=settings["curve_draws"],
    )


def _settings_block(settings: dict) -> dict:
    block = dict(settings)
    if block["region"] is not None:
        block["region"] = list(block["region"])
    return block


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _ensure_outdir(args):
    import os

    os.makedirs(args.out, exist_ok=True)
    return args.out


# ---------------------------------------------------------------------------
# synth


def _scenario_for_args(args) -> Scenario:
    if args.scenario is not None:
        return read_scenario(args.scenario)
    grid = default_grid() if args.grid is None else _grid_from_text(args.grid)
    return sample_scenario(args.kind, args.bands, args.seed, grid)


def _grid_from_text(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like MIN:MAX:POINTS, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if hi <= lo or n < 8:
        raise ValueError(f"grid needs MIN < MAX and POINTS >= 8, got {text!r}")
    return np.linspace(lo, hi, n)


def _cmd_synth(args) -> int:
    started = _now()
    outdir = _ensure_outdir(args)
    scenario = _scenario_for_args(args)
    noise_seed = args.noise_seed if args.noise_seed is not None else scenario.seed
    spectrum = synth_spectrum(
        scenario.params,
        scenario.grid(),
        NoiseSpec(scenario.sigma_epsilon, noise_seed),
    )
    truth = true_mean_gamma(scenario.params)

    scenario_path = f"{outdir}/scenario.txt"
    spectrum_path = f"{outdir}/spectrum.txt"
    write_scenario(scenario_path, scenario)
    write_spectrum(
        spectrum_path,
        spectrum,
        comment=f"kind={scenario.kind} noise_seed={noise_seed} true_gamma_mean={truth!r}",
    )
    manifest = RunManifest(
        command="synth",
        inputs=[str(args.scenario)] if args.scenario else [],
        region=None,
        seed=scenario.seed,
        version=__version__,
        started=started,
        finished=_now(),
    )
    _write_json(
        f"{outdir}/synth_manifest.json",
        {
            "kind": scenario.kind,
            "bands": scenario.params.n_bands,
            "noise_seed": noise_seed,
            "true_gamma_mean": truth,
            "manifest": asdict(manifest),
        },
    )
    print(f"true gamma_mean: {truth!r}")
    print(f"wrote {scenario_path}")
    print(f"wrote {spectrum_path}")
    return 0


# ---------------------------------------------------------------------------
# estimate


def _cmd_estimate(args) -> int:
    started = _now()
    settings = _merge_settings(args, _ESTIMATE_DEFAULTS)
    outdir = _ensure_outdir(args)
    spectrum = read_spectrum(args.spectrum)
    config = _pipeline_config(settings)

    _progress(
        f"estimating: {config.stage1.chain_length}-step chains, "
        f"{config.realizations} realizations, truncation {config.truncation}"
    )
    result = run(spectrum, config)
    summary = summarize(result.posterior)

    manifest = RunManifest(
        command="estimate",
        inputs=[args.spectrum],
        region=list(settings["region"]) if settings["region"] else None,
        seed=settings["seed"],
        version=__version__,
        started=started,
        finished=_now(),
    )
    report = {
        "gamma_mean": summary["gamma_mean"],
        "gamma_ci95": summary["gamma_ci95"],
        "rejected": summary["rejected"],
        "config": _settings_block(settings),
        "manifest": asdict(manifest),
    }
    _write_json(f"{outdir}/report.json", report)

    with open(f"{outdir}/gamma_samples.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# accepted {result.posterior.n_accepted} rejected {result.posterior.rejected}\n")
        for value in result.posterior.samples:
            fh.write(f"{float(value)!r}\n")
    write_chain(f"{outdir}/chain_stage1.txt", result.stage1, STAGE1_PARAM_NAMES)
    write_chain(f"{outdir}/chain_stage2.txt", result.stage2, STAGE2_PARAM_NAMES)
    write_dataset(f"{outdir}/fourier_dataset.txt", result.dataset)
    if result.curve is not None:
        write_curve(f"{outdir}/gamma_curve.txt", result.curve)

    lo, hi = summary["gamma_ci95"]
    total = result.posterior.n_accepted + result.posterior.rejected
    print(f"gamma_mean: {summary['gamma_mean']!r}")
    print(f"gamma_ci95: [{lo!r}, {hi!r}]")
    print(f"rejected: {summary['rejected']} of {total} draws")
    print(f"wrote {outdir}/report.json")
    return 0


# ---------------------------------------------------------------------------
# sensitivity


def _cmd_sensitivity(args) -> int:
    started = _now()
    settings = _merge_settings(args, _ESTIMATE_DEFAULTS)
    outdir = _ensure_outdir(args)
    spectrum = read_spectrum(args.spectrum)
    config = _pipeline_config(dict(settings, truncation=max(args.truncations)))

    _progress(f"scanning truncations {args.truncations}")
    rows = sensitivity_scan(spectrum, config, args.truncations)

    tsv_path = f"{outdir}/sensitivity.tsv"
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("truncation\tgamma_mean\tlower\tupper\terror\n")
        for row in rows:
            error = row.error if row.error is not None else ""
            fh.write(
                f"{row.truncation}\t{row.gamma_mean!r}\t{row.lower!r}\t{row.upper!r}\t{error}\n"
            )
    manifest = RunManifest(
        command="sensitivity",
        inputs=[args.spectrum],
        region=list(settings["region"]) if settings["region"] else None,
        seed=settings["seed"],
        version=__version__,
        started=started,
        finished=_now(),
    )
    _write_json(
        f"{outdir}/sensitivity_manifest.json",
        {
            "truncations": args.truncations,
            "config": _settings_block(settings),
            "manifest": asdict(manifest),
        },
    )
    stub_path = f"{outdir}/plot_sensitivity.py"
    _write_plot_stub(stub_path)
    plotted = _plot_sensitivity(rows, f"{outdir}/sensitivity.png")

    for row in rows:
        if row.error is None:
            print(
                f"P={row.truncation}: gamma_mean={row.gamma_mean!r} "
                f"ci95=[{row.lower!r}, {row.upper!r}]"
            )
        else:
            print(f"P={row.truncation}: failed ({row.error})")
    print(f"wrote {tsv_path}")
    print(f"wrote {stub_path}")
    if plotted:
        print(f"wrote {outdir}/sensitivity.png")
    return 0


_PLOT_STUB = '''\
"""Plot the truncation sensitivity table in this directory.

Usage: python plot_sensitivity.py [sensitivity.tsv [out.png]]
Needs matplotlib, which the estimation tool itself does not.
"""

import csv
import sys

import matplotlib.pyplot as plt


def main(argv):
    table = argv[1] if len(argv) > 1 else "sensitivity.tsv"
    out = argv[2] if len(argv) > 2 else "sensitivity.png"
    ps, means, lows, highs = [], [], [], []
    with open(table, encoding="utf-8") as fh:
        for row in csv.DictReader(fh, delimiter="\\t"):
            if row["error"]:
                continue
            ps.append(int(row["truncation"]))
            mean = float(row["gamma_mean"])
            means.append(mean)
            lows.append(mean - float(row["lower"]))
            highs.append(float(row["upper"]) - mean)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ps, means, yerr=[lows, highs], fmt="o", capsize=4)
    ax.set_xlabel("retained frequency bins")
    ax.set_ylabel("mean line width")
    ax.set_title("truncation sensitivity")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(sys.argv)
'''


def _write_plot_stub(path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_PLOT_STUB)


def _plot_sensitivity(rows, path) -> bool:
    good = [row for row in rows if row.error is None and math.isfinite(row.gamma_mean)]
    if not good:
        return False
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return False
    ps = [row.truncation for row in good]
    means = np.array([row.gamma_mean for row in good])
    lows = means - np.array([row.lower for row in good])
    highs = np.array([row.upper for row in good]) - means
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ps, means, yerr=[lows, highs], fmt="o", capsize=4)
    ax.set_xlabel("retained frequency bins")
    ax.set_ylabel("mean line width")
    ax.set_title("truncation sensitivity")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


# ---------------------------------------------------------------------------
# validate


def _load_reference_scenario(kind: str) -> Scenario:
    resource = resources.files("linewidth").joinpath("scenarios", f"{kind}.txt")
    with resources.as_file(resource) as path:
        return read_scenario(path)


def interval_covers(truth: float, lower: float, upper: float, rejected_fraction: float) -> bool:
    """Coverage check that honors the positivity boundary.

    Rejected draws are posterior mass at or below zero width; when the
    truth sits at or below the interval while enough mass was rejected,
    the untruncated interval would have reached it.
    """
    if lower <= truth <= upper:
        return True
    return truth <= lower and rejected_fraction >= BOUNDARY_REJECTION_FRACTION


def run_validation(scenario: Scenario, repeats: int, settings: dict, progress=None) -> dict:
    """Repeat estimation on fresh noise draws and score interval coverage."""
    truth = true_mean_gamma(scenario.params)
    grid = scenario.grid()
    repeat_seeds = np.random.SeedSequence(settings["seed"]).spawn(repeats)
    rows = []
    covered_count = 0
    for index, repeat_seed in enumerate(repeat_seeds):
        noise_child, pipe_child = repeat_seed.spawn(2)
        noise_seed = int(noise_child.generate_state(1)[0])
        pipe_seed = int(pipe_child.generate_state(1)[0])
        spectrum = synth_spectrum(
            scenario.params, grid, NoiseSpec(scenario.sigma_epsilon, noise_seed)
        )
        config = _pipeline_config(dict(settings, seed=pipe_seed))
        row = {"repeat": index, "noise_seed": noise_seed, "pipeline_seed": pipe_seed}
        try:
            result = run(spectrum, config)
            summary = summarize(result.posterior)
        except (EstimationFailed, IllConditionedError, ValueError) as exc:
            row.update(covered=False, error=str(exc))
        else:
            lower, upper = summary["gamma_ci95"]
            fraction = result.posterior.rejected_fraction
            covers = interval_covers(truth, lower, upper, fraction)
            row.update(
                gamma_mean=summary["gamma_mean"],
                lower=lower,
                upper=upper,
                rejected_fraction=fraction,
                covered=covers,
            )
        covered_count += bool(row["covered"])
        rows.append(row)
        if progress is not None:
            progress(f"repeat {index + 1}/{repeats}: covered={row['covered']}")
    needed = math.ceil(COVERAGE_THRESHOLD * repeats)
    return {
        "kind": scenario.kind,
        "true_gamma": truth,
        "repeats": repeats,
        "covered": covered_count,
        "needed": needed,
        "passed": covered_count >= needed,
        "rows": rows,
    }


def _cmd_validate(args) -> int:
    started = _now()
    settings = _merge_settings(args, _VALIDATE_DEFAULTS)
    outdir = _ensure_outdir(args)
    if args.scenario is not None:
        scenario = read_scenario(args.scenario)
        source = str(args.scenario)
    else:
        scenario = _load_reference_scenario(args.kind)
        source = f"reference:{args.kind}"

    _progress(
        f"validating {scenario.kind} scenario over {args.repeats} repeats "
        f"({settings['chain_length']}-step chains)"
    )
    report = run_validation(scenario, args.repeats, settings, progress=_progress)
    manifest = RunManifest(
        command="validate",
        inputs=[source],
        region=list(settings["region"]) if settings["region"] else None,
        seed=settings["seed"],
        version=__version__,
        started=started,
        finished=_now(),
    )
    report["config"] = _settings_block(settings)
    report["manifest"] = asdict(manifest)
    _write_json(f"{outdir}/validate_report.json", report)

    verdict = "PASS" if report["passed"] else "FAIL"
    print(
        f"coverage {report['covered']}/{report['repeats']} "
        f"(need {report['needed']}): {verdict}"
    )
    print(f"true gamma_mean: {report['true_gamma']!r}")
    print(f"wrote {outdir}/validate_report.json")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common_estimation_flags(parser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    parser.add_argument(
        "--region",
        type=_parse_region,
        default=None,
        metavar="LOW:HIGH",
        help="restrict analysis to a wavenumber window",
    )
    parser.add_argument(
        "--realizations", type=int, default=None, help="spectrum realizations to draw"
    )
    parser.add_argument(
        "--gamma-samples",
        dest="gamma_samples",
        type=int,
        default=None,
        help="width draws from the frequency-domain fit",
    )
    parser.add_argument(
        "--chain-length",
        dest="chain_length",
        type=int,
        default=None,
        help="iterations per sampler chain (both stages)",
    )
    parser.add_argument(
        "--burn-in",
        dest="burn_in",
        type=int,
        default=None,
        help="iterations discarded from each chain",
    )
    parser.add_argument(
        "--config",
        default=None,
        metavar="FILE",
        help="key-value settings file; command-line flags win",
    )
    parser.add_argument("--out", default=".", help="output directory (default: .)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linewidth",
        description="Estimate the area-weighted mean Lorentzian line width of a spectrum.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthesize a noisy band spectrum")
    synth.add_argument("--kind", choices=SCENARIO_KINDS, default="lorentzian")
    synth.add_argument("--bands", type=int, default=5, help="number of bands (default 5)")
    synth.add_argument("--seed", type=int, default=0, help="scenario seed (default 0)")
    synth.add_argument(
        "--scenario", default=None, metavar="FILE", help="reuse an existing scenario file"
    )
    synth.add_argument(
        "--noise-seed",
        dest="noise_seed",
        type=int,
        default=None,
        help="noise seed (default: the scenario seed)",
    )
    synth.add_argument(
        "--grid", default=None, metavar="MIN:MAX:POINTS", help="synthesis grid override"
    )
    synth.add_argument("--out", default=".", help="output directory (default: .)")
    synth.set_defaults(handler=_cmd_synth)

    estimate = sub.add_parser("estimate", help="estimate the mean line width")
    estimate.add_argument("spectrum", help="two-column spectrum file")
    estimate.add_argument(
        "--P",
        "--truncation",
        dest="truncation",
        type=int,
        default=None,
        help="retained low-frequency bins (default 30)",
    )
    estimate.add_argument(
        "--curve",
        dest="curve",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="also sample the width estimate along the frequency axis",
    )
    estimate.add_argument("--curve-points", dest="curve_points", type=int, default=None)
    estimate.add_argument("--curve-draws", dest="curve_draws", type=int, default=None)
    _add_common_estimation_flags(estimate)
    estimate.set_defaults(handler=_cmd_estimate)

    sensitivity = sub.add_parser(
        "sensitivity", help="re-estimate over several truncation choices"
    )
    sensitivity.add_argument("spectrum", help="two-column spectrum file")
    sensitivity.add_argument(
        "--P",
        "--truncations",
        dest="truncations",
        type=_parse_truncations,
        required=True,
        metavar="N|START:STEP:STOP",
        help="truncations to scan",
    )
    _add_common_estimation_flags(sensitivity)
    sensitivity.set_defaults(handler=_cmd_sensitivity)

    validate = sub.add_parser(
        "validate", help="check interval coverage on a known scenario"
    )
    which = validate.add_mutually_exclusive_group()
    which.add_argument("--kind", choices=SCENARIO_KINDS, default="lorentzian")
    which.add_argument("--scenario", default=None, metavar="FILE")
    validate.add_argument("--repeats", type=int, default=10)
    validate.add_argument(
        "--P",
        "--truncation",
        dest="truncation",
        type=int,
        default=None,
        help="retained low-frequency bins (default 30)",
    )
    _add_common_estimation_flags(validate)
    validate.set_defaults(handler=_cmd_validate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, EstimationFailed, IllConditionedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
