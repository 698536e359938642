"""Two-stage posterior estimation of the mean Lorentzian line width.

Stage 1 fits a constant-mean GP to the spectrum by adaptive MCMC and
draws noisy realizations from it. The realizations are Fourier
transformed and truncated to the lowest frequencies, and stage 2 fits an
exponential-mean GP to the stacked magnitudes. Joint draws of the
magnitude and its derivative at zero frequency convert to mean-width
samples; draws with a nonpositive magnitude or a positive derivative
carry no valid width and are counted as rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from linewidth.fourier import (
    FourierDataset,
    GammaCurve,
    build_dataset,
    gamma_curve,
)
from linewidth.gp import (
    GpFit,
    IllConditionedError,
    Stage1Hyper,
    Stage2Hyper,
    joint_value_derivative_prediction,
    jittered_cholesky,
    log_likelihood,
    log_likelihood_repeated,
    sample_realization,
)
from linewidth.lineshape import Spectrum
from linewidth.mcmc import (
    Chain,
    DramConfig,
    chain_effective_sample_size,
    dram_run,
    log_prior,
    stage1_priors,
    stage2_priors,
    thin_and_select,
)

STAGE1_PARAM_NAMES = ("alpha", "sigma_s", "phi", "sigma_eps")
STAGE2_PARAM_NAMES = ("beta0", "beta1", "sigma_c", "lam", "sigma_z")

_EXP_ARG_LIMIT = 700.0  # largest exponent before exp overflows a double


class EstimationFailed(RuntimeError):
    """The width posterior could not be formed from the sampled draws."""


def _default_stage_config() -> DramConfig:
    return DramConfig(chain_length=50000, burn_in=25000)


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for a full estimation run.

    ``realizations`` is the number of spectrum realizations drawn from the
    stage-1 fit, ``gamma_samples`` the number of width draws attempted
    from the stage-2 fit, and ``truncation`` the number of low-frequency
    bins retained. ``region`` optionally restricts the analysis to a
    wavenumber window before anything else happens. The two sampler
    configurations are templates: their seeds and initial proposal
    covariances are replaced with run-derived values.
    """

    realizations: int = 50
    gamma_samples: int = 5000
    truncation: int = 30
    region: tuple[float, float] | None = None
    seed: int = 0
    stage1: DramConfig = field(default_factory=_default_stage_config)
    stage2: DramConfig = field(default_factory=_default_stage_config)
    compute_curve: bool = False
    curve_points: int = 61
    curve_draws: int = 400

    def __post_init__(self):
        if self.realizations < 2:
            raise ValueError(f"realizations must be >= 2, got {self.realizations}")
        if self.gamma_samples < 100:
            raise ValueError(f"gamma_samples must be >= 100, got {self.gamma_samples}")
        if self.truncation < 4:
            raise ValueError(f"truncation must be >= 4, got {self.truncation}")
        if self.curve_points < 2 or self.curve_draws < 10:
            raise ValueError("need curve_points >= 2 and curve_draws >= 10")
        if self.region is not None and len(self.region) != 2:
            raise ValueError("region must be a (low, high) pair")


def desk_config(**overrides) -> PipelineConfig:
    """A configuration with shorter chains for interactive-scale runs."""
    short = DramConfig(chain_length=10000, burn_in=5000)
    settings = {"stage1": short, "stage2": short}
    settings.update(overrides)
    return PipelineConfig(**settings)


@dataclass(frozen=True)
class GammaPosterior:
    """Accepted mean-width samples plus rejection and mixing diagnostics.

    ``rejected`` counts draws discarded because the sampled zero-frequency
    magnitude was nonpositive or the implied width negative.
    ``stage2_ess`` is the smallest per-parameter effective sample size of
    the stage-2 chain.
    """

    samples: np.ndarray
    rejected: int
    stage2_ess: float

    def __post_init__(self):
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("need at least one accepted sample")
        if self.rejected < 0:
            raise ValueError("rejected count must be nonnegative")

    @property
    def n_accepted(self) -> int:
        return self.samples.size

    @property
    def rejected_fraction(self) -> float:
        return self.rejected / (self.rejected + self.samples.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def interval(self) -> tuple[float, float]:
        """Central 95% credible interval of the accepted samples."""
        lo, hi = np.quantile(self.samples, [0.025, 0.975])
        return float(lo), float(hi)


@dataclass(frozen=True)
class PipelineResult:
    """Everything a run produced, for reporting and export."""

    posterior: GammaPosterior
    stage1: Chain
    stage2: Chain
    dataset: FourierDataset
    spectrum: Spectrum
    config: PipelineConfig
    curve: GammaCurve | None = None


def _initial_proposal_cov(start: np.ndarray) -> np.ndarray:
    """Diagonal proposal covariance scaled to the starting point."""
    std = 0.1 * np.abs(start) + 1e-8
    return np.diag(std * std)


def _stage_seeds(config: PipelineConfig) -> list[np.random.SeedSequence]:
    """Fixed stream layout; appending new uses must not reorder old ones."""
    return np.random.SeedSequence(config.seed).spawn(8)


def _run_stage1(spectrum: Spectrum, stage_cfg: DramConfig, seed) -> Chain:
    nu = spectrum.wavenumbers
    values = spectrum.intensities
    priors = stage1_priors(nu)
    scale = float(np.std(values))
    if scale <= 0:
        scale = max(abs(float(np.mean(values))), 1.0)
    level = float(np.mean(values))
    if level <= 0:
        level = 0.1 * scale
    span = float(nu[-1] - nu[0])
    start = np.array([level, scale, span / 10.0, 0.05 * scale])

    def target(theta):
        bound = log_prior(theta, priors)
        if bound == -math.inf:
            return bound
        try:
            return bound + log_likelihood(nu, values, Stage1Hyper.from_vector(theta))
        except IllConditionedError:
            return -math.inf

    cfg = replace(stage_cfg, initial_cov=_initial_proposal_cov(start), seed=seed)
    return dram_run(target, start, cfg)


def _draw_realizations(
    spectrum: Spectrum, chain: Chain, count: int, select_seed, realization_seed
) -> np.ndarray:
    """Sample ``count`` noisy spectrum realizations from the stage-1 posterior."""
    nu = spectrum.wavenumbers
    values = spectrum.intensities
    hypers = thin_and_select(chain, count, np.random.default_rng(select_seed))
    child_seeds = realization_seed.spawn(count)
    fits: dict[bytes, GpFit] = {}
    out = np.empty((count, nu.size))
    for j in range(count):
        key = hypers[j].tobytes()
        try:
            fit = fits.get(key)
            if fit is None:
                fit = GpFit.fit(nu, values, Stage1Hyper.from_vector(hypers[j]))
                fits[key] = fit
            out[j] = sample_realization(fit, nu, np.random.default_rng(child_seeds[j]))
        except IllConditionedError as exc:
            raise IllConditionedError(
                f"stage 1, realization {j}: {exc.message}", exc.attempted_jitter
            ) from exc
    return out


def _stage2_start(dataset: FourierDataset) -> np.ndarray:
    mags = dataset.magnitudes
    zbar = mags.mean(axis=0)
    max_mag = float(np.max(mags))
    level = float(zbar[0]) if zbar[0] > 0 else 0.1 * max_mag
    m = min(5, zbar.size)
    decay = float(np.polyfit(dataset.xi[:m], np.log(np.maximum(zbar[:m], 1e-300)), 1)[0])
    spread = float(np.std(mags))
    if spread <= 0:
        spread = 0.1 * max_mag
    return np.array([level, decay, spread, float(dataset.xi[-1]) / 3.0, 0.01 * max_mag])


def _run_stage2(dataset: FourierDataset, stage_cfg: DramConfig, seed) -> Chain:
    xi = dataset.xi
    stacked = dataset.stacked_magnitudes
    repeats = dataset.n_realizations
    priors = stage2_priors(float(np.max(dataset.magnitudes)), float(xi[-1]))
    xi_max = float(xi[-1])
    start = _stage2_start(dataset)

    def target(theta):
        bound = log_prior(theta, priors)
        if bound == -math.inf:
            return bound
        if theta[1] * xi_max > _EXP_ARG_LIMIT:
            return -math.inf
        try:
            hyper = Stage2Hyper.from_vector(theta)
            return bound + log_likelihood_repeated(xi, stacked, repeats, hyper)
        except IllConditionedError:
            return -math.inf

    cfg = replace(stage_cfg, initial_cov=_initial_proposal_cov(start), seed=seed)
    return dram_run(target, start, cfg)


def _zero_frequency_draws(
    dataset: FourierDataset, chain: Chain, count: int, select_seed, draw_seed
) -> tuple[np.ndarray, int]:
    """Draw widths from the joint (magnitude, derivative) law at zero frequency.

    Returns the accepted width samples and the number of rejected draws.
    """
    xi = dataset.xi
    stacked = dataset.stacked_magnitudes
    repeats = dataset.n_realizations
    hypers = thin_and_select(chain, count, np.random.default_rng(select_seed))
    rng = np.random.default_rng(draw_seed)
    cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
    accepted = []
    rejected = 0
    origin = np.array([0.0])
    for i, theta in enumerate(hypers):
        key = theta.tobytes()
        entry = cache.get(key)
        if entry is None:
            try:
                hyper = Stage2Hyper.from_vector(theta)
                fit = GpFit.fit_repeated(xi, stacked, repeats, hyper)
                pred = joint_value_derivative_prediction(fit, origin)
                factor, _ = jittered_cholesky(pred.cov)
            except IllConditionedError as exc:
                raise IllConditionedError(
                    f"stage 2, width draw {i}: {exc.message}", exc.attempted_jitter
                ) from exc
            center = np.array([pred.value_mean[0], pred.derivative_mean[0]])
            entry = (center, factor)
            cache[key] = entry
        center, factor = entry
        value, slope = center + factor @ rng.standard_normal(2)
        if value <= 0 or slope > 0:
            rejected += 1
            continue
        accepted.append(-slope / (2.0 * math.pi * value))
    return np.asarray(accepted), rejected


def _curve_from_chain(
    dataset: FourierDataset, chain: Chain, points: int, draws: int, seed
) -> GammaCurve:
    """Pointwise width curve over the retained frequency range."""
    xi = dataset.xi
    stacked = dataset.stacked_magnitudes
    repeats = dataset.n_realizations
    grid = np.linspace(0.0, float(xi[-1]), points)
    rng = np.random.default_rng(seed)
    hypers = thin_and_select(chain, draws, rng)
    cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
    values = np.empty((draws, points))
    derivs = np.empty((draws, points))
    for s, theta in enumerate(hypers):
        key = theta.tobytes()
        entry = cache.get(key)
        if entry is None:
            try:
                hyper = Stage2Hyper.from_vector(theta)
                fit = GpFit.fit_repeated(xi, stacked, repeats, hyper)
                pred = joint_value_derivative_prediction(fit, grid)
                factor, _ = jittered_cholesky(pred.cov)
            except IllConditionedError as exc:
                raise IllConditionedError(
                    f"stage 2, curve draw {s}: {exc.message}", exc.attempted_jitter
                ) from exc
            center = np.concatenate([pred.value_mean, pred.derivative_mean])
            entry = (center, factor)
            cache[key] = entry
        center, factor = entry
        draw = center + factor @ rng.standard_normal(2 * points)
        values[s] = draw[:points]
        derivs[s] = draw[points:]
    return gamma_curve(grid, values, derivs)


def run(spectrum: Spectrum, config: PipelineConfig | None = None) -> PipelineResult:
    """Estimate the mean Lorentzian line width of a spectrum.

    Deterministic given the spectrum and configuration: every random
    stream derives from ``config.seed``.
    """
    if config is None:
        config = PipelineConfig()
    if config.region is not None:
        spectrum = spectrum.crop(*config.region)
    if config.truncation > spectrum.n_points:
        raise ValueError(
            f"truncation {config.truncation} exceeds the {spectrum.n_points}-point grid"
        )
    seeds = _stage_seeds(config)

    chain1 = _run_stage1(spectrum, config.stage1, seeds[0])
    realizations = _draw_realizations(
        spectrum, chain1, config.realizations, seeds[1], seeds[2]
    )
    dataset = build_dataset(realizations, spectrum.delta_nu, config.truncation)

    chain2 = _run_stage2(dataset, config.stage2, seeds[3])
    samples, rejected = _zero_frequency_draws(
        dataset, chain2, config.gamma_samples, seeds[4], seeds[5]
    )
    if samples.size == 0:
        raise EstimationFailed(
            f"all {config.gamma_samples} width draws were rejected; "
            "the spectrum carries no evidence of a positive Lorentzian width"
        )
    posterior = GammaPosterior(samples, rejected, chain_effective_sample_size(chain2))

    curve = None
    if config.compute_curve:
        curve = _curve_from_chain(
            dataset, chain2, config.curve_points, config.curve_draws, seeds[6]
        )
    return PipelineResult(posterior, chain1, chain2, dataset, spectrum, config, curve)


def summarize(posterior: GammaPosterior) -> dict:
    """Headline numbers of a width posterior, as a JSON-ready dictionary.

    Requires at least 100 accepted samples so the reported quantiles mean
    something.
    """
    if posterior.n_accepted < 100:
        raise EstimationFailed(
            f"only {posterior.n_accepted} accepted width samples "
            f"({posterior.rejected} rejected); too few to summarize"
        )
    lo, hi = posterior.interval
    return {
        "gamma_mean": posterior.mean,
        "gamma_ci95": [lo, hi],
        "accepted": posterior.n_accepted,
        "rejected": posterior.rejected,
        "stage2_ess": posterior.stage2_ess,
    }


@dataclass(frozen=True)
class SensitivityRow:
    """Width posterior summary at one truncation, or the failure message."""

    truncation: int
    gamma_mean: float
    lower: float
    upper: float
    error: str | None = None


def sensitivity_scan(
    spectrum: Spectrum, config: PipelineConfig, truncations
) -> list[SensitivityRow]:
    """Re-estimate the width with varying numbers of retained frequencies.

    Stage 1 runs once (identically to :func:`run` with the same seed); the
    frequency-domain stage repeats per truncation with independent
    sampler streams. A failed truncation yields a row carrying the error
    message instead of aborting the scan.
    """
    truncations = [int(p) for p in truncations]
    if not truncations:
        raise ValueError("need at least one truncation")
    if config.region is not None:
        spectrum = spectrum.crop(*config.region)
    if max(truncations) > spectrum.n_points:
        raise ValueError(
            f"truncation {max(truncations)} exceeds the {spectrum.n_points}-point grid"
        )
    if min(truncations) < 4:
        raise ValueError("truncations must be >= 4")
    seeds = _stage_seeds(config)

    chain1 = _run_stage1(spectrum, config.stage1, seeds[0])
    realizations = _draw_realizations(
        spectrum, chain1, config.realizations, seeds[1], seeds[2]
    )
    full = build_dataset(realizations, spectrum.delta_nu, spectrum.n_points)

    rows = []
    scan_seeds = seeds[7].spawn(len(truncations))
    for p, scan_seed in zip(truncations, scan_seeds):
        chain_seed, select_seed, draw_seed = scan_seed.spawn(3)
        dataset = FourierDataset(
            full.xi[:p], full.magnitudes[:, :p], full.delta_nu, full.n_points
        )
        try:
            chain2 = _run_stage2(dataset, config.stage2, chain_seed)
            samples, rejected = _zero_frequency_draws(
                dataset, chain2, config.gamma_samples, select_seed, draw_seed
            )
            if samples.size == 0:
                raise EstimationFailed("all width draws were rejected")
            posterior = GammaPosterior(
                samples, rejected, chain_effective_sample_size(chain2)
            )
        except (EstimationFailed, IllConditionedError, ValueError) as exc:
            rows.append(SensitivityRow(p, math.nan, math.nan, math.nan, str(exc)))
            continue
        lo, hi = posterior.interval
        rows.append(SensitivityRow(p, posterior.mean, lo, hi))
    return rows
