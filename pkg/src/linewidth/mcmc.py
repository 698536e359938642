"""Random-walk Metropolis sampling with delayed rejection and adaptation.

The sampler retries a rejected Gaussian proposal up to a configured number
of stages, shrinking the proposal covariance each stage, with the
stage-wise acceptance probabilities that keep the chain reversible. From a
configured iteration onward the proposal covariance is re-estimated from
the chain history. With one stage and adaptation disabled this reduces to
plain random-walk Metropolis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

ADAPT_SCALE_NUMERATOR = 2.4**2  # optimal Gaussian random-walk scaling, per dimension
ADAPT_REGULARIZATION = 1e-10  # diagonal boost, as a fraction of mean empirical variance


@dataclass(frozen=True)
class PriorSpec:
    """Uniform prior on an open interval; either end may be infinite."""

    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: need lower < upper, got [{self.lower}, {self.upper}]")


def log_prior(theta, priors) -> float:
    """0.0 inside the box defined by ``priors``, -inf outside."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != len(priors):
        raise ValueError(f"theta has {theta.size} entries for {len(priors)} priors")
    for value, prior in zip(theta, priors):
        if not prior.lower < value < prior.upper:
            return -math.inf
    return 0.0


def stage1_priors(wavenumbers) -> list[PriorSpec]:
    """Prior box for the spectrum-domain GP (alpha, sigma_s, phi, sigma_eps).

    The length scale is capped at twice the grid span; the other scales
    are positive and unbounded.
    """
    nu = np.asarray(wavenumbers, dtype=float)
    span = float(nu[-1] - nu[0])
    return [
        PriorSpec("alpha", 0.0, math.inf),
        PriorSpec("sigma_s", 0.0, math.inf),
        PriorSpec("phi", 0.0, 2.0 * span),
        PriorSpec("sigma_eps", 0.0, math.inf),
    ]


def stage2_priors(max_magnitude: float, xi_max: float) -> list[PriorSpec]:
    """Prior box for the frequency-domain GP (beta0, beta1, sigma_c, lam, sigma_z).

    The mean level is capped at ten times the largest magnitude and the
    length scale at three times the largest retained frequency; the decay
    rate is unbounded in both directions.
    """
    if max_magnitude <= 0 or xi_max <= 0:
        raise ValueError("max_magnitude and xi_max must be positive")
    return [
        PriorSpec("beta0", 0.0, 10.0 * max_magnitude),
        PriorSpec("beta1", -math.inf, math.inf),
        PriorSpec("sigma_c", 0.0, math.inf),
        PriorSpec("lam", 0.0, 3.0 * xi_max),
        PriorSpec("sigma_z", 0.0, math.inf),
    ]


@dataclass(frozen=True)
class DramConfig:
    """Sampler settings.

    ``initial_cov`` may be left None at construction and filled in later
    (it usually depends on the data-derived starting point), but must be a
    symmetric positive-definite matrix by the time the sampler runs.
    Setting ``adaptation_start`` beyond ``chain_length`` disables
    adaptation; ``dr_stages=1`` disables delayed rejection.
    """

    chain_length: int
    burn_in: int
    initial_cov: np.ndarray | None = None
    dr_stages: int = 3
    dr_scale: float = 0.2
    adaptation_start: int = 1000
    adaptation_interval: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.chain_length < 2:
            raise ValueError(f"chain_length must be >= 2, got {self.chain_length}")
        if not 0 <= self.burn_in < self.chain_length:
            raise ValueError(f"burn_in must lie in [0, chain_length), got {self.burn_in}")
        if self.dr_stages < 1:
            raise ValueError(f"dr_stages must be >= 1, got {self.dr_stages}")
        if not 0.0 < self.dr_scale <= 1.0:
            raise ValueError(f"dr_scale must lie in (0, 1], got {self.dr_scale}")
        if self.adaptation_start < 1 or self.adaptation_interval < 1:
            raise ValueError("adaptation_start and adaptation_interval must be >= 1")


@dataclass(frozen=True)
class Chain:
    """Sampler output: every iteration's state, including burn-in."""

    samples: np.ndarray
    log_posterior: np.ndarray
    accepted: np.ndarray
    proposal_cov: np.ndarray
    burn_in: int

    @property
    def post_burn_in(self) -> np.ndarray:
        return self.samples[self.burn_in:]

    @property
    def acceptance_rate(self) -> float:
        return float(np.sum(self.accepted)) / self.samples.shape[0]


def dram_run(log_target, start, config: DramConfig) -> Chain:
    """Sample ``config.chain_length`` states of ``log_target``.

    ``log_target`` maps a parameter vector to a log density (-inf allowed
    outside the support; NaN is treated as -inf). The starting point must
    have finite log density. Draws per iteration are one standard-normal
    vector plus one uniform per attempted stage, in that order, so a
    single-stage non-adaptive run is reproducible against any plain
    Metropolis loop sharing the generator protocol.
    """
    theta = np.asarray(start, dtype=float).copy()
    d = theta.size
    if config.initial_cov is None:
        raise ValueError("config.initial_cov must be set before running")
    cov = np.asarray(config.initial_cov, dtype=float)
    if cov.shape != (d, d):
        raise ValueError(f"initial_cov must be {(d, d)}, got {cov.shape}")
    try:
        factor = cholesky(cov, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise ValueError("initial_cov must be symmetric positive definite") from exc

    def target(point) -> float:
        value = float(log_target(point))
        return value if not math.isnan(value) else -math.inf

    l_cur = target(theta)
    if not math.isfinite(l_cur):
        raise ValueError("starting point must have finite log target")

    rng = np.random.default_rng(config.seed)
    n = config.chain_length
    samples = np.empty((n, d))
    log_post = np.empty(n)
    accepted = np.zeros(config.dr_stages, dtype=int)
    step_scale = math.sqrt(config.dr_scale)
    inv_factor = solve_triangular(factor, np.eye(d), lower=True, check_finite=False)

    scale = ADAPT_SCALE_NUMERATOR / d
    mean_acc = theta.copy()
    sum_sq = np.zeros((d, d))  # sum of outer products of deviations
    count = 1

    for i in range(n):
        path = [theta]
        path_logs = [l_cur]
        for stage in range(1, config.dr_stages + 1):
            step = factor @ rng.standard_normal(d)
            if stage > 1:
                step *= step_scale ** (stage - 1)
            proposal = theta + step
            path.append(proposal)
            path_logs.append(target(proposal))
            log_alpha = _log_alpha(path, path_logs, inv_factor, config.dr_scale)
            u = rng.uniform()
            with np.errstate(divide="ignore"):
                accept = np.log(u) < log_alpha
            if accept:
                theta = proposal
                l_cur = path_logs[-1]
                accepted[stage - 1] += 1
                break
        samples[i] = theta
        log_post[i] = l_cur

        count += 1
        delta = theta - mean_acc
        mean_acc += delta / count
        sum_sq += np.outer(delta, theta - mean_acc)
        if count >= config.adaptation_start and count % config.adaptation_interval == 0:
            empirical = sum_sq / (count - 1)
            eps = ADAPT_REGULARIZATION * np.trace(empirical) / d
            candidate = scale * (empirical + eps * np.eye(d))
            try:
                factor = cholesky(candidate, lower=True, check_finite=False)
            except LinAlgError:
                pass  # degenerate history; keep the current proposal
            else:
                inv_factor = solve_triangular(factor, np.eye(d), lower=True, check_finite=False)

    final_cov = factor @ factor.T
    return Chain(samples, log_post, accepted, final_cov, config.burn_in)


def _quad_form(inv_factor, vec) -> float:
    w = inv_factor @ vec
    return float(w @ w)


def _log_alpha(path, path_logs, inv_factor, dr_scale) -> float:
    """Log acceptance probability for the last proposal in ``path``.

    ``path`` is (current, proposal 1, ..., proposal n); stage-k proposals
    are Gaussian about the path start with covariance shrunk by
    dr_scale**(k-1). Reversibility requires comparing the densities of
    the forward path against the reversed one, including the probability
    of having rejected every earlier stage in both directions.
    """
    n = len(path) - 1
    if path_logs[-1] == -math.inf:
        return -math.inf
    if n == 1:
        return min(0.0, path_logs[1] - path_logs[0])
    log_ratio = path_logs[-1] - path_logs[0]
    # Proposal-density ratio per stage; the final stage is symmetric.
    for k in range(1, n):
        rev = _quad_form(inv_factor, path[n - k] - path[n])
        fwd = _quad_form(inv_factor, path[k] - path[0])
        log_ratio += -0.5 * (rev - fwd) / dr_scale ** (k - 1)
    # A reversed walk that would surely accept at an earlier stage makes
    # this move unreachable backwards: reject outright.
    for k in range(1, n):
        a_rev = _log_alpha(path[n - k : n + 1][::-1], path_logs[n - k : n + 1][::-1], inv_factor, dr_scale)
        if a_rev >= 0.0:
            return -math.inf
        log_ratio += math.log1p(-math.exp(a_rev))
    for k in range(1, n):
        a_fwd = _log_alpha(path[: k + 1], path_logs[: k + 1], inv_factor, dr_scale)
        if a_fwd >= 0.0:
            return 0.0  # sure-accept forward history has zero mass; cap at 1
        log_ratio -= math.log1p(-math.exp(a_fwd))
    return min(0.0, log_ratio)


def thin_and_select(chain: Chain, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` post-burn-in parameter vectors, uniformly with replacement."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    kept = chain.post_burn_in
    if kept.shape[0] == 0:
        raise ValueError("chain has no post-burn-in samples")
    idx = rng.integers(0, kept.shape[0], size=count)
    return kept[idx].copy()


def effective_sample_size(values) -> float:
    """Autocorrelation-based effective sample size of a scalar chain.

    Uses the initial-positive-sequence truncation of the autocorrelation
    sum. A constant chain reports its full length.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    if np.all(x == x[0]):
        return float(n)
    x = x - x.mean()
    var = float(x @ x)
    if var == 0.0:
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[:n]
    rho = acov / acov[0]
    tau = 1.0
    k = 1
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 2
    ess = n / tau
    return float(min(max(ess, 1.0), n))


def chain_effective_sample_size(chain: Chain) -> float:
    """Smallest per-parameter effective sample size after burn-in."""
    kept = chain.post_burn_in
    return float(min(effective_sample_size(kept[:, j]) for j in range(kept.shape[1])))


def write_chain(path, chain: Chain, names) -> None:
    """Write a chain as text: iteration, one column per parameter, log posterior."""
    names = list(names)
    if len(names) != chain.samples.shape[1]:
        raise ValueError(f"got {len(names)} names for {chain.samples.shape[1]} parameters")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# burn_in {chain.burn_in}\n")
        fh.write("# iteration " + " ".join(names) + " log_posterior\n")
        for i in range(chain.samples.shape[0]):
            row = " ".join(repr(float(v)) for v in chain.samples[i])
            fh.write(f"{i} {row} {float(chain.log_posterior[i])!r}\n")


def read_chain(path) -> tuple[np.ndarray, np.ndarray, int]:
    """Parse a chain file back into (samples, log_posterior, burn_in)."""
    burn_in = 0
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith("# burn_in"):
                burn_in = int(line.split()[2])
                continue
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ValueError(f"{path}: no chain rows")
    table = np.asarray(rows, dtype=float)
    return table[:, 1:-1], table[:, -1], burn_in
