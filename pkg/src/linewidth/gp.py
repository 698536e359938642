"""Gaussian process regression with squared-exponential kernels.

Supports the two models used by the estimation pipeline: a spectrum-domain
GP with a constant mean, and a frequency-domain GP with an exponential
mean whose derivative can be predicted jointly with its value. All dense
linear algebra goes through a single Cholesky helper that adds an
escalating diagonal jitter when a matrix is numerically indefinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

_LOG_2PI = math.log(2.0 * math.pi)

JITTER_START = 1e-10  # first jitter, as a fraction of the mean diagonal
JITTER_LIMIT = 1e-4  # largest jitter attempted before giving up


class IllConditionedError(np.linalg.LinAlgError):
    """Cholesky failed even after the largest permitted jitter."""

    def __init__(self, message: str, attempted_jitter: float):
        super().__init__(f"{message} (largest jitter attempted: {attempted_jitter:.3e})")
        self.message = message
        self.attempted_jitter = attempted_jitter


def jittered_cholesky(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a symmetric matrix, adding jitter if needed.

    Returns ``(factor, jitter)`` where ``jitter`` is the amount added to
    the diagonal (0 when the plain factorization succeeds). Jitter starts
    at 1e-10 times the mean diagonal and escalates tenfold up to 1e-4
    times the mean diagonal; beyond that an IllConditionedError is raised.
    An exactly zero matrix factors to zero.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return cholesky(mat, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    scale = float(np.mean(np.diagonal(mat)))
    if scale <= 0 or not np.isfinite(scale):
        if np.all(mat == 0.0):
            return np.zeros_like(mat), 0.0
        raise IllConditionedError("matrix has nonpositive mean diagonal", 0.0)
    eye = np.eye(n)
    jitter = JITTER_START * scale
    limit = JITTER_LIMIT * scale
    while jitter <= limit * (1.0 + 1e-12):
        try:
            return cholesky(mat + jitter * eye, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise IllConditionedError("matrix is not positive definite", jitter / 10.0)


@dataclass(frozen=True)
class Stage1Hyper:
    """Spectrum-domain GP: constant mean and squared-exponential kernel.

    Fields are the constant mean level ``alpha``, the kernel amplitude
    ``sigma_s``, the kernel length scale ``phi`` (wavenumbers), and the
    observation noise ``sigma_eps``.
    """

    alpha: float
    sigma_s: float
    phi: float
    sigma_eps: float

    def __post_init__(self):
        for name in ("sigma_s", "phi", "sigma_eps"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and nonnegative, got {self.alpha}")

    @property
    def signal_variance(self) -> float:
        return self.sigma_s**2

    @property
    def length_scale(self) -> float:
        return self.phi

    @property
    def noise_std(self) -> float:
        return self.sigma_eps

    def mean(self, x) -> np.ndarray:
        return np.full(np.asarray(x, dtype=float).shape, self.alpha)

    def to_vector(self) -> np.ndarray:
        return np.array([self.alpha, self.sigma_s, self.phi, self.sigma_eps])

    @classmethod
    def from_vector(cls, theta) -> "Stage1Hyper":
        a, s, p, e = (float(v) for v in theta)
        return cls(a, s, p, e)


@dataclass(frozen=True)
class Stage2Hyper:
    """Frequency-domain GP: exponential mean and squared-exponential kernel.

    The mean is ``beta0 * exp(beta1 * xi)``; ``sigma_c`` is the kernel
    amplitude, ``lam`` the kernel length scale in the frequency variable,
    and ``sigma_z`` the observation noise on the magnitudes.
    """

    beta0: float
    beta1: float
    sigma_c: float
    lam: float
    sigma_z: float

    def __post_init__(self):
        for name in ("sigma_c", "lam", "sigma_z"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if not (np.isfinite(self.beta0) and self.beta0 >= 0):
            raise ValueError(f"beta0 must be finite and nonnegative, got {self.beta0}")
        if not np.isfinite(self.beta1):
            raise ValueError(f"beta1 must be finite, got {self.beta1}")

    @property
    def signal_variance(self) -> float:
        return self.sigma_c**2

    @property
    def length_scale(self) -> float:
        return self.lam

    @property
    def noise_std(self) -> float:
        return self.sigma_z

    def mean(self, xi) -> np.ndarray:
        return self.beta0 * np.exp(self.beta1 * np.asarray(xi, dtype=float))

    def mean_derivative(self, xi) -> np.ndarray:
        return self.beta0 * self.beta1 * np.exp(self.beta1 * np.asarray(xi, dtype=float))

    def to_vector(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.sigma_c, self.lam, self.sigma_z])

    @classmethod
    def from_vector(cls, theta) -> "Stage2Hyper":
        b0, b1, c, lam, z = (float(v) for v in theta)
        return cls(b0, b1, c, lam, z)


def sq_exp_kernel(xi, xj, signal_variance: float, length_scale: float):
    """Squared-exponential covariance between two location arrays."""
    d = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    return signal_variance * np.exp(-0.5 * (d / length_scale) ** 2)


def kernel_matrix(xs, ys, hyper) -> np.ndarray:
    """Kernel matrix K[i, j] = k(xs[i], ys[j]) for the hyper's kernel.

    Broadcasts the scalar kernel over the index grid, so every entry is
    bit-identical to the corresponding scalar kernel call.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return sq_exp_kernel(xs[:, None], ys[None, :], hyper.signal_variance, hyper.length_scale)


def derivative_kernels(xi, xj, hyper) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Covariances of function values and first derivatives.

    Returns ``(c00, c01, c10, c11)`` where c00 is the plain kernel, c01
    the derivative in the second argument, c10 the derivative in the
    first argument (the negative of c01), and c11 the mixed second
    derivative. Shapes are (len(xi), len(xj)).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    lam2 = hyper.length_scale**2
    d = xi[:, None] - xj[None, :]
    c00 = hyper.signal_variance * np.exp(-0.5 * d * d / lam2)
    c01 = c00 * d / lam2
    c10 = -c01
    c11 = c00 * (lam2 - d * d) / lam2**2
    return c00, c01, c10, c11


def _residual(inputs, targets, hyper, mean_fn):
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    mean = hyper.mean(inputs) if mean_fn is None else mean_fn(inputs)
    return inputs, targets - mean


def log_likelihood(inputs, targets, hyper, mean_fn=None) -> float:
    """Marginal log likelihood of targets under the GP with noise.

    Computed through a (jittered) Cholesky factorization of
    K + noise_std**2 * I; no explicit inverse or determinant.
    """
    inputs, r = _residual(inputs, targets, hyper, mean_fn)
    n = inputs.size
    a = kernel_matrix(inputs, inputs, hyper)
    a[np.diag_indices_from(a)] += hyper.noise_std**2
    factor, _ = jittered_cholesky(a)
    w = solve_triangular(factor, r, lower=True, check_finite=False)
    return float(-0.5 * (w @ w) - np.sum(np.log(np.diagonal(factor))) - 0.5 * n * _LOG_2PI)


def log_likelihood_repeated(block_inputs, targets, repeats: int, hyper, mean_fn=None) -> float:
    """Log likelihood for targets stacked over ``repeats`` copies of one grid.

    Equivalent to :func:`log_likelihood` on the tiled inputs but factors
    the block structure: the full kernel matrix is a constant block
    repetition, so the solve reduces to the block-mean system plus an
    isotropic term for the scatter around the block means.
    """
    block_inputs = np.asarray(block_inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    p = block_inputs.size
    j = int(repeats)
    if j < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if targets.size != j * p:
        raise ValueError(f"expected {j * p} targets ({j} blocks of {p}), got {targets.size}")
    mean = hyper.mean(block_inputs) if mean_fn is None else mean_fn(block_inputs)
    res = targets.reshape(j, p) - mean
    rbar = res.mean(axis=0)
    noise_var = hyper.noise_std**2
    a = kernel_matrix(block_inputs, block_inputs, hyper)
    a *= j
    a[np.diag_indices_from(a)] += noise_var
    factor, _ = jittered_cholesky(a)
    u = solve_triangular(factor, rbar, lower=True, check_finite=False)
    quad = (float(np.sum(res * res)) - j * float(rbar @ rbar)) / noise_var + j * float(u @ u)
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(factor)))) + (j - 1) * p * math.log(noise_var)
    return float(-0.5 * quad - 0.5 * logdet - 0.5 * j * p * _LOG_2PI)


@dataclass(frozen=True)
class GpFit:
    """A GP conditioned on observations, ready for prediction and sampling.

    ``noise_std`` is the observation noise used in the conditioning
    matrix; it equals the hyper's noise except for block-repeated fits,
    where conditioning on block means shrinks it by sqrt(repeats).
    """

    inputs: np.ndarray
    targets: np.ndarray
    hyper: object
    noise_std: float
    factor: np.ndarray
    weights: np.ndarray
    jitter: float
    mean_fn: object = None

    @classmethod
    def fit(cls, inputs, targets, hyper, mean_fn=None, noise_std=None) -> "GpFit":
        inputs, r = _residual(inputs, targets, hyper, mean_fn)
        targets = np.asarray(targets, dtype=float)
        noise = hyper.noise_std if noise_std is None else float(noise_std)
        a = kernel_matrix(inputs, inputs, hyper)
        a[np.diag_indices_from(a)] += noise**2
        factor, jitter = jittered_cholesky(a)
        half = solve_triangular(factor, r, lower=True, check_finite=False)
        weights = solve_triangular(factor.T, half, lower=False, check_finite=False)
        return cls(inputs, targets, hyper, noise, factor, weights, jitter, mean_fn)

    @classmethod
    def fit_repeated(cls, block_inputs, targets, repeats: int, hyper, mean_fn=None) -> "GpFit":
        """Condition on ``repeats`` stacked copies of one input grid.

        Exactly equivalent to fitting the tiled data: the posterior given
        repeated blocks depends on the data only through the block means,
        observed with noise shrunk by sqrt(repeats).
        """
        block_inputs = np.asarray(block_inputs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        p = block_inputs.size
        j = int(repeats)
        if j < 1:
            raise ValueError(f"repeats must be >= 1, got {repeats}")
        if targets.size != j * p:
            raise ValueError(f"expected {j * p} targets ({j} blocks of {p}), got {targets.size}")
        zbar = targets.reshape(j, p).mean(axis=0)
        return cls.fit(block_inputs, zbar, hyper, mean_fn, noise_std=hyper.noise_std / math.sqrt(j))

    def _prior_mean(self, x) -> np.ndarray:
        return self.hyper.mean(x) if self.mean_fn is None else self.mean_fn(x)


def predictive(fit: GpFit, query) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance of the latent function at ``query``.

    The covariance is for the noise-free function; add the observation
    noise variance to the diagonal for a predictive-observation law.
    """
    query = np.asarray(query, dtype=float)
    kqq = kernel_matrix(query, query, fit.hyper)
    mean = fit._prior_mean(query)
    if fit.inputs.size == 0:
        return mean, kqq
    kqx = kernel_matrix(query, fit.inputs, fit.hyper)
    half = solve_triangular(fit.factor, kqx.T, lower=True, check_finite=False)
    return mean + kqx @ fit.weights, kqq - half.T @ half


def sample_realization(fit: GpFit, query, rng: np.random.Generator) -> np.ndarray:
    """Draw one noisy realization of the GP at ``query``.

    Adds a posterior-covariance draw and an independent observation-noise
    draw (with the hyper's noise level) to the posterior mean.
    """
    mean, cov = predictive(fit, query)
    factor, _ = jittered_cholesky(cov)
    draw = mean + factor @ rng.standard_normal(mean.size)
    return draw + fit.hyper.noise_std * rng.standard_normal(mean.size)


@dataclass(frozen=True)
class JointPrediction:
    """Joint posterior of function values and derivatives at query points.

    ``cov`` is the (2q x 2q) covariance of the stacked vector
    (values, derivatives) for q query points.
    """

    query: np.ndarray
    value_mean: np.ndarray
    derivative_mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        q = self.query.size
        if self.value_mean.shape != (q,) or self.derivative_mean.shape != (q,):
            raise ValueError("means must match the query length")
        if self.cov.shape != (2 * q, 2 * q):
            raise ValueError(f"cov must be {(2 * q, 2 * q)}, got {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T, rtol=0.0, atol=1e-8 * max(1.0, float(np.max(np.abs(self.cov))))):
            raise ValueError("joint covariance must be symmetric")


def joint_value_derivative_prediction(fit: GpFit, query) -> JointPrediction:
    """Predict function values and first derivatives jointly at ``query``.

    Requires a hyper with a ``mean_derivative`` method (the exponential
    mean). Cross covariances between values and derivatives come from the
    kernel's analytic derivatives.
    """
    query = np.atleast_1d(np.asarray(query, dtype=float))
    hyper = fit.hyper
    if fit.mean_fn is not None or not hasattr(hyper, "mean_derivative"):
        raise ValueError("joint prediction needs a hyper with an analytic mean derivative")
    if fit.inputs.size:
        hi = 3.0 * float(np.max(fit.inputs))
        if np.any(query < 0.0) or np.any(query > hi):
            raise ValueError(f"query points must lie in [0, {hi}] for a stable extrapolation")
    c00_qq, c01_qq, _, c11_qq = derivative_kernels(query, query, hyper)
    kss = np.block([[c00_qq, c01_qq], [c01_qq.T, c11_qq]])
    prior = np.concatenate([hyper.mean(query), hyper.mean_derivative(query)])
    if fit.inputs.size == 0:
        mean = prior
        cov = kss
    else:
        c00_qx, _, c10_qx, _ = derivative_kernels(query, fit.inputs, hyper)
        kstar = np.vstack([c00_qx, c10_qx])
        mean = prior + kstar @ fit.weights
        half = solve_triangular(fit.factor, kstar.T, lower=True, check_finite=False)
        cov = kss - half.T @ half
    cov = 0.5 * (cov + cov.T)
    q = query.size
    return JointPrediction(query, mean[:q], mean[q:], cov)


def sample_joint(pred: JointPrediction, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw one (values, derivatives) pair from a joint prediction."""
    factor, _ = jittered_cholesky(pred.cov)
    stacked = np.concatenate([pred.value_mean, pred.derivative_mean])
    draw = stacked + factor @ rng.standard_normal(stacked.size)
    q = pred.query.size
    return draw[:q], draw[q:]
