"""Virtual lossy balanced homodyne detection and loss-compensating
pattern-function estimators.

A homodyne chain of overall efficiency eta_h measures the quadrature
x_M = sqrt(eta_h) x + sqrt(1 - eta_h) x_vac.  For Fock-diagonal sources
that is the same as sampling the quadrature PDF of the loss-attenuated
state, which is how :func:`sample_homodyne` draws (inverse CDF on a
dense grid, fully seeded).

Estimators recover pre-loss quantities by averaging Hermite patterns
over the raw samples:

    <x^k>        = (sqrt(1-eta)/(2 sqrt(eta)))^k  E[ H_k(x_M/sqrt(1-eta)) ]
    <a+^k a^k>   = eta^-k k!k!/(2^k (2k)!)        E[ H_2k(x_M) ]

both unbiased for the state before the detection losses.  Composite
quantities (photon-number variance, excess kurtosis) and bootstrap
standard errors build on these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, factorial

from .hermite import hermite_values
from .states import PhotonDistribution, apply_loss, quadrature_pdf, \
    pdf_half_range, validate_efficiency

#: Grid resolution of the inverse-CDF sampler.
SAMPLER_GRID_POINTS = 2 ** 14

#: Default number of bootstrap resamples for standard errors.
DEFAULT_BOOTSTRAP_RESAMPLES = 50

MAX_X_MOMENT_ORDER = 8
MAX_N_MOMENT_ORDER = 4

#: Statistical floor for the composite variance/kurtosis estimator.
MIN_KURTOSIS_SAMPLES = 10_000


@dataclass(frozen=True)
class QuadratureBatch:
    """Seeded homodyne sample set tagged with its detection efficiency."""

    samples: np.ndarray
    eta_h: float
    seed: int
    source: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True, order="C")
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-d vector")
        eta = float(self.eta_h)
        if not 0.0 < eta <= 1.0:
            raise ValueError("eta_h must lie in (0, 1]")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "eta_h", eta)

    @property
    def count(self) -> int:
        return self.samples.size


def sample_homodyne(state: PhotonDistribution, eta_h, count: int, seed: int,
                    source: str = "", grid_points: int = SAMPLER_GRID_POINTS
                    ) -> QuadratureBatch:
    """Draw ``count`` quadrature samples of ``state`` seen through losses.

    Sampling is inverse-CDF on a ``grid_points`` grid spanning six
    standard deviations plus margin, with linear interpolation inside
    grid cells; identical (state, eta_h, count, seed) always produce
    identical batches.
    """
    eta_h = validate_efficiency(eta_h, "eta_h")
    if eta_h == 0.0:
        raise ValueError("eta_h must be positive to measure anything")
    if count < 1:
        raise ValueError("count must be >= 1")
    attenuated = apply_loss(state, eta_h)
    half_range = pdf_half_range(attenuated)
    grid = np.linspace(-half_range, half_range, grid_points)
    pdf = quadrature_pdf(attenuated, grid)
    cdf = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))))
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    idx = np.searchsorted(cdf, u, side="right").clip(1, grid_points - 1)
    lo, hi = cdf[idx - 1], cdf[idx]
    width = hi - lo
    frac = np.where(width > 0.0, (u - lo) / np.where(width > 0.0, width, 1.0), 0.5)
    samples = grid[idx - 1] + frac * (grid[idx] - grid[idx - 1])
    return QuadratureBatch(samples, eta_h=eta_h, seed=int(seed), source=source)


def estimate_x_moment(batch: QuadratureBatch, k: int) -> float:
    """Loss-compensated estimate of the pre-loss quadrature moment <x^k>."""
    k = int(k)
    if not 1 <= k <= MAX_X_MOMENT_ORDER:
        raise ValueError("order must lie in 1..%d" % MAX_X_MOMENT_ORDER)
    return _x_moment(batch.samples, batch.eta_h, k)


def _x_moment(samples, eta, k):
    if eta == 1.0:
        return float(np.mean(samples ** k))
    loss = 1.0 - eta
    factor = (math.sqrt(loss) / (2.0 * math.sqrt(eta))) ** k
    values = hermite_values(k, samples / math.sqrt(loss), accumulate_long=k >= 6)
    return factor * float(np.mean(values, dtype=np.longdouble if k >= 6 else np.float64))


def estimate_n_moment(batch: QuadratureBatch, k: int) -> float:
    """Loss-compensated estimate of <a+^k a^k> of the pre-loss state."""
    k = int(k)
    if not 1 <= k <= MAX_N_MOMENT_ORDER:
        raise ValueError("order must lie in 1..%d" % MAX_N_MOMENT_ORDER)
    return _n_moment(batch.samples, batch.eta_h, k)


def _n_moment(samples, eta, k):
    coeff = (factorial(k, exact=True) ** 2
             / (2.0 ** k * factorial(2 * k, exact=True) * eta ** k))
    values = hermite_values(2 * k, samples, accumulate_long=k >= 3)
    return float(coeff) * float(np.mean(values, dtype=np.longdouble if k >= 3 else np.float64))


@dataclass(frozen=True)
class MomentEstimates:
    """Composite pattern-function estimates of photon-number statistics."""

    mean_n: float
    variance_n: float
    kurtosis: float


def _variance_and_kurtosis(samples, eta):
    mean_n = _n_moment(samples, eta, 1)
    n2_f = _n_moment(samples, eta, 2)  # <a+^2 a^2>
    variance_n = n2_f + mean_n - mean_n ** 2
    x1 = _x_moment(samples, eta, 1)
    x2 = _x_moment(samples, eta, 2)
    x3 = _x_moment(samples, eta, 3)
    x4 = _x_moment(samples, eta, 4)
    m2 = x2 - x1 * x1
    m4 = x4 - 4.0 * x1 * x3 + 6.0 * x1 * x1 * x2 - 3.0 * x1 ** 4
    kurtosis = m4 / (m2 * m2) - 3.0
    return mean_n, variance_n, kurtosis


def estimate_variance_and_kurtosis(batch: QuadratureBatch) -> MomentEstimates:
    """Photon-number mean/variance and quadrature excess kurtosis.

    The kurtosis follows the mean-subtracted definition
    K = <(x - xbar)^4> / <(x - xbar)^2>^2 - 3 composed from compensated
    quadrature moments; the variance composes the compensated factorial
    moments via V = <a+^2 a^2> + <n> - <n>^2.
    """
    if batch.count < MIN_KURTOSIS_SAMPLES:
        raise ValueError("need at least %d samples for stable composite "
                         "estimates, got %d" % (MIN_KURTOSIS_SAMPLES, batch.count))
    mean_n, variance_n, kurtosis = _variance_and_kurtosis(batch.samples, batch.eta_h)
    return MomentEstimates(mean_n, variance_n, kurtosis)


def bootstrap_std(batch: QuadratureBatch, statistic,
                  resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
                  seed: int = 0):
    """Bootstrap standard error of ``statistic(samples, eta_h)``.

    ``statistic`` may return a float or a tuple/array of floats; the
    result matches elementwise.  Resampling is seeded independently of
    the batch's own seed.
    """
    if resamples < 2:
        raise ValueError("need at least 2 resamples")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(resamples):
        idx = rng.integers(0, batch.count, batch.count)
        values.append(statistic(batch.samples[idx], batch.eta_h))
    values = np.asarray(values, dtype=np.float64)
    return values.std(axis=0, ddof=1)


def bootstrap_moment_errors(batch: QuadratureBatch,
                            resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
                            seed: int = 0):
    """Standard errors for (mean_n, variance_n, kurtosis) in one pass."""
    stds = bootstrap_std(batch, _variance_and_kurtosis, resamples, seed)
    return MomentEstimates(*stds)


def binned_distance_to_gaussian(batch: QuadratureBatch, bins: int = 200) -> float:
    """Half-L1 distance between binned samples and their matched Gaussian.

    Both the empirical distribution and the reference Gaussian (same
    sample mean and variance) are discretized over ``bins`` equal bins
    spanning mean +- 6 sigma before comparison; the sliver of mass
    outside that window is excluded from both sides.
    """
    if bins < 2:
        raise ValueError("need at least 2 bins")
    x = batch.samples
    mean = float(x.mean())
    sigma = float(x.std())
    if sigma == 0.0:
        raise ValueError("degenerate batch: zero sample variance")
    edges = np.linspace(mean - 6.0 * sigma, mean + 6.0 * sigma, bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    empirical = counts / x.size
    z = (edges - mean) / (sigma * math.sqrt(2.0))
    gaussian = 0.5 * np.diff(erf(z))
    return 0.5 * float(np.abs(empirical - gaussian).sum())


# ----------------------------------------------------------------------
# batch CSV round trip (the exchange format with the CLI and tomography)

def save_batch(batch: QuadratureBatch, path):
    """Write a batch as CSV: provenance header lines, then index,x rows."""
    with open(path, "w") as fh:
        fh.write("# gaussify quadrature batch\n")
        fh.write("# eta_h: %r\n" % batch.eta_h)
        fh.write("# seed: %d\n" % batch.seed)
        fh.write("# source: %s\n" % batch.source)
        fh.write("# count: %d\n" % batch.count)
        fh.write("index,x\n")
        for i, value in enumerate(batch.samples):
            fh.write("%d,%r\n" % (i, float(value)))


def load_batch(path) -> QuadratureBatch:
    """Read a batch written by :func:`save_batch`."""
    meta = {}
    samples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, value = body.partition(":")
                    meta[key.strip()] = value.strip()
                continue
            if line.startswith("index"):
                continue
            _, _, value = line.partition(",")
            samples.append(float(value))
    if "eta_h" not in meta:
        raise ValueError("missing eta_h header in %s" % path)
    return QuadratureBatch(
        np.asarray(samples),
        eta_h=float(meta["eta_h"]),
        seed=int(meta.get("seed", 0)),
        source=meta.get("source", ""),
    )
