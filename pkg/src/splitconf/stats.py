"""Normal distribution functions, sample moments and keyed random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "SampleStats",
    "RngStream",
    "make_stream",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "sample_mean_var",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Acklam's rational approximation to the inverse normal CDF; starting point only.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671010229583e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x):
    """Standard normal CDF for a scalar or an array.

    Evaluated through the complementary error function so that both tails
    keep full relative precision.
    """
    if np.ndim(x) == 0:
        x = float(x)
        if not math.isfinite(x):
            raise DomainError(f"normal_cdf needs a finite argument, got {x!r}")
        return 0.5 * math.erfc(-x / _SQRT2)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("normal_cdf needs finite arguments")
    return 0.5 * special.erfc(-x / _SQRT2)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def _poly(coefs, t):
    acc = np.zeros_like(t) + coefs[0]
    for c in coefs[1:]:
        acc = acc * t + c
    return acc


def _lower_quantile(q):
    """Quantile for probabilities q in (0, 0.5], before refinement."""
    x = np.empty_like(q)
    tail = q < _P_LOW
    if np.any(tail):
        t = np.sqrt(-2.0 * np.log(q[tail]))
        x[tail] = _poly(_C, t) / (_poly(_D, t) * t + 1.0)
    mid = ~tail
    if np.any(mid):
        u = q[mid] - 0.5
        r = u * u
        x[mid] = _poly(_A, r) * u / (_poly(_B, r) * r + 1.0)
    return x


def normal_quantile(p):
    """Inverse of :func:`normal_cdf` on the open unit interval.

    A rational approximation (Acklam) followed by two Newton steps on the
    lower-tail CDF. Accepts a scalar or an array.
    """
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("normal_quantile needs probabilities in (0, 1)")
    p = np.atleast_1d(p)
    # 1 - p is exact for p >= 0.5, so folding onto the lower tail loses nothing.
    upper = p > 0.5
    q = np.where(upper, 1.0 - p, p)
    x = _lower_quantile(q)
    for _ in range(2):
        err = 0.5 * special.erfc(-x / _SQRT2) - q
        x = x - err / (_INV_SQRT_2PI * np.exp(-0.5 * x * x))
    x = np.where(upper, -x, x)
    return float(x[0]) if scalar else x


@dataclass(frozen=True)
class SampleStats:
    mean: float
    variance: float | None
    count: int


def sample_mean_var(values) -> SampleStats:
    """Mean and (n-1)-divisor variance by the two-pass scheme."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise DomainError("sample_mean_var needs at least one value")
    if v.min() == v.max():
        return SampleStats(mean=float(v[0]), variance=0.0 if n > 1 else None, count=n)
    mean = float(v.mean())
    if n < 2:
        return SampleStats(mean=mean, variance=None, count=1)
    dev = v - mean
    # second pass correction keeps the result exact for constant input
    var = float((np.dot(dev, dev) - dev.sum() ** 2 / n) / (n - 1))
    return SampleStats(mean=mean, variance=max(var, 0.0), count=n)


_MASK64 = (1 << 64) - 1
_TWO_NEG53 = 2.0 ** -53


class RngStream:
    """Counter-based random stream keyed on ``(seed, replication_id)``.

    Backed by the Philox4x64 generator with the 128-bit key
    ``replication_id << 64 | seed``; the counter starts at zero, so a key
    always yields the same sequence and distinct keys give independent
    streams. Normal draws use the inverse CDF (:func:`normal_quantile`) on
    the stream's uniforms, which keeps every variate a fixed function of the
    raw 64-bit words.

    A stream is single-owner; create one per replication.
    """

    def __init__(self, seed: int, replication_id: int):
        if replication_id < 0:
            raise DomainError("replication_id must be nonnegative")
        if not 0 <= seed <= _MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.replication_id = int(replication_id)
        key = (self.replication_id << 64) | self.seed
        self._bitgen = np.random.Philox(key=key, counter=0)
        self.draws = 0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, replication_id={self.replication_id}, draws={self.draws})"

    def _raw(self, size) -> np.ndarray:
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        self.draws += count
        return self._bitgen.random_raw(count).reshape(shape)

    def uniform(self, size=1) -> np.ndarray:
        """Uniforms on the open interval (0, 1), 53-bit resolution."""
        raw = self._raw(size)
        return ((raw >> np.uint64(11)).astype(float) + 0.5) * _TWO_NEG53

    def standard_normal(self, size=1) -> np.ndarray:
        u = self.uniform(size)
        return normal_quantile(u.ravel()).reshape(u.shape)

    def laplace(self, size=1) -> np.ndarray:
        """Laplace(0, 1) variates by inversion."""
        c = self.uniform(size) - 0.5
        return -np.sign(c) * np.log(1.0 - 2.0 * np.abs(c))

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of ``range(n)`` (argsort of uniforms)."""
        return np.argsort(self.uniform(n), kind="stable")


def make_stream(seed: int, replication_id: int) -> RngStream:
    return RngStream(seed, replication_id)
