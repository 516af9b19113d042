"""Sample splitting and the initial estimators fitted on D1."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DomainError, SingularityError, UnsupportedDimensionError
from .losses import sgn
from .stats import RngStream

__all__ = [
    "SplitIndices",
    "max_score_2d",
    "ols_estimator",
    "sample_mean_estimator",
    "sample_quantile",
    "split",
]

PIVOT_RTOL = 1e-12
DEFAULT_ANGLES = 4096


@dataclass(frozen=True)
class SplitIndices:
    d1: np.ndarray
    d2: np.ndarray

    def apply(self, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return data[self.d1], data[self.d2]


def split(N: int, ratio: float = 0.5, shuffle: bool = False, stream: RngStream | None = None) -> SplitIndices:
    """Partition ``range(N)`` into an estimation block D1 and an inference block D2.

    ``|D1|`` is ``ratio * N`` rounded to the nearest integer with halves
    rounded down, so the default gives ``|D1| = floor(N / 2)``. Without
    shuffling D1 is the leading block.
    """
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"split ratio must lie in (0, 1), got {ratio}")
    n1 = math.ceil(ratio * N - 0.5)
    if N < 4 or n1 < 2 or N - n1 < 2:
        raise DomainError(f"cannot split N={N} with ratio {ratio}: each part needs >= 2 rows")
    if shuffle:
        if stream is None:
            raise DomainError("a shuffled split needs a random stream")
        perm = stream.permutation(N)
        return SplitIndices(d1=np.sort(perm[:n1]), d2=np.sort(perm[n1:]))
    idx = np.arange(N)
    return SplitIndices(d1=idx[:n1], d2=idx[n1:])


def sample_mean_estimator(rows) -> np.ndarray:
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] == 0:
        raise DomainError("sample mean of an empty sample")
    return x.mean(axis=0)


def ols_estimator(rows) -> np.ndarray:
    """Least squares fit of ``y`` on ``x`` for rows ``(y, x_1, ..., x_d)``.

    Solves the normal equations by Cholesky factorization of the Gram
    matrix. Raises SingularityError when the smallest pivot falls below
    ``1e-12`` times the largest.
    """
    z = np.asarray(rows, dtype=float)
    if z.ndim != 2 or z.shape[1] < 2:
        raise DomainError("OLS rows must be (y, x_1, ..., x_d)")
    y, x = z[:, 0], z[:, 1:]
    if z.shape[0] < x.shape[1]:
        raise SingularityError(f"{z.shape[0]} rows cannot identify {x.shape[1]} coefficients")
    gram = x.T @ x
    try:
        c, lower = linalg.cho_factor(gram, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularityError("Gram matrix is not positive definite") from exc
    pivots = np.diag(c) ** 2
    if pivots.min() < PIVOT_RTOL * pivots.max():
        raise SingularityError("Gram matrix is numerically singular")
    return linalg.cho_solve((c, lower), x.T @ y)


def max_score_2d(rows, grid_size: int = DEFAULT_ANGLES) -> np.ndarray:
    """Maximum score estimator on the unit circle by exhaustive angle search.

    Scores ``sum_i y_i sgn(theta'x_i)`` at ``theta = (cos phi, sin phi)`` for
    ``grid_size`` equally spaced angles in ``[0, 2 pi)``; the first maximizer
    (smallest angle) wins.
    """
    z = np.asarray(rows, dtype=float)
    if z.ndim != 2 or z.shape[1] != 3:
        raise UnsupportedDimensionError("max_score_2d needs rows (y, x1, x2), i.e. d = 2")
    if grid_size < 1:
        raise DomainError("grid_size must be >= 1")
    thetas = angle_grid(grid_size)
    scores = z[:, 0] @ sgn(z[:, 1:] @ thetas.T)
    return thetas[int(np.argmax(scores))]


def angle_grid(grid_size: int) -> np.ndarray:
    phi = 2.0 * np.pi * np.arange(grid_size) / grid_size
    return np.column_stack([np.cos(phi), np.sin(phi)])


def sample_quantile(values, gamma: float) -> np.ndarray:
    """The ``ceil(gamma * n)``-th order statistic, as a length-1 vector."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("sample quantile of an empty sample")
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    n = v.size
    # tolerance absorbs binary rounding of gamma, e.g. 0.1 * 30
    k = min(max(math.ceil(gamma * n - 1e-9), 1), n)
    return np.array([np.partition(v, k - 1)[k - 1]])
