"""Loss models and per-row loss differences.

Every loss works on a 2-D array of observation rows and returns one value per
row. Row layouts:

* mean loss and pinball loss: ``x`` (``d`` columns, or one column)
* regression, Gaussian log-likelihood and Manski losses: ``(y, x_1, ..., x_d)``
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

__all__ = [
    "DiffStats",
    "LossModel",
    "finite_difference_hessian",
    "gaussian_regression_loglik",
    "loss_diff_stats",
    "loss_diffs",
    "manski_loss",
    "mean_loss",
    "pinball_loss",
    "regression_loss",
    "scaled",
    "sgn",
]

RowFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LossModel:
    """A loss ``m_theta(z)`` together with the extras some methods need.

    Attributes
    ----------
    name : str
    param_dim : int
        Length of the parameter vector.
    row_width : int
        Number of columns in an observation row.
    loss : callable
        ``loss(theta, rows) -> ndarray`` of per-row losses.
    uniform_bound : float, optional
        ``B0`` with ``|m_t1(z) - m_t2(z)| <= B0`` for all parameters and rows.
    log_likelihood : callable, optional
        ``log_likelihood(theta, rows) -> ndarray``; needed for universal
        inference.
    hessian_estimator : callable, optional
        ``hessian_estimator(rows) -> (d, d) ndarray`` estimating the Hessian
        of ``theta -> E m_theta``.
    smooth : bool
        Whether a finite-difference Hessian is meaningful when no analytic
        estimator is supplied.
    """

    name: str
    param_dim: int
    row_width: int
    loss: RowFn
    uniform_bound: float | None = None
    log_likelihood: RowFn | None = None
    hessian_estimator: Callable[[np.ndarray], np.ndarray] | None = None
    smooth: bool = False

    def rows(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(-1, 1) if self.row_width == 1 else z.reshape(1, -1)
        if z.ndim != 2 or z.shape[1] != self.row_width:
            raise DomainError(
                f"{self.name}: rows must have {self.row_width} columns, got shape {z.shape}"
            )
        return z

    def theta(self, theta) -> np.ndarray:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.param_dim,):
            raise DomainError(
                f"{self.name}: parameter must have length {self.param_dim}, got {t.shape}"
            )
        return t

    def evaluate(self, theta, z) -> np.ndarray:
        return self.loss(self.theta(theta), self.rows(z))

    def loglik(self, theta, z) -> np.ndarray:
        if self.log_likelihood is None:
            raise DomainError(f"{self.name} has no log-likelihood")
        return self.log_likelihood(self.theta(theta), self.rows(z))


@dataclass(frozen=True)
class DiffStats:
    emp_mean: float
    emp_var: float
    n: int


def loss_diffs(model: LossModel, theta, theta_hat1, rows) -> np.ndarray:
    """Per-row ``m_theta(z_i) - m_theta_hat1(z_i)``."""
    z = model.rows(rows)
    return model.loss(model.theta(theta), z) - model.loss(model.theta(theta_hat1), z)


def diff_stats_from(diffs: np.ndarray) -> DiffStats:
    n = diffs.size
    if n < 2:
        raise DomainError("need at least 2 rows of D2")
    mean = float(diffs.mean())
    if diffs.min() == diffs.max():
        return DiffStats(emp_mean=float(diffs[0]), emp_var=0.0, n=n)
    dev = diffs - mean
    var = (float(np.dot(dev, dev)) - float(dev.sum()) ** 2 / n) / (n - 1)
    return DiffStats(emp_mean=mean, emp_var=max(var, 0.0), n=n)


def loss_diff_stats(model: LossModel, theta, theta_hat1, d2_rows) -> DiffStats:
    """Empirical mean and (n-1) variance of the loss difference over D2."""
    return diff_stats_from(loss_diffs(model, theta, theta_hat1, d2_rows))


def sgn(t):
    """Sign with ``sgn(0) = +1``."""
    return np.where(np.asarray(t) >= 0, 1.0, -1.0)


def _gram(x: np.ndarray) -> np.ndarray:
    return x.T @ x / x.shape[0]


def mean_loss(d: int) -> LossModel:
    if d < 1:
        raise DomainError("dimension must be >= 1")

    def loss(theta, x):
        r = x - theta
        return np.einsum("ij,ij->i", r, r)

    two_eye = 2.0 * np.eye(d)
    return LossModel(
        name="mean",
        param_dim=d,
        row_width=d,
        loss=loss,
        hessian_estimator=lambda rows: two_eye.copy(),
        smooth=True,
    )


def regression_loss(d: int) -> LossModel:
    """Squared error ``(y - theta'x)^2``; Hessian estimate is twice the Gram matrix."""
    if d < 1:
        raise DomainError("dimension must be >= 1")

    def loss(theta, z):
        r = z[:, 0] - z[:, 1:] @ theta
        return r * r

    return LossModel(
        name="regression",
        param_dim=d,
        row_width=d + 1,
        loss=loss,
        hessian_estimator=lambda rows: 2.0 * _gram(np.asarray(rows, dtype=float)[:, 1:]),
        smooth=True,
    )


def gaussian_regression_loglik(d: int, sigma: float) -> LossModel:
    """Gaussian linear model with fixed noise scale ``sigma``.

    The loss is the negative log-likelihood, so the Hessian estimate is the
    sample Gram matrix divided by ``sigma**2``.
    """
    if d < 1:
        raise DomainError("dimension must be >= 1")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    s2 = float(sigma) ** 2
    const = -0.5 * np.log(2.0 * np.pi * s2)

    def loglik(theta, z):
        r = z[:, 0] - z[:, 1:] @ theta
        return const - r * r / (2.0 * s2)

    return LossModel(
        name=f"gaussian-loglik(sigma={sigma:g})",
        param_dim=d,
        row_width=d + 1,
        loss=lambda theta, z: -loglik(theta, z),
        log_likelihood=loglik,
        hessian_estimator=lambda rows: _gram(np.asarray(rows, dtype=float)[:, 1:]) / s2,
        smooth=True,
    )


def manski_loss(d: int) -> LossModel:
    """Maximum-score loss ``-y * sgn(theta'x)`` for labels in {-1, +1}."""
    if d < 1:
        raise DomainError("dimension must be >= 1")

    def loss(theta, z):
        y = z[:, 0]
        if not np.all((y == 1.0) | (y == -1.0)):
            raise DomainError("Manski loss needs labels y in {-1, +1}")
        return -y * sgn(z[:, 1:] @ theta)

    return LossModel(name="manski", param_dim=d, row_width=d + 1, loss=loss, uniform_bound=2.0)


def pinball_loss(gamma: float) -> LossModel:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")

    def loss(theta, x):
        u = x[:, 0] - theta[0]
        return np.maximum(gamma * u, (gamma - 1.0) * u)

    return LossModel(name=f"pinball(gamma={gamma:g})", param_dim=1, row_width=1, loss=loss)


def scaled(model: LossModel, c: float) -> LossModel:
    """The loss ``c * m_theta`` with its bound and Hessian rescaled to match."""
    if not c > 0:
        raise DomainError("scale must be positive")
    base, hess = model.loss, model.hessian_estimator
    return replace(
        model,
        name=f"{c:g}*{model.name}",
        loss=lambda theta, z: c * base(theta, z),
        uniform_bound=None if model.uniform_bound is None else c * model.uniform_bound,
        hessian_estimator=None if hess is None else (lambda rows: c * hess(rows)),
    )


def finite_difference_hessian(model: LossModel, theta, rows, h: float | None = None) -> np.ndarray:
    """Central-difference Hessian of ``theta -> mean_i m_theta(z_i)``."""
    t = model.theta(theta)
    z = model.rows(rows)
    if h is None:
        h = 1e-4 * (1.0 + float(np.linalg.norm(t)))

    def f(p):
        return float(model.loss(p, z).mean())

    d = t.size
    hess = np.empty((d, d))
    eye = np.eye(d) * h
    f0 = f(t)
    for i in range(d):
        hess[i, i] = (f(t + eye[i]) - 2.0 * f0 + f(t - eye[i])) / (h * h)
        for j in range(i + 1, d):
            v = (
                f(t + eye[i] + eye[j]) - f(t + eye[i] - eye[j])
                - f(t - eye[i] + eye[j]) + f(t - eye[i] - eye[j])
            ) / (4.0 * h * h)
            hess[i, j] = hess[j, i] = v
    return hess
