"""Membership tests for the split-sample confidence sets and their geometry.

All sets have the form ``{theta : statistic(theta) <= threshold(theta)}``
evaluated on the inference block D2, with ``theta_hat1`` fitted on D1:

=================== ========================================= ==============================
method              statistic                                 threshold
=================== ========================================= ==============================
Naive               P_n(m_theta - m_hat)                      0
UniversalInference  sum_i log p_hat(z_i) - log p_theta(z_i)   log(1/alpha)
EmpiricalBernstein  P_n(m_theta - m_hat)                      eb_threshold
Studentized         P_n(m_theta - m_hat)                      z_alpha * sd / sqrt(n)
BiasCorrected       Studentized + (1/2) h' H h, h = hat-theta z_alpha * sd / sqrt(n)
=================== ========================================= ==============================
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, DomainError, SplitConfError
from .losses import DiffStats, LossModel, diff_stats_from, finite_difference_hessian
from .stats import normal_quantile

__all__ = [
    "Hull",
    "MembershipResult",
    "MethodKind",
    "MethodSpec",
    "check_capability",
    "clt_threshold",
    "contains",
    "default_search_radius",
    "eb_threshold",
    "interval_hull_1d",
    "ray_widths",
]

BISECTION_STEPS = 40
DEFAULT_GRID_POINTS = 201


class MethodKind(str, enum.Enum):
    NAIVE = "Naive"
    UI = "UniversalInference"
    EB = "EmpiricalBernstein"
    STUDENTIZED = "Studentized"
    BC = "BiasCorrected"


@dataclass(frozen=True)
class MethodSpec:
    """A confidence-set construction and its parameters.

    ``sigma`` is the working noise scale of the Gaussian likelihood used by
    universal inference; ``b0`` the uniform loss bound used by the empirical
    Bernstein threshold.
    """

    kind: MethodKind
    alpha: float = 0.05
    b0: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MethodKind(self.kind))
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0,1)")
        if self.kind is MethodKind.EB and not (self.b0 is not None and self.b0 > 0):
            raise DomainError("the empirical Bernstein method needs b0 > 0")
        if self.kind is MethodKind.UI:
            sigma = 1.0 if self.sigma is None else self.sigma
            if not sigma > 0:
                raise DomainError("sigma must be positive")
            object.__setattr__(self, "sigma", float(sigma))

    @property
    def requires_loglik(self) -> bool:
        return self.kind is MethodKind.UI

    @property
    def label(self) -> str:
        if self.kind is MethodKind.UI:
            return f"UI-sigma={self.sigma!r}"
        if self.kind is MethodKind.EB:
            return f"EB-B0={float(self.b0)!r}"
        return self.kind.value


@dataclass(frozen=True)
class MembershipResult:
    statistic: float
    threshold: float
    contained: bool
    diff_stats: DiffStats


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0,1)")


def eb_threshold(stats: DiffStats, b0: float, alpha: float) -> float:
    """Empirical Bernstein bound ``sqrt(2 v log(2/a) / n) + 7 B0 log(2/a) / (3(n-1))``."""
    _check_alpha(alpha)
    if stats.n < 2:
        raise DomainError("need n >= 2")
    if not b0 > 0:
        raise DomainError("b0 must be positive")
    log_term = math.log(2.0 / alpha)
    n = stats.n
    return math.sqrt(2.0 * stats.emp_var * log_term / n) + 7.0 * b0 * log_term / (3.0 * (n - 1))


def clt_threshold(stats: DiffStats, alpha: float) -> float:
    _check_alpha(alpha)
    if stats.n < 2:
        raise DomainError("need n >= 2")
    return normal_quantile(1.0 - alpha) * math.sqrt(stats.emp_var) / math.sqrt(stats.n)


def check_capability(method: MethodSpec, model: LossModel) -> None:
    """Raise CapabilityError unless ``model`` supports ``method``."""
    kind = method.kind
    if kind is MethodKind.UI and model.log_likelihood is None:
        raise CapabilityError(f"universal inference needs a log-likelihood; {model.name} has none")
    if kind is MethodKind.EB and model.uniform_bound is None:
        raise CapabilityError(f"the empirical Bernstein set needs a bounded loss; {model.name} is unbounded")
    if kind is MethodKind.BC and model.hessian_estimator is None and not model.smooth:
        raise CapabilityError(f"bias correction needs a Hessian estimate; {model.name} has none")


class _Membership:
    """Membership evaluator with the theta-independent parts precomputed."""

    def __init__(self, method: MethodSpec, model: LossModel, theta_hat1, d2_rows):
        self.method = method
        self.model = model
        self.z = model.rows(d2_rows)
        if self.z.shape[0] < 2:
            raise DomainError("D2 needs at least 2 rows")
        self.theta_hat1 = model.theta(theta_hat1)
        check_capability(method, model)
        kind = method.kind
        if kind is MethodKind.UI:
            self.base = model.log_likelihood(self.theta_hat1, self.z)
        else:
            self.base = model.loss(self.theta_hat1, self.z)
        self.hessian = None
        if kind is MethodKind.BC:
            if model.hessian_estimator is not None:
                self.hessian = np.asarray(model.hessian_estimator(self.z), dtype=float)
            else:
                self.hessian = finite_difference_hessian(model, self.theta_hat1, self.z)
        self.z_alpha = normal_quantile(1.0 - method.alpha) if kind in (MethodKind.STUDENTIZED, MethodKind.BC) else None

    def __call__(self, theta) -> MembershipResult:
        theta = self.model.theta(theta)
        kind = self.method.kind
        n = self.z.shape[0]
        if kind is MethodKind.UI:
            diffs = self.base - self.model.log_likelihood(theta, self.z)
        else:
            diffs = self.model.loss(theta, self.z) - self.base
        stats = diff_stats_from(diffs)
        if kind is MethodKind.NAIVE:
            statistic, threshold = stats.emp_mean, 0.0
        elif kind is MethodKind.UI:
            statistic, threshold = float(diffs.sum()), math.log(1.0 / self.method.alpha)
        elif kind is MethodKind.EB:
            statistic, threshold = stats.emp_mean, eb_threshold(stats, self.method.b0, self.method.alpha)
        else:
            threshold = self.z_alpha * math.sqrt(stats.emp_var) / math.sqrt(n)
            statistic = stats.emp_mean
            if kind is MethodKind.BC:
                h = self.theta_hat1 - theta
                statistic += 0.5 * float(h @ self.hessian @ h)
        return MembershipResult(float(statistic), float(threshold), bool(statistic <= threshold), stats)


def contains(method: MethodSpec, model: LossModel, theta, theta_hat1, d2_rows) -> MembershipResult:
    """Test whether ``theta`` belongs to the confidence set built on D2."""
    return _Membership(method, model, theta_hat1, d2_rows)(theta)


class Hull(NamedTuple):
    """Extent of a confidence set along a line.

    For :func:`interval_hull_1d` ``lo``/``hi`` are parameter values; for
    :func:`ray_widths` they are offsets ``t`` along the ray, and ``width``
    is the chord length.
    """

    lo: float
    hi: float
    width: float
    truncated: bool


def _line_hull(member: Callable[[float], bool], radius: float, grid_points: int) -> tuple[float, float, bool]:
    """Grid scan over ``[-radius, radius]`` plus bisection at both extremes."""
    if grid_points < 16:
        raise DomainError("grid_points must be >= 16")
    if not radius > 0:
        raise DomainError("search_radius must be positive")
    # exactly symmetric about 0 so that opposite rays see mirrored grids
    half = np.linspace(0.0, radius, (grid_points + 1) // 2 + 1)
    grid = np.concatenate([-half[:0:-1], half])
    inside = np.fromiter((member(t) for t in grid), dtype=bool, count=grid.size)
    if not inside.any():
        raise SplitConfError("empty confidence set: the initial estimate itself is not contained")
    idx = np.flatnonzero(inside)
    i_lo, i_hi = idx[0], idx[-1]
    truncated = i_lo == 0 or i_hi == grid.size - 1

    def refine(a, b):
        # a contained, b not
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (a + b)
            if member(mid):
                a = mid
            else:
                b = mid
        return a

    hi = grid[i_hi] if i_hi == grid.size - 1 else refine(grid[i_hi], grid[i_hi + 1])
    lo = grid[i_lo] if i_lo == 0 else refine(grid[i_lo], grid[i_lo - 1])
    return float(lo), float(hi), bool(truncated)


def default_search_radius(method: MethodSpec, model: LossModel, theta_hat1, d2_rows, direction=None) -> float:
    """``10 * sqrt(threshold) + 1`` with the threshold probed one unit from ``theta_hat1``."""
    ev = _Membership(method, model, theta_hat1, d2_rows)
    u = np.zeros(model.param_dim) if direction is None else np.asarray(direction, dtype=float)
    if direction is None:
        u[0] = 1.0
    t = max(ev(ev.theta_hat1 + u).threshold, ev(ev.theta_hat1 - u).threshold, 0.0)
    return 10.0 * math.sqrt(t) + 1.0


def interval_hull_1d(
    method: MethodSpec,
    model: LossModel,
    theta_hat1,
    d2_rows,
    search_radius: float | None = None,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> Hull:
    """Smallest and largest contained parameter of a one-dimensional set.

    The set may be disconnected; the grid over ``theta_hat1 +- search_radius``
    finds every component wider than the grid step, and each extreme is
    refined by bisection. ``truncated`` is set when the set reaches the end
    of the search window.
    """
    if model.param_dim != 1:
        raise DomainError("interval_hull_1d needs a one-dimensional parameter")
    ev = _Membership(method, model, theta_hat1, d2_rows)
    if search_radius is None:
        search_radius = default_search_radius(method, model, theta_hat1, d2_rows)
    c = float(ev.theta_hat1[0])
    lo, hi, truncated = _line_hull(lambda t: ev(np.array([c + t])).contained, search_radius, grid_points)
    return Hull(c + lo, c + hi, hi - lo, truncated)


def ray_widths(
    method: MethodSpec,
    model: LossModel,
    theta_hat1,
    d2_rows,
    directions: Sequence,
    search_radius: float | None = None,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> list[Hull]:
    """Chord of the set along each line ``theta_hat1 + t u``.

    The largest chord is a lower bound on the diameter.
    """
    ev = _Membership(method, model, theta_hat1, d2_rows)
    out = []
    for u in directions:
        u = np.asarray(u, dtype=float)
        if u.shape != (model.param_dim,) or abs(np.linalg.norm(u) - 1.0) > 1e-10:
            raise DomainError("directions must be unit vectors of the parameter dimension")
        radius = search_radius
        if radius is None:
            radius = default_search_radius(method, model, theta_hat1, d2_rows, direction=u)
        lo, hi, truncated = _line_hull(lambda t: ev(ev.theta_hat1 + t * u).contained, radius, grid_points)
        out.append(Hull(lo, hi, hi - lo, truncated))
    return out
