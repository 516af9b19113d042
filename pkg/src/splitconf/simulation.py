"""Data-generating processes and the Monte Carlo coverage and width engines.

Replication ``r`` always draws from ``make_stream(seed, r)``, so a report
depends only on the configuration and the set of replication ids, never on
how the replications were scheduled. Worker processes are capped by the
``SPLITCONF_THREADS`` environment variable (0 or unset: one per CPU).
"""

from __future__ import annotations

import enum
import logging
import math
import os
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .confsets import (
    MethodKind,
    MethodSpec,
    _Membership,
    _line_hull,
    check_capability,
    default_search_radius,
    DEFAULT_GRID_POINTS,
)
from .errors import CapabilityError, DomainError, SingularityError
from .estimators import (
    DEFAULT_ANGLES,
    max_score_2d,
    ols_estimator,
    sample_mean_estimator,
    sample_quantile,
    split,
)
from .losses import (
    LossModel,
    gaussian_regression_loglik,
    manski_loss,
    mean_loss,
    pinball_loss,
    regression_loss,
    sgn,
)
from .stats import RngStream, make_stream

log = logging.getLogger(__name__)

__all__ = [
    "CoverageCell",
    "CoverageConfig",
    "CoverageReport",
    "DgpKind",
    "DgpSpec",
    "WidthCell",
    "WidthConfig",
    "WidthReport",
    "fit_initial",
    "generate",
    "model_for",
    "run_coverage",
    "run_width",
    "worker_count",
]


class DgpKind(str, enum.Enum):
    LINEAR_GAUSSIAN = "LinearGaussian"
    LINEAR_LAPLACE = "LinearLaplace"
    HD_MEAN = "HDMean"
    MANSKI_2D = "Manski2D"
    QUANTILE_HOLDER = "QuantileHolder"


@dataclass(frozen=True)
class DgpSpec:
    """A data-generating process.

    ``theta`` overrides the default target: ``d**-0.5 * ones`` for the
    linear and mean models, ``(1, 0)`` for Manski. ``variances`` is the
    diagonal covariance of the mean model. ``beta`` and ``gamma`` set the
    Hölder exponent of the CDF at the quantile and the quantile level.
    """

    kind: DgpKind
    n_total: int
    dim: int = 1
    theta: tuple[float, ...] | None = None
    variances: tuple[float, ...] | None = None
    beta: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", DgpKind(self.kind))
        if self.n_total < 4:
            raise DomainError("n_total must be >= 4")
        if self.dim < 1:
            raise DomainError("dim must be >= 1")
        if self.theta is not None:
            object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
            if len(self.theta) != self.dim:
                raise DomainError("theta must have length dim")
        if self.kind is DgpKind.HD_MEAN and self.variances is not None:
            object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
            if len(self.variances) != self.dim or min(self.variances) < 0:
                raise DomainError("variances must be dim nonnegative values")
        if self.kind is DgpKind.MANSKI_2D:
            if self.dim != 2:
                raise DomainError("Manski2D is two-dimensional")
            if self.theta is not None and abs(math.hypot(*self.theta) - 1.0) > 1e-10:
                raise DomainError("Manski2D theta must have unit norm")
        if self.kind is DgpKind.QUANTILE_HOLDER:
            if self.dim != 1:
                raise DomainError("QuantileHolder is one-dimensional")
            if not self.beta > 0:
                raise DomainError("beta must be positive")
            if not 0.0 < self.gamma < 1.0:
                raise DomainError("gamma must lie in (0, 1)")

    @property
    def true_theta(self) -> np.ndarray:
        if self.kind is DgpKind.QUANTILE_HOLDER:
            return np.zeros(1)
        if self.theta is not None:
            return np.array(self.theta)
        if self.kind is DgpKind.MANSKI_2D:
            return np.array([1.0, 0.0])
        return np.full(self.dim, self.dim ** -0.5)

    def with_n(self, n_total: int) -> "DgpSpec":
        return replace(self, n_total=n_total)


def generate(dgp: DgpSpec, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n_total`` rows from ``dgp``; returns ``(rows, true_theta)``."""
    N, d, theta = dgp.n_total, dgp.dim, dgp.true_theta
    kind = dgp.kind
    if kind in (DgpKind.LINEAR_GAUSSIAN, DgpKind.LINEAR_LAPLACE):
        x = stream.standard_normal((N, d))
        eps = stream.standard_normal(N) if kind is DgpKind.LINEAR_GAUSSIAN else stream.laplace(N)
        return np.column_stack([x @ theta + eps, x]), theta
    if kind is DgpKind.HD_MEAN:
        sd = np.ones(d) if dgp.variances is None else np.sqrt(dgp.variances)
        return theta + stream.standard_normal((N, d)) * sd, theta
    if kind is DgpKind.MANSKI_2D:
        x = stream.standard_normal((N, 2))
        eps = stream.standard_normal(N)
        return np.column_stack([sgn(x @ theta + eps), x]), theta
    # F(x) = gamma + sign(x)|x|^beta / 2 near 0, so the gamma-quantile is 0
    c = stream.uniform(N) - dgp.gamma
    x = np.sign(c) * (2.0 * np.abs(c)) ** (1.0 / dgp.beta)
    return x.reshape(-1, 1), theta


def model_for(dgp: DgpSpec, method: MethodSpec) -> LossModel:
    kind = dgp.kind
    if kind in (DgpKind.LINEAR_GAUSSIAN, DgpKind.LINEAR_LAPLACE):
        if method.kind is MethodKind.UI:
            return gaussian_regression_loglik(dgp.dim, method.sigma)
        return regression_loss(dgp.dim)
    if kind is DgpKind.HD_MEAN:
        return mean_loss(dgp.dim)
    if kind is DgpKind.MANSKI_2D:
        return manski_loss(2)
    return pinball_loss(dgp.gamma)


def check_methods(dgp: DgpSpec, methods: Iterable[MethodSpec]) -> None:
    """Raise CapabilityError for any method the DGP's loss cannot support."""
    for m in methods:
        try:
            check_capability(m, model_for(dgp, m))
        except CapabilityError as exc:
            raise CapabilityError(f"{m.label} is incompatible with {dgp.kind.value}: {exc}") from None


def fit_initial(dgp: DgpSpec, d1: np.ndarray) -> tuple[np.ndarray, bool]:
    """Initial estimate on D1 and whether the OLS fallback was needed."""
    kind = dgp.kind
    if kind in (DgpKind.LINEAR_GAUSSIAN, DgpKind.LINEAR_LAPLACE):
        try:
            return ols_estimator(d1), False
        except SingularityError:
            sol = np.linalg.lstsq(d1[:, 1:], d1[:, 0], rcond=None)[0]
            return sol, True
    if kind is DgpKind.HD_MEAN:
        return sample_mean_estimator(d1), False
    if kind is DgpKind.MANSKI_2D:
        return max_score_2d(d1, DEFAULT_ANGLES), False
    return sample_quantile(d1[:, 0], dgp.gamma), False


def worker_count() -> int:
    raw = os.environ.get("SPLITCONF_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"SPLITCONF_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise DomainError("SPLITCONF_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _fan_out(fn, args: tuple, rep_ids: Sequence[int], workers: int | None):
    """Run ``fn(*args, chunk)`` over chunks of replication ids; flat result list."""
    workers = worker_count() if workers is None else workers
    rep_ids = list(rep_ids)
    if workers <= 1 or len(rep_ids) < 2 * workers:
        return fn(*args, rep_ids)
    chunks = [rep_ids[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(fn, *zip(*[(*args, c) for c in chunks]))
        out = [item for part in parts for item in part]
    return sorted(out, key=lambda item: item[0])


# ----------------------------------------------------------------- coverage


@dataclass(frozen=True)
class CoverageConfig:
    dgp: DgpSpec
    methods: tuple[MethodSpec, ...]
    reps: int = 1000
    seed: int = 0
    ratio: float = 0.5
    shuffle: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        if not self.methods:
            raise DomainError("at least one method is required")


@dataclass(frozen=True)
class CoverageCell:
    method: MethodSpec
    covered: int
    reps: int

    @property
    def coverage(self) -> float:
        return self.covered / self.reps

    @property
    def mc_stderr(self) -> float:
        p = self.coverage
        return math.sqrt(p * (1.0 - p) / self.reps)


@dataclass(frozen=True)
class CoverageReport:
    """Coverage of ``dgp.true_theta`` per method.

    ``self_check_failures`` counts (replication, method) pairs where the
    initial estimate was not in its own set; it must be zero.
    """

    dgp: DgpSpec
    seed: int
    cells: tuple[CoverageCell, ...]
    replications: frozenset[int] = field(default_factory=frozenset)
    self_check_failures: int = 0
    estimator_fallbacks: int = 0

    @property
    def reps(self) -> int:
        return len(self.replications)

    def cell(self, label: str, alpha: float | None = None) -> CoverageCell:
        for c in self.cells:
            if c.method.label == label and (alpha is None or c.method.alpha == alpha):
                return c
        raise KeyError(label)

    def merge(self, other: "CoverageReport") -> "CoverageReport":
        if (self.dgp, self.seed) != (other.dgp, other.seed):
            raise DomainError("can only merge reports of the same DGP and seed")
        if self.replications & other.replications:
            raise DomainError("reports share replications")
        if [c.method for c in self.cells] != [c.method for c in other.cells]:
            raise DomainError("reports cover different methods")
        cells = tuple(
            CoverageCell(a.method, a.covered + b.covered, a.reps + b.reps)
            for a, b in zip(self.cells, other.cells)
        )
        return CoverageReport(
            self.dgp,
            self.seed,
            cells,
            self.replications | other.replications,
            self.self_check_failures + other.self_check_failures,
            self.estimator_fallbacks + other.estimator_fallbacks,
        )


def _prepare(dgp: DgpSpec, ratio: float, shuffle: bool, seed: int, r: int):
    stream = make_stream(seed, r)
    data, truth = generate(dgp, stream)
    idx = split(dgp.n_total, ratio, shuffle, stream)
    d1, d2 = idx.apply(data)
    theta_hat1, fallback = fit_initial(dgp, d1)
    return d2, truth, theta_hat1, fallback


def _coverage_chunk(config: CoverageConfig, rep_ids):
    models = [model_for(config.dgp, m) for m in config.methods]
    out = []
    for r in rep_ids:
        d2, truth, theta_hat1, fallback = _prepare(config.dgp, config.ratio, config.shuffle, config.seed, r)
        hits, bad = [], 0
        for method, model in zip(config.methods, models):
            ev = _Membership(method, model, theta_hat1, d2)
            hits.append(ev(truth).contained)
            bad += not ev(theta_hat1).contained
        out.append((r, tuple(hits), bad, fallback))
    return out


def run_coverage(config: CoverageConfig, replications: Iterable[int] | None = None,
                 workers: int | None = None) -> CoverageReport:
    """Monte Carlo coverage of the true parameter for every configured method."""
    check_methods(config.dgp, config.methods)
    rep_ids = sorted(set(range(config.reps) if replications is None else replications))
    if not rep_ids:
        raise DomainError("no replications requested")
    results = _fan_out(_coverage_chunk, (config,), rep_ids, workers)
    covered = np.zeros(len(config.methods), dtype=int)
    bad = fallbacks = 0
    for _, hits, b, fb in results:
        covered += np.array(hits, dtype=int)
        bad += b
        fallbacks += fb
    if bad:
        log.error("initial estimate outside its own set in %d cases", bad)
    cells = tuple(CoverageCell(m, int(c), len(rep_ids)) for m, c in zip(config.methods, covered))
    return CoverageReport(config.dgp, config.seed, cells, frozenset(rep_ids), bad, fallbacks)


# -------------------------------------------------------------------- width


@dataclass(frozen=True)
class WidthConfig:
    """Width study over several total sample sizes.

    ``dgp.n_total`` is ignored; each entry of ``n_values`` replaces it.
    The search window starts at ``search_radius`` (or the default radius)
    and doubles up to ``max_expansions`` times while the set touches it.
    """

    dgp: DgpSpec
    n_values: tuple[int, ...]
    methods: tuple[MethodSpec, ...]
    reps: int = 200
    seed: int = 0
    ratio: float = 0.5
    shuffle: bool = False
    grid_points: int = DEFAULT_GRID_POINTS
    search_radius: float | None = None
    max_expansions: int = 6

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        if not self.n_values or not self.methods:
            raise DomainError("need at least one sample size and one method")


@dataclass(frozen=True)
class WidthCell:
    method: MethodSpec
    N: int
    n: int
    widths: tuple[float, ...]
    truncations: int
    covered: int

    @property
    def reps(self) -> int:
        return len(self.widths)

    @property
    def median(self) -> float:
        return float(np.median(self.widths))

    @property
    def iqr(self) -> float:
        q1, q3 = np.percentile(self.widths, [25, 75])
        return float(q3 - q1)

    @property
    def coverage(self) -> float:
        return self.covered / self.reps

    @property
    def mc_stderr(self) -> float:
        p = self.coverage
        return math.sqrt(p * (1.0 - p) / self.reps)


@dataclass(frozen=True)
class WidthReport:
    dgp: DgpSpec
    seed: int
    cells: tuple[WidthCell, ...]

    def cell(self, label: str, N: int) -> WidthCell:
        for c in self.cells:
            if c.method.label == label and c.N == N:
                return c
        raise KeyError((label, N))

    def ratio(self, label: str, n_small: int, n_large: int) -> float:
        return self.cell(label, n_small).median / self.cell(label, n_large).median


def _set_width(ev: _Membership, config: WidthConfig) -> tuple[float, bool]:
    """Width (1-D) or largest coordinate chord (d > 1) of one set."""
    d = ev.model.param_dim
    directions = np.eye(d)
    best, truncated_any = 0.0, False
    for u in directions:
        radius = config.search_radius
        if radius is None:
            radius = default_search_radius(ev.method, ev.model, ev.theta_hat1, ev.z, direction=u)
        for _ in range(config.max_expansions + 1):
            lo, hi, truncated = _line_hull(
                lambda t: ev(ev.theta_hat1 + t * u).contained, radius, config.grid_points
            )
            if not truncated:
                break
            radius *= 2.0
        best = max(best, hi - lo)
        truncated_any |= truncated
    return best, truncated_any


def _width_chunk(config: WidthConfig, N: int, rep_ids):
    dgp = config.dgp.with_n(N)
    models = [model_for(dgp, m) for m in config.methods]
    out = []
    for r in rep_ids:
        d2, truth, theta_hat1, _ = _prepare(dgp, config.ratio, config.shuffle, config.seed, r)
        row = []
        for method, model in zip(config.methods, models):
            ev = _Membership(method, model, theta_hat1, d2)
            width, truncated = _set_width(ev, config)
            row.append((width, truncated, ev(truth).contained, d2.shape[0]))
        out.append((r, row))
    return out


def run_width(config: WidthConfig, workers: int | None = None) -> WidthReport:
    """Median set width per (method, N) over replications."""
    check_methods(config.dgp.with_n(config.n_values[0]), config.methods)
    cells = []
    for N in config.n_values:
        results = _fan_out(_width_chunk, (config, N), range(config.reps), workers)
        for j, method in enumerate(config.methods):
            entries = [row[j] for _, row in results]
            cells.append(
                WidthCell(
                    method=method,
                    N=N,
                    n=entries[0][3],
                    widths=tuple(sorted(e[0] for e in entries)),
                    truncations=sum(e[1] for e in entries),
                    covered=sum(e[2] for e in entries),
                )
            )
    return WidthReport(config.dgp, config.seed, tuple(cells))
