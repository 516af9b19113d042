"""Split-sample confidence sets for M-estimation."""

from .confsets import (
    Hull,
    MembershipResult,
    MethodKind,
    MethodSpec,
    check_capability,
    clt_threshold,
    contains,
    eb_threshold,
    interval_hull_1d,
    ray_widths,
)
from .errors import (
    CapabilityError,
    ConfigError,
    DomainError,
    SingularityError,
    SplitConfError,
    UnsupportedDimensionError,
)
from .estimators import (
    SplitIndices,
    max_score_2d,
    ols_estimator,
    sample_mean_estimator,
    sample_quantile,
    split,
)
from .losses import (
    DiffStats,
    LossModel,
    gaussian_regression_loglik,
    loss_diff_stats,
    loss_diffs,
    manski_loss,
    mean_loss,
    pinball_loss,
    regression_loss,
    scaled,
)
from .simulation import (
    CoverageConfig,
    CoverageReport,
    DgpKind,
    DgpSpec,
    WidthConfig,
    WidthReport,
    generate,
    run_coverage,
    run_width,
)
from .stats import RngStream, make_stream, normal_cdf, normal_quantile, sample_mean_var

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "check_capability",
    "clt_threshold",
    "ConfigError",
    "contains",
    "CoverageConfig",
    "CoverageReport",
    "DgpKind",
    "DgpSpec",
    "DiffStats",
    "DomainError",
    "eb_threshold",
    "gaussian_regression_loglik",
    "generate",
    "Hull",
    "interval_hull_1d",
    "loss_diff_stats",
    "loss_diffs",
    "LossModel",
    "make_stream",
    "manski_loss",
    "max_score_2d",
    "mean_loss",
    "MembershipResult",
    "MethodKind",
    "MethodSpec",
    "normal_cdf",
    "normal_quantile",
    "ols_estimator",
    "pinball_loss",
    "ray_widths",
    "regression_loss",
    "RngStream",
    "run_coverage",
    "run_width",
    "sample_mean_estimator",
    "sample_mean_var",
    "sample_quantile",
    "scaled",
    "SingularityError",
    "split",
    "SplitConfError",
    "SplitIndices",
    "UnsupportedDimensionError",
    "WidthConfig",
    "WidthReport",
]
