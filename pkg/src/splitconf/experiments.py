"""Experiment presets, the key-value config format, and CSV/SVG writers for runs.

Config files are flat ``key=value`` lines; ``#`` starts a comment. Keys:

=============  ========================================================
dgp            LinearGaussian, LinearLaplace, HDMean, Manski2D or QuantileHolder
n              total sample size N; a comma list runs one cell per N
d              dimension (default 1; 2 for Manski2D)
methods        comma list of naive, ui[:sigma], eb[:b0], studentized, bc
alpha          level, or a comma list of levels (default 0.05)
reps           replications (default 1000)
seed           master seed (default 0)
ratio          |D1| / N (default 0.5)
mode           coverage or width (default: the subcommand)
beta, gamma    QuantileHolder shape and quantile level
variances      comma list of HDMean coordinate variances
shuffle        true/false, randomize the split (default false)
grid_points    width scan resolution (default 201)
name           experiment name used in the CSV (default: file stem)
=============  ========================================================
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .confsets import MethodKind, MethodSpec, _Membership
from .errors import CapabilityError, ConfigError, DomainError
from .estimators import split
from .output import CsvRow, svg_line_chart, write_csv
from .simulation import (
    CoverageConfig,
    CoverageReport,
    DgpKind,
    DgpSpec,
    WidthConfig,
    WidthReport,
    check_methods,
    fit_initial,
    generate,
    model_for,
    run_coverage,
    run_width,
)
from .stats import make_stream

__all__ = [
    "Experiment",
    "PRESETS",
    "PresetResult",
    "expand_preset",
    "membership_check",
    "parse_config",
    "parse_methods",
    "run_custom",
    "run_preset",
]

DEFAULT_REPS = 1000
SMOKE_REPS = 25

FIG1_N = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000)
FIG1_D = (2, 5, 10, 25, 50, 100, 150, 200, 250)


def _fig1_methods(alpha: float = 0.05) -> tuple[MethodSpec, ...]:
    return (
        MethodSpec(MethodKind.UI, alpha, sigma=1.0),
        MethodSpec(MethodKind.UI, alpha, sigma=0.1),
        MethodSpec(MethodKind.STUDENTIZED, alpha),
        MethodSpec(MethodKind.BC, alpha),
    )


@dataclass(frozen=True)
class Experiment:
    """One CSV worth of cells.

    ``mode`` is ``"coverage"`` (one CoverageConfig per cell in ``configs``)
    or ``"width"`` (a single WidthConfig). ``axis`` names the swept
    quantity, ``"N"`` or ``"d"``.
    """

    name: str
    mode: str
    axis: str
    configs: tuple = field(default_factory=tuple)


def _coverage_sweep(name, kind, methods, reps, seed, n_values=None, d_values=None, n_fixed=500, d_fixed=5):
    if n_values is not None:
        cfgs = [CoverageConfig(DgpSpec(kind, N, d_fixed), methods, reps, seed) for N in n_values]
        return Experiment(name, "coverage", "N", tuple(cfgs))
    cfgs = [CoverageConfig(DgpSpec(kind, n_fixed, d), methods, reps, seed) for d in d_values]
    return Experiment(name, "coverage", "d", tuple(cfgs))


def _preset_fig1_left(seed, reps):
    return [_coverage_sweep("fig1-left", DgpKind.LINEAR_GAUSSIAN, _fig1_methods(), reps, seed, n_values=FIG1_N)]


def _preset_fig1_right(seed, reps):
    return [_coverage_sweep("fig1-right", DgpKind.LINEAR_GAUSSIAN, _fig1_methods(), reps, seed, d_values=FIG1_D)]


def _preset_laplace_left(seed, reps):
    return [_coverage_sweep("laplace-left", DgpKind.LINEAR_LAPLACE, _fig1_methods(), reps, seed, n_values=FIG1_N)]


def _preset_laplace_right(seed, reps):
    return [_coverage_sweep("laplace-right", DgpKind.LINEAR_LAPLACE, _fig1_methods(), reps, seed, d_values=FIG1_D)]


def _preset_mean_scaling(seed, reps):
    cfg = WidthConfig(DgpSpec(DgpKind.HD_MEAN, 1000, 1), (1000, 4000, 16000),
                      (MethodSpec(MethodKind.STUDENTIZED),), reps, seed)
    return [Experiment("mean-scaling", "width", "N", (cfg,))]


def _preset_quantile_scaling(seed, reps):
    out = []
    for beta in (1.0, 2.0):
        dgp = DgpSpec(DgpKind.QUANTILE_HOLDER, 500, 1, beta=beta, gamma=0.5)
        cfg = WidthConfig(dgp, (500, 2000, 8000), (MethodSpec(MethodKind.STUDENTIZED),), reps, seed)
        out.append(Experiment(f"quantile-scaling-beta={beta:g}", "width", "N", (cfg,)))
    return out


def _preset_manski(seed, reps):
    methods = tuple(MethodSpec(MethodKind.EB, a, b0=2.0) for a in (0.05, 0.1))
    cfgs = [CoverageConfig(DgpSpec(DgpKind.MANSKI_2D, N, 2), methods, reps, seed) for N in (200, 1000)]
    return [Experiment("manski-coverage", "coverage", "N", tuple(cfgs))]


PRESETS = {
    "fig1-left": _preset_fig1_left,
    "fig1-right": _preset_fig1_right,
    "laplace-left": _preset_laplace_left,
    "laplace-right": _preset_laplace_right,
    "mean-scaling": _preset_mean_scaling,
    "quantile-scaling": _preset_quantile_scaling,
    "manski-coverage": _preset_manski,
}


class UnknownPresetError(KeyError):
    def __str__(self):
        return f"unknown preset {self.args[0]!r}; choose from: {', '.join(PRESETS)}"


def expand_preset(name: str, seed: int = 0, reps: int = DEFAULT_REPS) -> list[Experiment]:
    if name not in PRESETS:
        raise UnknownPresetError(name)
    return PRESETS[name](seed, reps)


def preset_mode(name: str) -> str:
    return expand_preset(name, 0, 1)[0].mode


# -------------------------------------------------------------------- running


def _n2(N: int, ratio: float) -> int:
    idx = split(N, ratio)
    return int(idx.d2.size)


def coverage_rows(name: str, config: CoverageConfig, report: CoverageReport) -> list[CsvRow]:
    dgp = config.dgp
    n = _n2(dgp.n_total, config.ratio)
    return [
        CsvRow(name, c.method.kind.value, c.method.label, dgp.n_total, n, dgp.dim,
               float(c.method.alpha), c.reps, config.seed, c.coverage, c.mc_stderr)
        for c in report.cells
    ]


def width_rows(name: str, config: WidthConfig, report: WidthReport) -> list[CsvRow]:
    return [
        CsvRow(name, c.method.kind.value, c.method.label, c.N, c.n, config.dgp.dim,
               float(c.method.alpha), c.reps, config.seed, c.coverage, c.mc_stderr, c.median)
        for c in report.cells
    ]


def run_experiment(exp: Experiment, workers: int | None = None) -> list[CsvRow]:
    rows: list[CsvRow] = []
    if exp.mode == "coverage":
        for cfg in exp.configs:
            rows.extend(coverage_rows(exp.name, cfg, run_coverage(cfg, workers=workers)))
    else:
        for cfg in exp.configs:
            rows.extend(width_rows(exp.name, cfg, run_width(cfg, workers=workers)))
    return rows


def coverage_svg(exp: Experiment, rows: Sequence[CsvRow]) -> str:
    series: dict[str, list[tuple[float, float]]] = {}
    alphas = sorted({r.alpha for r in rows})
    for r in rows:
        key = r.label if len(alphas) == 1 else f"{r.label} alpha={r.alpha:g}"
        x = r.N if exp.axis == "N" else r.d
        series.setdefault(key, []).append((float(x), r.coverage))
    return svg_line_chart(series, exp.axis, alphas, title=exp.name, log_x=True)


@dataclass(frozen=True)
class PresetResult:
    csv_paths: tuple[Path, ...]
    svg_paths: tuple[Path, ...]
    rows: tuple[CsvRow, ...]


def _check_out_dir(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_preset(name: str, seed: int = 0, reps: int = DEFAULT_REPS, out_dir=".",
               svg: bool = True, workers: int | None = None) -> PresetResult:
    """Run every experiment of a preset, writing ``<experiment>.csv`` (and an SVG for coverage)."""
    experiments = expand_preset(name, seed, reps)
    out = _check_out_dir(out_dir)
    csvs, svgs, all_rows = [], [], []
    for exp in experiments:
        rows = run_experiment(exp, workers)
        csvs.append(write_csv(out / f"{exp.name}.csv", rows))
        if svg and exp.mode == "coverage":
            path = out / f"{exp.name}.svg"
            path.write_text(coverage_svg(exp, rows), encoding="utf-8", newline="\n")
            svgs.append(path)
        all_rows.extend(rows)
    return PresetResult(tuple(csvs), tuple(svgs), tuple(all_rows))


# --------------------------------------------------------------- config file

_KEYS = {
    "dgp", "n", "d", "methods", "alpha", "reps", "seed", "ratio", "mode",
    "beta", "gamma", "variances", "shuffle", "grid_points", "name",
}
_REQUIRED = ("dgp", "n", "methods")


def parse_methods(text: str, alphas: Sequence[float], dgp: DgpSpec | None = None) -> tuple[MethodSpec, ...]:
    """Method tokens crossed with the alpha levels.

    ``eb`` without a bound uses the DGP loss's own uniform bound.
    """
    out = []
    for alpha in alphas:
        for raw in text.split(","):
            token = raw.strip().lower()
            if not token:
                continue
            name, _, arg = token.partition(":")
            try:
                value = float(arg) if arg else None
            except ValueError:
                raise ConfigError(f"bad method parameter in {raw.strip()!r}", key="methods") from None
            if name == "naive":
                out.append(MethodSpec(MethodKind.NAIVE, alpha))
            elif name == "ui":
                out.append(MethodSpec(MethodKind.UI, alpha, sigma=value))
            elif name == "eb":
                if value is None and dgp is not None:
                    value = model_for(dgp, MethodSpec(MethodKind.STUDENTIZED)).uniform_bound
                    if value is None:
                        raise CapabilityError(f"eb needs an explicit bound for {dgp.kind.value}, e.g. eb:2")
                out.append(MethodSpec(MethodKind.EB, alpha, b0=value))
            elif name in ("studentized", "std", "clt"):
                out.append(MethodSpec(MethodKind.STUDENTIZED, alpha))
            elif name in ("bc", "biascorrected"):
                out.append(MethodSpec(MethodKind.BC, alpha))
            else:
                raise ConfigError(f"unknown method {raw.strip()!r}", key="methods")
    if not out:
        raise ConfigError("no methods given", key="methods")
    return tuple(out)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def read_config_lines(text: str) -> dict[str, tuple[str, int]]:
    """Syntax pass: ``{key: (value, line_number)}``."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, key=key)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, key=key)
        if not value:
            raise ConfigError(f"empty value for {key!r}", line=lineno, key=key)
        entries[key] = (value, lineno)
    return entries


def parse_config(text: str, default_mode: str = "coverage", default_name: str = "custom") -> Experiment:
    """Parse and validate a config file; nothing is simulated."""
    entries = read_config_lines(text)
    for key in _REQUIRED:
        if key not in entries:
            raise ConfigError(f"missing required key {key!r}", key=key)

    def get(key, conv, default=None):
        if key not in entries:
            return default
        value, lineno = entries[key]
        try:
            return conv(value)
        except (ValueError, DomainError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno, key=key) from None

    def at(key, exc):
        return ConfigError(str(exc), line=entries[key][1] if key in entries else None, key=key)

    try:
        kind = get("dgp", DgpKind)
    except ConfigError:
        choices = ", ".join(k.value for k in DgpKind)
        raise ConfigError(f"unknown dgp; choose from {choices}", line=entries["dgp"][1], key="dgp") from None
    n_values = get("n", lambda v: [int(t) for t in v.split(",") if t.strip()])
    d = get("d", int, 2 if kind is DgpKind.MANSKI_2D else 1)
    alphas = get("alpha", _floats, [0.05])
    reps = get("reps", int, DEFAULT_REPS)
    seed = get("seed", int, 0)
    ratio = get("ratio", float, 0.5)
    mode = get("mode", str.lower, default_mode)
    beta = get("beta", float, 1.0)
    gamma = get("gamma", float, 0.5)
    variances = get("variances", lambda v: tuple(_floats(v)))
    shuffle = get("shuffle", lambda v: {"true": True, "false": False}[v.lower()], False)
    grid_points = get("grid_points", int, 201)
    name = get("name", str, default_name)

    if mode not in ("coverage", "width"):
        raise at("mode", "mode must be coverage or width")
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise at("alpha", "alpha must lie in (0,1)")
    if not 0.0 < ratio < 1.0:
        raise at("ratio", "ratio must lie in (0,1)")
    if reps < 1:
        raise at("reps", "reps must be >= 1")
    try:
        dgps = [DgpSpec(kind, N, d, variances=variances, beta=beta, gamma=gamma) for N in n_values]
        for dgp in dgps:
            split(dgp.n_total, ratio)
    except DomainError as exc:
        raise at("n", f"bad value for 'n': {exc}") from None
    try:
        methods = parse_methods(entries["methods"][0], alphas, dgps[0])
        check_methods(dgps[0], methods)
    except (DomainError, CapabilityError, ConfigError) as exc:
        msg = getattr(exc, "message", str(exc))
        raise ConfigError(msg, line=entries["methods"][1], key="methods") from None

    if mode == "coverage":
        cfgs = tuple(CoverageConfig(dgp, methods, reps, seed, ratio, shuffle) for dgp in dgps)
    else:
        cfgs = (WidthConfig(dgps[0], tuple(n_values), methods, reps, seed, ratio, shuffle, grid_points),)
    return Experiment(name, mode, "N", cfgs)


def run_custom(config_file, out_dir=None, default_mode: str = "coverage",
               workers: int | None = None) -> Path:
    """Run a config file and write ``<name>.csv`` next to it (or into ``out_dir``)."""
    path = Path(config_file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    exp = parse_config(text, default_mode, default_name=path.stem)
    out = _check_out_dir(path.parent if out_dir is None else out_dir)
    return write_csv(out / f"{exp.name}.csv", run_experiment(exp, workers))


# ------------------------------------------------------------ membership CLI

_DATA_MODELS = {
    "mean": DgpKind.HD_MEAN,
    "regression": DgpKind.LINEAR_GAUSSIAN,
    "manski": DgpKind.MANSKI_2D,
    "quantile": DgpKind.QUANTILE_HOLDER,
}


def dgp_for_data(rows: np.ndarray, model_name: str | None, gamma: float = 0.5) -> DgpSpec:
    """The DGP whose loss and initial estimator match ``model_name`` for these rows."""
    if model_name not in _DATA_MODELS:
        raise ConfigError(f"--model must be one of {', '.join(_DATA_MODELS)}", key="model")
    kind = _DATA_MODELS[model_name]
    width = rows.shape[1]
    dim = width if kind in (DgpKind.HD_MEAN, DgpKind.QUANTILE_HOLDER) else width - 1
    try:
        return DgpSpec(kind, rows.shape[0], dim, gamma=gamma)
    except DomainError as exc:
        raise ConfigError(f"data do not fit the {model_name} model: {exc}") from None


def load_rows(path) -> np.ndarray:
    """Numeric comma-separated rows; ``#`` lines are skipped."""
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"data file {path} is not numeric CSV: {exc}") from None
    return data


def membership_check(
    thetas: Sequence[str],
    method: MethodSpec,
    dgp: DgpSpec | None = None,
    data=None,
    model_name: str | None = None,
    seed: int = 0,
    replication: int = 0,
    ratio: float = 0.5,
    gamma: float = 0.5,
) -> list[str]:
    """Report lines for each candidate theta.

    Rows come from ``data`` (with ``model_name`` one of mean, regression,
    manski, quantile) or are drawn from ``dgp`` with ``make_stream(seed,
    replication)``. A candidate is a comma list of numbers, ``hat`` for the
    initial estimate, or ``true`` for the DGP target.
    """
    if data is not None:
        rows = np.asarray(data, dtype=float)
        dgp = dgp_for_data(rows, model_name, gamma)
        truth = None
    elif dgp is not None:
        rows, truth = generate(dgp, make_stream(seed, replication))
    else:
        raise ConfigError("need a DGP or a data file")
    check_methods(dgp, [method])
    model = model_for(dgp, method)
    d1, d2 = split(dgp.n_total, ratio).apply(rows)
    theta_hat1, _ = fit_initial(dgp, d1)
    ev = _Membership(method, model, theta_hat1, d2)
    lines = [f"method={method.label} alpha={method.alpha:g} n1={d1.shape[0]} n2={d2.shape[0]} "
             f"theta_hat1={_vec(theta_hat1)}"]
    for token in thetas:
        t = token.strip().lower()
        if t == "hat":
            theta = theta_hat1
        elif t == "true":
            if truth is None:
                raise ConfigError("'true' needs a DGP", key="theta")
            theta = truth
        else:
            try:
                theta = np.array(_floats(token))
            except ValueError:
                raise ConfigError(f"bad theta {token!r}", key="theta") from None
        try:
            res = ev(theta)
        except DomainError as exc:
            raise ConfigError(str(exc), key="theta") from None
        lines.append(
            f"theta={_vec(theta)} statistic={res.statistic!r} threshold={res.threshold!r} "
            f"contained={'yes' if res.contained else 'no'}"
        )
    return lines


def _vec(v) -> str:
    return "(" + ",".join(format(float(x), ".10g") for x in np.atleast_1d(v)) + ")"

