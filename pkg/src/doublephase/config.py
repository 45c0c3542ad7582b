"""Plain-text run configuration: sections of key = value pairs.

Field specs (exponents, weight, source amplitude) are strings:

    constant 2.0
    affine 2.0  0.3 [0.1 [0.2]]     (base plus slope per axis)
    fourier 2.5  0 1 0.0 0.3  [axis k cos_amp sin_amp ...]
    file PATH                        (grid field file)

Fourier terms use the axis period, so specs built from them are smooth and
periodic. The metric spec is "identity", "constant g11 [g12 g22 ...]"
(upper triangle), or "file PATH" for a per-node table.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fieldio import read_field, read_metric
from .grid import Chart, MetricField, ScalarField
from .nehari import NehariClass
from .problem import PowerNonlinearity, ProblemInstance
from .solver import SolverConfig
from .spaces import ExponentField, WeightField

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "field_from_spec",
    "serialize_instance",
    "default_config_text",
]


class ConfigError(ValueError):
    """Bad configuration; message carries path:line when determinable."""


def _option_line(path: str, section: str, option: str) -> int:
    """Best-effort line anchor for an option inside a section."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError:
        return 0
    current = None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if text.startswith("[") and text.endswith("]"):
            current = text[1:-1].strip()
        elif current == section and text.split("=")[0].strip() == option:
            return lineno
    return 0


@dataclass
class RunConfig:
    """Resolved run settings plus the raw text echo for artifacts."""

    dim: int = 1
    sizes: tuple = (64,)
    spacings: tuple | None = None
    metric_spec: str = "identity"
    p_spec: str = "constant 3.0"
    q_spec: str = "constant 2.0"
    mu_spec: str = "constant 1.0"
    amplitude_spec: str = "constant 1.0"
    beta: float = 4.0
    a_threshold: float = 1.0
    lam: float | None = None
    lambda_grid: tuple | None = None
    lambda_grid_auto: int | None = None
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1
    solver: dict = dc_field(default_factory=dict)
    verify_trials: int = 200
    constants_trials: int = 200
    fault: dict = dc_field(default_factory=dict)
    echo: dict = dc_field(default_factory=dict)
    path: str = "<defaults>"

    def build_chart_metric(self):
        sizes = tuple(int(s) for s in self.sizes)
        spacings = self.spacings or tuple(1.0 / s for s in sizes)
        chart = Chart(dim=self.dim, sizes=sizes, spacings=tuple(spacings))
        spec = self.metric_spec.strip()
        if spec == "identity":
            metric = MetricField.from_spec(chart, "identity")
        elif spec.startswith("constant"):
            vals = [float(tok) for tok in spec.split()[1:]]
            n = chart.dim
            need = n * (n + 1) // 2
            if len(vals) == 1:
                metric = MetricField.from_spec(chart, vals[0])
            elif len(vals) == need:
                g = np.zeros((n, n))
                iu = np.triu_indices(n)
                g[iu] = vals
                g = g + g.T - np.diag(np.diag(g))
                metric = MetricField.from_spec(chart, g)
            else:
                raise ConfigError(
                    f"{self.path}: metric 'constant' needs 1 or {need} values, got {len(vals)}"
                )
        elif spec.startswith("file"):
            metric = read_metric(spec.split(None, 1)[1].strip(), chart)
        else:
            raise ConfigError(f"{self.path}: unknown metric spec {spec!r}")
        return chart, metric

    def build_instance(self, lam: float | None = None) -> ProblemInstance:
        chart, metric = self.build_chart_metric()
        p = field_from_spec(self.p_spec, chart)
        q = field_from_spec(self.q_spec, chart)
        mu = field_from_spec(self.mu_spec, chart)
        amp = field_from_spec(self.amplitude_spec, chart)
        lam = self.lam if lam is None else lam
        if lam is None:
            raise ConfigError(f"{self.path}: [problem] lambda is required for this command")
        return ProblemInstance(
            chart=chart,
            metric=metric,
            exponents=ExponentField(p=p, q=q),
            weight=WeightField(mu=mu),
            lam=float(lam),
            nonlinearity=PowerNonlinearity(
                beta=self.beta, amplitude=amp, a_threshold=self.a_threshold
            ),
        )

    def build_solver_config(self, target=NehariClass.MINUS) -> SolverConfig:
        kw = dict(self.solver)
        kw.setdefault("seed", self.seed)
        kw.setdefault("constants_trials", self.constants_trials)
        return SolverConfig(target=target, **kw)


def field_from_spec(spec: str, chart: Chart) -> ScalarField:
    tokens = spec.split()
    if not tokens:
        raise ConfigError("empty field spec")
    kind = tokens[0]
    if kind == "constant":
        if len(tokens) != 2:
            raise ConfigError(f"'constant' spec needs one value: {spec!r}")
        return chart.constant(float(tokens[1]))
    if kind == "affine":
        vals = [float(t) for t in tokens[1:]]
        if len(vals) != 1 + chart.dim:
            raise ConfigError(
                f"'affine' spec needs base plus {chart.dim} slopes: {spec!r}"
            )
        out = np.full(chart.shape, vals[0])
        for a, slope in enumerate(vals[1:]):
            out = out + slope * chart.coords()[a]
        return chart.field(out)
    if kind == "fourier":
        vals = tokens[1:]
        if not vals or (len(vals) - 1) % 4 != 0:
            raise ConfigError(
                f"'fourier' spec needs a base then (axis k cos sin) groups: {spec!r}"
            )
        out = np.full(chart.shape, float(vals[0]))
        coords = chart.coords()
        lengths = chart.lengths
        for i in range(1, len(vals), 4):
            axis = int(vals[i])
            k = float(vals[i + 1])
            cos_amp = float(vals[i + 2])
            sin_amp = float(vals[i + 3])
            if not 0 <= axis < chart.dim:
                raise ConfigError(f"'fourier' axis {axis} out of range in {spec!r}")
            phase = 2.0 * math.pi * k * coords[axis] / lengths[axis]
            out = out + cos_amp * np.cos(phase) + sin_amp * np.sin(phase)
        return chart.field(out)
    if kind == "file":
        return read_field(spec.split(None, 1)[1].strip(), chart)
    raise ConfigError(f"unknown field spec kind {kind!r} in {spec!r}")


_SOLVER_KEYS = {
    "truncate": bool,
    "multistart": int,
    "max_outer_iters": int,
    "step0": float,
    "shrink": float,
    "armijo": float,
    "residual_tol": float,
    "projection_tol": float,
    "max_backtracks": int,
    "start_mean": float,
    "use_bb_step": bool,
    "direction_max_mode_frac": float,
}


def _get(parser, section, option, caster, default, path):
    if not parser.has_option(section, option):
        return default
    raw = parser.get(section, option)
    try:
        if caster is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return caster(raw)
    except ValueError as exc:
        line = _option_line(path, section, option)
        raise ConfigError(f"{path}:{line}: [{section}] {option}: {exc}") from exc


def parse_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", 0) or 0
        raise ConfigError(f"{path}:{lineno}: {exc.message if hasattr(exc, 'message') else exc}") from exc

    rc = RunConfig(path=path)
    rc.dim = _get(parser, "chart", "dim", int, rc.dim, path)
    if parser.has_option("chart", "sizes"):
        rc.sizes = tuple(int(t) for t in parser.get("chart", "sizes").split())
    else:
        rc.sizes = tuple([64] * rc.dim) if rc.dim > 1 else rc.sizes
    if parser.has_option("chart", "spacings"):
        rc.spacings = tuple(float(t) for t in parser.get("chart", "spacings").split())
    rc.metric_spec = parser.get("chart", "metric", fallback=rc.metric_spec)

    rc.p_spec = parser.get("exponents", "p", fallback=rc.p_spec)
    rc.q_spec = parser.get("exponents", "q", fallback=rc.q_spec)
    rc.mu_spec = parser.get("weight", "mu", fallback=rc.mu_spec)
    rc.amplitude_spec = parser.get("nonlinearity", "amplitude", fallback=rc.amplitude_spec)
    rc.beta = _get(parser, "nonlinearity", "beta", float, rc.beta, path)
    rc.a_threshold = _get(parser, "nonlinearity", "a_threshold", float, rc.a_threshold, path)

    if parser.has_option("problem", "lambda"):
        rc.lam = _get(parser, "problem", "lambda", float, None, path)
    if parser.has_option("problem", "lambda_grid"):
        raw = parser.get("problem", "lambda_grid").split()
        if raw and raw[0] == "auto":
            rc.lambda_grid_auto = int(raw[1]) if len(raw) > 1 else 8
        else:
            try:
                grid = tuple(float(t) for t in raw)
            except ValueError as exc:
                line = _option_line(path, "problem", "lambda_grid")
                raise ConfigError(f"{path}:{line}: [problem] lambda_grid: {exc}") from exc
            if any(b <= a for a, b in zip(grid, grid[1:])):
                line = _option_line(path, "problem", "lambda_grid")
                raise ConfigError(
                    f"{path}:{line}: [problem] lambda_grid must be strictly increasing"
                )
            rc.lambda_grid = grid

    if parser.has_section("solver"):
        for key, caster in _SOLVER_KEYS.items():
            if parser.has_option("solver", key):
                rc.solver[key] = _get(parser, "solver", key, caster, None, path)

    rc.verify_trials = _get(parser, "verify", "trials", int, rc.verify_trials, path)
    rc.constants_trials = _get(parser, "constants", "trials", int, rc.constants_trials, path)
    rc.seed = _get(parser, "run", "seed", int, rc.seed, path)
    rc.out_dir = parser.get("run", "out", fallback=rc.out_dir)

    rc.echo = {s: dict(parser.items(s)) for s in parser.sections()}

    # validate the exponent ordering early, before any run
    try:
        chart, _ = rc.build_chart_metric()
        ExponentField(p=field_from_spec(rc.p_spec, chart), q=field_from_spec(rc.q_spec, chart))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return rc


def _field_spec_for(values, name, directory, chart):
    from .fieldio import write_field

    if np.ptp(values) == 0.0:
        return f"constant {format(float(values.flat[0]), '.17g')}"
    if directory is None:
        raise ConfigError(f"non-constant {name} needs a directory for its field file")
    path = os.path.join(directory, f"{name}.field")
    write_field(path, chart.field(values))
    return f"file {path}"


def serialize_instance(P, directory=None) -> str:
    """Render a problem instance back to the run-configuration text.

    Constant fields inline; non-constant fields and metrics are written as
    grid files under ``directory`` and referenced by path. Parsing the
    result reproduces the instance bit for bit.
    """
    from .fieldio import write_metric

    nl = P.nonlinearity
    if not isinstance(nl, PowerNonlinearity):
        raise ConfigError("only the power source family serializes to config text")
    chart = P.chart
    if directory is not None:
        os.makedirs(directory, exist_ok=True)
    eye = np.broadcast_to(np.eye(chart.dim), chart.shape + (chart.dim, chart.dim))
    if np.array_equal(P.metric.g, eye):
        metric_spec = "identity"
    elif all(np.ptp(P.metric.g[..., a, b]) == 0.0 for a in range(chart.dim) for b in range(chart.dim)):
        iu = np.triu_indices(chart.dim)
        node = P.metric.g.reshape(-1, chart.dim, chart.dim)[0]
        metric_spec = "constant " + " ".join(format(float(v), ".17g") for v in node[iu])
    else:
        if directory is None:
            raise ConfigError("a per-node metric needs a directory for its table file")
        path = os.path.join(directory, "metric.field")
        write_metric(path, P.metric)
        metric_spec = f"file {path}"
    lines = [
        "[chart]",
        f"dim = {chart.dim}",
        "sizes = " + " ".join(str(s) for s in chart.sizes),
        "spacings = " + " ".join(format(h, ".17g") for h in chart.spacings),
        f"metric = {metric_spec}",
        "",
        "[exponents]",
        f"p = {_field_spec_for(P.exponents.p.values, 'p', directory, chart)}",
        f"q = {_field_spec_for(P.exponents.q.values, 'q', directory, chart)}",
        "",
        "[weight]",
        f"mu = {_field_spec_for(P.weight.mu.values, 'mu', directory, chart)}",
        "",
        "[nonlinearity]",
        f"beta = {format(nl.beta, '.17g')}",
        f"amplitude = {_field_spec_for(nl.amplitude.values, 'amplitude', directory, chart)}",
        f"a_threshold = {format(nl.a_threshold, '.17g')}",
        "",
        "[problem]",
        f"lambda = {format(P.lam, '.17g')}",
        "",
    ]
    return "\n".join(lines)


def default_config_text() -> str:
    """A complete commented example; also the verify-subcommand default."""
    return """\
[chart]
dim = 1
sizes = 64
metric = identity

[exponents]
p = fourier 3.0  0 1 0.0 0.5
q = fourier 1.7  0 1 0.0 0.2

[weight]
mu = fourier 1.5  0 1 0.0 0.5

[nonlinearity]
beta = 4.0
amplitude = constant 1.0
a_threshold = 1.0

[problem]
lambda = 0.7

[solver]
multistart = 8
max_outer_iters = 5000
residual_tol = 1e-6
truncate = true

[verify]
trials = 200

[constants]
trials = 200
"""
