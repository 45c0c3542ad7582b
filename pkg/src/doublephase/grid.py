"""Periodic metric grids: charts, fields, quadrature, difference operators.

Everything is dimension-generic (1 to 3 axes) and periodic, so a grid models
a flat or curved-metric torus. All reductions go through ``pairwise_sum`` so
results are bit-reproducible at a fixed thread count.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Chart",
    "MetricField",
    "ScalarField",
    "VectorField",
    "LogHolderReport",
    "build_torus",
    "gradient",
    "grad_norm_g",
    "integrate",
    "log_holder_check",
    "pairwise_sum",
    "random_band_limited",
    "band_filter",
    "substream",
]


def pairwise_sum(values) -> float:
    """Sum an array with a fixed binary reduction tree.

    Adjacent elements are paired on every round; an odd trailing element is
    carried over unchanged. The tree depends only on the input length, which
    keeps reductions bit-identical between runs and independent of BLAS
    threading.
    """
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        even = a.size & ~1
        paired = a[0:even:2] + a[1:even:2]
        if a.size & 1:
            paired = np.append(paired, a[-1])
        a = paired
    return float(a[0])


def substream(seed, *path) -> np.random.Generator:
    """Independent counter-based generator for ``(seed, *path)``.

    Path components are hashed with blake2s, so strings and ints give stable
    entropy regardless of PYTHONHASHSEED. Built on Philox, so substreams are
    statistically independent and cheap to spawn.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in path:
        digest = hashlib.blake2s(repr(part).encode(), digest_size=8).digest()
        entropy.append(int.from_bytes(digest, "little"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class Chart:
    """Uniform periodic grid on [0, L_1) x ... x [0, L_n), n in {1, 2, 3}."""

    dim: int
    sizes: tuple
    spacings: tuple

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "spacings", tuple(float(h) for h in self.spacings))
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.sizes) != self.dim or len(self.spacings) != self.dim:
            raise ValueError("sizes and spacings must have one entry per axis")
        if any(s < 4 for s in self.sizes):
            raise ValueError(f"need at least 4 nodes per axis, got sizes={self.sizes}")
        if any(h <= 0 for h in self.spacings):
            raise ValueError(f"spacings must be positive, got {self.spacings}")

    @property
    def shape(self):
        return self.sizes

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def lengths(self):
        return tuple(s * h for s, h in zip(self.sizes, self.spacings))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.arange(self.sizes[axis]) * self.spacings[axis]

    def coords(self):
        """Node coordinate arrays, one (broadcast to shape) per axis."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def field(self, values) -> "ScalarField":
        return ScalarField(np.asarray(values, dtype=float), self)

    def zeros(self) -> "ScalarField":
        return self.field(np.zeros(self.shape))

    def constant(self, c: float) -> "ScalarField":
        return self.field(np.full(self.shape, float(c)))


@dataclass(frozen=True)
class ScalarField:
    """One real value per node of a chart."""

    values: np.ndarray
    chart: Chart

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.chart.shape:
            raise ValueError(
                f"field shape {vals.shape} does not match chart {self.chart.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class VectorField:
    """Chart-coordinate components, stored as (*shape, dim)."""

    components: np.ndarray
    chart: Chart

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        if comp.shape != self.chart.shape + (self.chart.dim,):
            raise ValueError(
                f"components shape {comp.shape} does not match chart "
                f"{self.chart.shape} with dim {self.chart.dim}"
            )
        if not np.all(np.isfinite(comp)):
            raise ValueError("vector field contains non-finite values")
        comp = comp.copy()
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)


@dataclass(frozen=True)
class MetricField:
    """Symmetric positive-definite metric tensor per node, with caches.

    ``sqrt_det`` and ``inv`` are computed once at construction; ``volume`` is
    the total Riemannian volume of the chart.
    """

    g: np.ndarray
    sqrt_det: np.ndarray
    inv: np.ndarray
    chart: Chart
    volume: float

    def __post_init__(self):
        for name in ("g", "sqrt_det", "inv"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_spec(cls, chart: Chart, spec="identity") -> "MetricField":
        """Build a metric from "identity", a scalar, a constant SPD matrix,
        or a per-node (*shape, n, n) table."""
        n = chart.dim
        if isinstance(spec, str):
            if spec != "identity":
                raise ValueError(f"unknown metric spec {spec!r}")
            g = np.broadcast_to(np.eye(n), chart.shape + (n, n)).copy()
        else:
            arr = np.asarray(spec, dtype=float)
            if arr.ndim == 0:
                g = np.broadcast_to(float(arr) * np.eye(n), chart.shape + (n, n)).copy()
            elif arr.shape == (n, n):
                g = np.broadcast_to(arr, chart.shape + (n, n)).copy()
            elif arr.shape == chart.shape + (n, n):
                g = arr.copy()
            else:
                raise ValueError(
                    f"metric spec shape {arr.shape} not understood for dim {n}"
                )
        sym_gap = np.max(np.abs(g - np.swapaxes(g, -1, -2)))
        if sym_gap > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
            raise ValueError("metric tensor must be symmetric at every node")
        eigs = np.linalg.eigvalsh(g)
        min_eig = eigs.min(axis=-1)
        if np.any(min_eig <= 0):
            bad = np.argwhere(min_eig <= 0)[0]
            raise ValueError(
                f"metric is not positive definite at node {tuple(int(i) for i in bad)}"
            )
        sqrt_det = np.sqrt(np.linalg.det(g))
        inv = np.linalg.inv(g)
        volume = pairwise_sum(sqrt_det) * chart.cell_volume
        return cls(g=g, sqrt_det=sqrt_det, inv=inv, chart=chart, volume=volume)


def build_torus(dim, sizes, metric_spec="identity", spacings=None):
    """Periodic chart plus metric. Default spacings give the unit torus."""
    sizes = tuple(int(s) for s in np.atleast_1d(sizes))
    if spacings is None:
        spacings = tuple(1.0 / s for s in sizes)
    chart = Chart(dim=dim, sizes=sizes, spacings=tuple(spacings))
    metric = MetricField.from_spec(chart, metric_spec)
    return chart, metric


def gradient(u: ScalarField) -> VectorField:
    """Central differences with periodic wrap, second order in h."""
    vals = u.values
    chart = u.chart
    comps = np.empty(chart.shape + (chart.dim,))
    for a in range(chart.dim):
        h = chart.spacings[a]
        comps[..., a] = (np.roll(vals, -1, axis=a) - np.roll(vals, 1, axis=a)) / (2.0 * h)
    return VectorField(comps, chart)


def grad_norm_g(v: VectorField, metric: MetricField) -> ScalarField:
    """Pointwise Riemannian norm sqrt(g^{ab} v_a v_b)."""
    if v.chart is not metric.chart and v.chart != metric.chart:
        raise ValueError("vector field and metric live on different charts")
    quad = np.einsum("...ab,...a,...b->...", metric.inv, v.components, v.components)
    return v.chart.field(np.sqrt(np.maximum(quad, 0.0)))


def integrate(w: ScalarField, metric: MetricField) -> float:
    """Rectangle rule against the Riemannian volume element."""
    if w.chart != metric.chart:
        raise ValueError("field and metric live on different charts")
    return pairwise_sum(w.values * metric.sqrt_det) * w.chart.cell_volume


@dataclass(frozen=True)
class LogHolderReport:
    constant: float
    worst_pair: tuple
    passed: bool
    threshold: float
    pairs_checked: int


def log_holder_check(
    s: ScalarField,
    threshold: float = math.inf,
    max_nodes: int = 10_000,
    sample_nodes: int = 2048,
    seed: int = 0,
) -> LogHolderReport:
    """Least c with |s(x)-s(y)| <= c / log(e + 1/d(x,y)) over node pairs.

    The distance is the periodic Euclidean chart distance, a surrogate for
    the geodesic distance (recorded as such by callers). Above ``max_nodes``
    nodes the pair scan runs on a seeded random subsample.
    """
    chart = s.chart
    coords = np.stack([c.ravel() for c in chart.coords()], axis=1)
    vals = s.values.ravel()
    n = vals.size
    if n < 2:
        raise ValueError("log-Hoelder check needs at least 2 nodes")
    if n > max_nodes:
        rng = substream(seed, "log_holder")
        idx = np.sort(rng.choice(n, size=sample_nodes, replace=False))
    else:
        idx = np.arange(n)
    lengths = np.asarray(chart.lengths)
    best = 0.0
    best_pair = (0, 0)
    pairs = 0
    for k in range(len(idx) - 1):
        i = idx[k]
        rest = idx[k + 1 :]
        delta = np.abs(coords[rest] - coords[i])
        delta = np.minimum(delta, lengths - delta)
        dist = np.sqrt(np.sum(delta * delta, axis=1))
        weight = np.log(math.e + 1.0 / dist)
        cand = np.abs(vals[rest] - vals[i]) * weight
        pairs += cand.size
        j = int(np.argmax(cand))
        if cand[j] > best:
            best = float(cand[j])
            best_pair = (int(i), int(rest[j]))
    return LogHolderReport(
        constant=best,
        worst_pair=best_pair,
        passed=best <= threshold,
        threshold=threshold,
        pairs_checked=pairs,
    )


def _mode_grids(chart: Chart):
    freqs = [np.fft.fftfreq(n, d=1.0 / n) for n in chart.shape]
    return np.meshgrid(*freqs, indexing="ij")


def _band_mask(chart: Chart, max_mode_frac: float) -> np.ndarray:
    mask = np.ones(chart.shape, dtype=bool)
    for grid_k, n in zip(_mode_grids(chart), chart.shape):
        mask &= np.abs(grid_k) <= int(n * max_mode_frac)
    return mask


def band_filter(values: np.ndarray, chart: Chart, max_mode_frac: float = 0.25) -> np.ndarray:
    """Fourier truncation keeping modes |k_a| <= floor(n_a * frac) per axis."""
    mask = _band_mask(chart, max_mode_frac)
    return np.fft.ifftn(np.fft.fftn(values) * mask).real


def random_band_limited(
    chart: Chart,
    rng: np.random.Generator,
    max_mode_frac: float = 0.25,
    amplitude: float = 1.0,
    mean: float = 0.0,
) -> ScalarField:
    """Random smooth field with modes |k_a| <= floor(n_a * frac) per axis.

    The oscillating part has (near) zero mean and peak amplitude
    ``amplitude``; ``mean`` is added afterwards.
    """
    grids = _mode_grids(chart)
    mask = _band_mask(chart, max_mode_frac)
    ksq = np.zeros(chart.shape)
    for g_k in grids:
        ksq = ksq + g_k**2
    coef = rng.standard_normal(chart.shape) + 1j * rng.standard_normal(chart.shape)
    coef = np.where(mask, coef / (1.0 + ksq), 0.0)
    coef[(0,) * chart.dim] = 0.0
    u = np.fft.ifftn(coef).real
    peak = float(np.max(np.abs(u)))
    if peak > 0:
        u = u * (amplitude / peak)
    return chart.field(u + mean)
