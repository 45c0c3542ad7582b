"""Text round-trip format for grid fields and metric tables.

Layout::

    nehari-field v1            (or "nehari-field v1 metric")
    dim 2 sizes 32 32
    <value>                    (one node per line, row-major)

Scalars are written with 17 significant digits so a write/read cycle is
bit-identical. Metric lines carry the n(n+1)/2 upper-triangle entries of the
node tensor, row-major.
"""

from __future__ import annotations

import numpy as np

from .grid import Chart, MetricField, ScalarField

__all__ = ["FieldFormatError", "read_field", "write_field", "read_metric", "write_metric"]

MAGIC = "nehari-field v1"


class FieldFormatError(ValueError):
    """Malformed field file; message is anchored as path:line."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_header(lines, path, metric: bool):
    if not lines:
        raise FieldFormatError(f"{path}:1: empty file")
    head = lines[0].strip()
    want = MAGIC + (" metric" if metric else "")
    if head != want:
        raise FieldFormatError(f"{path}:1: expected header {want!r}, got {head!r}")
    if len(lines) < 2:
        raise FieldFormatError(f"{path}:2: missing 'dim n sizes ...' line")
    parts = lines[1].split()
    if len(parts) < 4 or parts[0] != "dim" or parts[2] != "sizes":
        raise FieldFormatError(f"{path}:2: expected 'dim n sizes s1 ...', got {lines[1].strip()!r}")
    try:
        dim = int(parts[1])
        sizes = tuple(int(p) for p in parts[3:])
    except ValueError as exc:
        raise FieldFormatError(f"{path}:2: {exc}") from exc
    if len(sizes) != dim:
        raise FieldFormatError(f"{path}:2: dim {dim} but {len(sizes)} sizes given")
    return dim, sizes


def write_field(path, field: ScalarField):
    chart = field.chart
    with open(path, "w") as fh:
        fh.write(MAGIC + "\n")
        fh.write(f"dim {chart.dim} sizes " + " ".join(str(s) for s in chart.sizes) + "\n")
        for v in field.values.ravel():
            fh.write(_fmt(v) + "\n")


def read_field(path, chart: Chart | None = None) -> ScalarField:
    """Read a scalar field; with ``chart`` given, sizes must match it.

    Without a chart, a unit-torus chart (spacing 1/size per axis) is built
    from the header.
    """
    with open(path) as fh:
        lines = fh.readlines()
    dim, sizes = _parse_header(lines, path, metric=False)
    if chart is None:
        chart = Chart(dim=dim, sizes=sizes, spacings=tuple(1.0 / s for s in sizes))
    elif chart.dim != dim or chart.sizes != sizes:
        raise FieldFormatError(
            f"{path}:2: file grid dim={dim} sizes={sizes} does not match chart "
            f"dim={chart.dim} sizes={chart.sizes}"
        )
    n_nodes = int(np.prod(sizes))
    values = np.empty(n_nodes)
    row = 0
    for lineno, line in enumerate(lines[2:], start=3):
        text = line.strip()
        if not text:
            continue
        if row >= n_nodes:
            raise FieldFormatError(f"{path}:{lineno}: more values than {n_nodes} nodes")
        try:
            values[row] = float(text)
        except ValueError as exc:
            raise FieldFormatError(f"{path}:{lineno}: {exc}") from exc
        row += 1
    if row != n_nodes:
        raise FieldFormatError(f"{path}:{len(lines)}: expected {n_nodes} values, got {row}")
    return chart.field(values.reshape(sizes))


def write_metric(path, metric: MetricField):
    chart = metric.chart
    n = chart.dim
    iu = np.triu_indices(n)
    flat = metric.g.reshape(-1, n, n)
    with open(path, "w") as fh:
        fh.write(MAGIC + " metric\n")
        fh.write(f"dim {n} sizes " + " ".join(str(s) for s in chart.sizes) + "\n")
        for node in flat:
            fh.write(" ".join(_fmt(v) for v in node[iu]) + "\n")


def read_metric(path, chart: Chart | None = None) -> MetricField:
    with open(path) as fh:
        lines = fh.readlines()
    dim, sizes = _parse_header(lines, path, metric=True)
    if chart is None:
        chart = Chart(dim=dim, sizes=sizes, spacings=tuple(1.0 / s for s in sizes))
    elif chart.dim != dim or chart.sizes != sizes:
        raise FieldFormatError(
            f"{path}:2: file grid dim={dim} sizes={sizes} does not match chart "
            f"dim={chart.dim} sizes={chart.sizes}"
        )
    n_nodes = int(np.prod(sizes))
    n_tri = dim * (dim + 1) // 2
    iu = np.triu_indices(dim)
    g = np.empty((n_nodes, dim, dim))
    row = 0
    for lineno, line in enumerate(lines[2:], start=3):
        text = line.strip()
        if not text:
            continue
        if row >= n_nodes:
            raise FieldFormatError(f"{path}:{lineno}: more rows than {n_nodes} nodes")
        parts = text.split()
        if len(parts) != n_tri:
            raise FieldFormatError(
                f"{path}:{lineno}: expected {n_tri} upper-triangle values, got {len(parts)}"
            )
        try:
            tri = [float(p) for p in parts]
        except ValueError as exc:
            raise FieldFormatError(f"{path}:{lineno}: {exc}") from exc
        node = np.zeros((dim, dim))
        node[iu] = tri
        node = node + node.T - np.diag(np.diag(node))
        g[row] = node
        row += 1
    if row != n_nodes:
        raise FieldFormatError(f"{path}:{len(lines)}: expected {n_nodes} rows, got {row}")
    return MetricField.from_spec(chart, g.reshape(chart.shape + (dim, dim)))
