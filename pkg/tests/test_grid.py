import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import doublephase as dp


def test_build_torus_identity_sqrt_det():
    chart, metric = dp.build_torus(1, [64], "identity")
    assert np.all(metric.sqrt_det == 1.0)
    assert metric.volume == pytest.approx(1.0, rel=1e-15)


def test_build_torus_scalar_metric():
    _, metric = dp.build_torus(1, [64], 4.0)
    assert np.all(metric.sqrt_det == 2.0)


def test_build_torus_pernode_spd_table():
    rng = dp.substream(7, "metric")
    shape = (32, 32)
    base = rng.standard_normal(shape + (2, 2))
    g = np.einsum("...ab,...cb->...ac", base, base) + 0.5 * np.eye(2)
    chart, metric = dp.build_torus(2, [32, 32], g)
    ident = np.einsum("...ab,...bc->...ac", metric.inv, metric.g)
    gap = np.max(np.abs(ident - np.eye(2)))
    assert gap <= 1e-12


def test_build_torus_rejects_non_spd_with_node_index():
    g = np.broadcast_to(np.eye(2), (8, 8, 2, 2)).copy()
    g[3, 5] = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues -1 and 3
    with pytest.raises(ValueError, match=r"positive definite at node \(3, 5\)"):
        dp.build_torus(2, [8, 8], g)


def test_chart_validation():
    with pytest.raises(ValueError):
        dp.Chart(dim=1, sizes=(3,), spacings=(0.1,))
    with pytest.raises(ValueError):
        dp.Chart(dim=2, sizes=(8, 8), spacings=(0.1, -0.1))
    with pytest.raises(ValueError):
        dp.Chart(dim=4, sizes=(8,) * 4, spacings=(0.1,) * 4)


def test_gradient_of_constant_is_exactly_zero():
    chart, _ = dp.build_torus(2, [16, 16])
    g = dp.gradient(chart.constant(3.7))
    assert np.all(g.components == 0.0)


def test_gradient_sine_error_bound():
    chart, _ = dp.build_torus(1, [64])
    x = chart.axis_coords(0)
    u = chart.field(np.sin(2 * np.pi * x))
    g = dp.gradient(u)
    err = np.max(np.abs(g.components[..., 0] - 2 * np.pi * np.cos(2 * np.pi * x)))
    h = 1.0 / 64
    assert err <= (2 * np.pi) ** 3 * h**2 / 6 * (1 + 1e-12)


def test_gradient_2d_both_components():
    chart, _ = dp.build_torus(2, [64, 64])
    xx, yy = chart.coords()
    u = chart.field(np.sin(2 * np.pi * xx) * np.sin(2 * np.pi * yy))
    g = dp.gradient(u)
    h = 1.0 / 64
    bound = (2 * np.pi) ** 3 * h**2 / 6 * (1 + 1e-12)
    gx = 2 * np.pi * np.cos(2 * np.pi * xx) * np.sin(2 * np.pi * yy)
    gy = 2 * np.pi * np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * yy)
    assert np.max(np.abs(g.components[..., 0] - gx)) <= bound
    assert np.max(np.abs(g.components[..., 1] - gy)) <= bound


def test_gradient_translation_equivariance_bitwise():
    chart, _ = dp.build_torus(1, [64])
    rng = dp.substream(3, "shift")
    u = dp.random_band_limited(chart, rng)
    shifted = chart.field(np.roll(u.values, 5))
    lhs = dp.gradient(shifted).components
    rhs = np.roll(dp.gradient(u).components, 5, axis=0)
    assert np.array_equal(lhs, rhs)


def test_grad_norm_euclidean():
    chart, metric = dp.build_torus(2, [8, 8])
    comps = np.zeros(chart.shape + (2,))
    comps[..., 0] = 3.0
    comps[..., 1] = 4.0
    out = dp.grad_norm_g(dp.VectorField(comps, chart), metric)
    assert np.allclose(out.values, 5.0, rtol=0, atol=1e-14)


def test_grad_norm_scalar_metric():
    chart, metric = dp.build_torus(1, [8], 4.0)
    comps = np.full(chart.shape + (1,), 2.0)
    out = dp.grad_norm_g(dp.VectorField(comps, chart), metric)
    # g^{11} = 1/4 so the norm is sqrt(4/4) = 1
    assert np.allclose(out.values, 1.0, rtol=0, atol=1e-14)


def test_grad_norm_matches_quadratic_form():
    rng = dp.substream(11, "gnorm")
    shape = (8, 8)
    base = rng.standard_normal(shape + (2, 2))
    g = np.einsum("...ab,...cb->...ac", base, base) + 0.3 * np.eye(2)
    chart, metric = dp.build_torus(2, [8, 8], g)
    comps = rng.standard_normal(shape + (2,))
    out = dp.grad_norm_g(dp.VectorField(comps, chart), metric)
    for i in range(8):
        for j in range(8):
            expected = math.sqrt(comps[i, j] @ np.linalg.inv(g[i, j]) @ comps[i, j])
            assert out.values[i, j] == pytest.approx(expected, rel=1e-12)


def test_build_torus_3d_smoke():
    chart, metric = dp.build_torus(3, [4, 4, 4], 2.0)
    assert chart.n_nodes == 64
    expected = math.sqrt(2.0**3)
    assert dp.integrate(chart.constant(1.0), metric) == pytest.approx(expected, rel=1e-13)
    assert np.all(dp.gradient(chart.constant(1.0)).components == 0.0)


def test_grad_norm_zero_iff_zero_vector():
    rng = dp.substream(12, "iff")
    base = rng.standard_normal((8, 8, 2, 2))
    g = np.einsum("...ab,...cb->...ac", base, base) + 0.3 * np.eye(2)
    chart, metric = dp.build_torus(2, [8, 8], g)
    comps = rng.standard_normal((8, 8, 2))
    comps[2, 3] = 0.0
    out = dp.grad_norm_g(dp.VectorField(comps, chart), metric)
    assert out.values[2, 3] == 0.0
    mask = np.ones((8, 8), dtype=bool)
    mask[2, 3] = False
    assert np.all(out.values[mask] > 0.0)


def test_integrate_unit_volume_and_symmetry():
    chart, metric = dp.build_torus(1, [64])
    assert dp.integrate(chart.constant(1.0), metric) == pytest.approx(1.0, rel=1e-15)
    x = chart.axis_coords(0)
    assert abs(dp.integrate(chart.field(np.sin(2 * np.pi * x)), metric)) <= 1e-14


def test_integrate_volume_doubles_with_metric():
    chart, metric = dp.build_torus(1, [64], 4.0)
    assert dp.integrate(chart.constant(1.0), metric) == pytest.approx(2.0, rel=1e-13)


def test_integrate_constant_metric_volume_2d():
    g = np.array([[2.0, 0.3], [0.3, 1.5]])
    chart, metric = dp.build_torus(2, [16, 16], g)
    expected = math.sqrt(np.linalg.det(g))
    assert dp.integrate(chart.constant(1.0), metric) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(min_value=-50, max_value=50),
    b=st.floats(min_value=-50, max_value=50),
)
def test_integrate_is_linear(a, b):
    chart, metric = dp.build_torus(1, [32], 1.7)
    rng = dp.substream(5, "linear")
    u = dp.random_band_limited(chart, rng)
    v = dp.random_band_limited(chart, rng)
    lhs = dp.integrate(chart.field(a * u.values + b * v.values), metric)
    rhs = a * dp.integrate(u, metric) + b * dp.integrate(v, metric)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_pairwise_sum_matches_fsum():
    rng = dp.substream(1, "psum")
    for n in (1, 2, 3, 7, 64, 1000):
        vals = rng.standard_normal(n) * 10.0 ** rng.integers(-3, 3)
        exact = math.fsum(vals)
        assert dp.pairwise_sum(vals) == pytest.approx(exact, rel=1e-13, abs=1e-13)
    assert dp.pairwise_sum([]) == 0.0


def _scan_log_holder(field):
    """Independent exhaustive pair scan (plain python loops)."""
    chart = field.chart
    coords = np.stack([c.ravel() for c in chart.coords()], axis=1)
    vals = field.values.ravel()
    lengths = np.asarray(chart.lengths)
    best = 0.0
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            d = np.abs(coords[j] - coords[i])
            d = np.minimum(d, lengths - d)
            dist = math.sqrt(float(np.sum(d * d)))
            best = max(best, abs(vals[j] - vals[i]) * math.log(math.e + 1.0 / dist))
    return best


def test_log_holder_constant_field():
    chart, _ = dp.build_torus(1, [32])
    rep = dp.log_holder_check(chart.constant(2.5))
    assert rep.constant == 0.0
    assert rep.passed


def test_log_holder_matches_exhaustive_scan():
    chart, _ = dp.build_torus(1, [32])
    x = chart.axis_coords(0)
    s = chart.field(2.0 + 0.1 * np.sin(2 * np.pi * x))
    rep = dp.log_holder_check(s)
    assert rep.passed
    assert rep.constant == pytest.approx(_scan_log_holder(s), rel=1e-12)


def test_log_holder_subsampled_scan_stays_close():
    chart, _ = dp.build_torus(1, [128])
    x = chart.axis_coords(0)
    s = chart.field(np.sin(2 * np.pi * x))
    full = dp.log_holder_check(s)
    sub = dp.log_holder_check(s, max_nodes=100, sample_nodes=64)
    assert sub.pairs_checked < full.pairs_checked
    assert 0 < sub.constant <= full.constant


def test_log_holder_step_field_diverges_under_refinement():
    constants = []
    for n in (16, 32, 64):
        chart, _ = dp.build_torus(1, [n])
        x = chart.axis_coords(0)
        s = chart.field(np.where(x < 0.5, 0.0, 1.0))
        constants.append(dp.log_holder_check(s).constant)
    assert constants[0] < constants[1] < constants[2]


def test_scalar_field_rejects_nan_and_shape_mismatch():
    chart, _ = dp.build_torus(1, [8])
    with pytest.raises(ValueError):
        chart.field(np.full(8, np.nan))
    with pytest.raises(ValueError):
        chart.field(np.zeros(9))


def test_fields_are_immutable():
    chart, _ = dp.build_torus(1, [8])
    u = chart.constant(1.0)
    with pytest.raises(ValueError):
        u.values[0] = 2.0


def test_random_band_limited_is_band_limited_and_deterministic():
    chart, _ = dp.build_torus(1, [64])
    u1 = dp.random_band_limited(chart, dp.substream(9, "x"), amplitude=2.0, mean=1.0)
    u2 = dp.random_band_limited(chart, dp.substream(9, "x"), amplitude=2.0, mean=1.0)
    assert np.array_equal(u1.values, u2.values)
    spectrum = np.fft.fft(u1.values - 1.0)
    high = np.abs(np.fft.fftfreq(64, d=1 / 64)) > 16
    assert np.max(np.abs(spectrum[high])) <= 1e-10
    assert np.max(np.abs(u1.values - 1.0)) == pytest.approx(2.0, rel=1e-12)


def test_band_filter_keeps_low_modes():
    chart, _ = dp.build_torus(1, [64])
    x = chart.axis_coords(0)
    vals = np.sin(2 * np.pi * x) + np.cos(2 * np.pi * 30 * x)
    out = dp.band_filter(vals, chart, 0.25)
    assert np.allclose(out, np.sin(2 * np.pi * x), atol=1e-12)
