import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import doublephase as dp
from doublephase.spaces import holder_factor


@pytest.fixture(scope="module")
def torus():
    return dp.build_torus(1, [64])


@pytest.fixture(scope="module")
def variable_q(torus):
    chart, _ = torus
    x = chart.axis_coords(0)
    return chart.field(1.7 + 0.2 * np.sin(2 * np.pi * x))


def test_exponent_field_ordering_enforced(torus):
    chart, _ = torus
    with pytest.raises(ValueError, match="ordering"):
        dp.ExponentField(p=chart.constant(2.0), q=chart.constant(2.0))
    with pytest.raises(ValueError, match="ordering"):
        dp.ExponentField(p=chart.constant(3.0), q=chart.constant(1.0))
    e = dp.ExponentField(p=chart.constant(3.0), q=chart.constant(2.0))
    assert (e.q_minus, e.q_plus, e.p_minus, e.p_plus) == (2.0, 2.0, 3.0, 3.0)


def test_weight_field_requires_positive_minimum(torus):
    chart, _ = torus
    with pytest.raises(ValueError):
        dp.WeightField(mu=chart.constant(0.0))
    w = dp.WeightField(mu=chart.constant(2.5))
    assert w.mu0 == 2.5


def test_modular_constant_exponent_constant_field(torus):
    chart, metric = torus
    assert dp.modular(chart.constant(3.0), chart.constant(2.0), metric) == pytest.approx(9.0, rel=1e-14)


def test_modular_of_one_is_volume(torus, variable_q):
    chart, metric = torus
    assert dp.modular(chart.constant(1.0), variable_q, metric) == pytest.approx(1.0, rel=1e-14)


def test_modular_zero_iff_zero(torus, variable_q):
    chart, metric = torus
    assert dp.modular(chart.zeros(), variable_q, metric) == 0.0
    u = chart.field(np.where(np.arange(64) == 5, 1e-8, 0.0))
    assert dp.modular(u, variable_q, metric) > 0.0


def test_modular_refinement_oracle():
    # integrand has |.|^{e} kinks at the sine zeros, so spectral accuracy
    # degrades to an algebraic rate; 1024 nodes put both grids below 1e-8
    vals = {}
    for n in (1024, 4096):
        chart, metric = dp.build_torus(1, [n])
        x = chart.axis_coords(0)
        u = chart.field(np.sin(2 * np.pi * x))
        e = chart.field(2.5 + 0.3 * np.sin(2 * np.pi * x))
        vals[n] = dp.modular(u, e, metric)
    assert vals[1024] == pytest.approx(vals[4096], abs=1e-8)


def test_luxemburg_constant_exponent_homogeneous_case(torus):
    chart, metric = torus
    rng = dp.substream(21, "lux")
    u = dp.random_band_limited(chart, rng, amplitude=2.0, mean=0.5)
    s = 2.7
    e = chart.constant(s)
    expected = dp.modular(u, e, metric) ** (1.0 / s)
    assert dp.luxemburg_norm(u, e, metric) == pytest.approx(expected, rel=1e-11)


def test_luxemburg_zero_field(torus, variable_q):
    chart, metric = torus
    assert dp.luxemburg_norm(chart.zeros(), variable_q, metric) == 0.0


def test_luxemburg_variable_exponent_independent_root(torus, variable_q):
    chart, metric = torus
    u = chart.constant(2.0)
    nu = dp.luxemburg_norm(u, variable_q, metric)
    # independent scalar root-find on sum (2/gamma)^{e_i} w_i = 1
    e_vals = variable_q.values
    w = metric.sqrt_det * chart.cell_volume

    def rho(gamma):
        return math.fsum((2.0 / gamma) ** e_vals * w) - 1.0

    lo, hi = 1e-6, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rho(mid) > 0:
            lo = mid
        else:
            hi = mid
    assert nu == pytest.approx(0.5 * (lo + hi), rel=1e-10)


def test_luxemburg_defining_equation(torus, variable_q):
    chart, metric = torus
    for i in range(20):
        rng = dp.substream(33, "unit", i)
        u = dp.random_band_limited(chart, rng, amplitude=float(10 ** rng.uniform(-2, 2)))
        nu = dp.luxemburg_norm(u, variable_q, metric)
        rho = dp.modular(chart.field(u.values / nu), variable_q, metric)
        assert abs(rho - 1.0) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(t=st.floats(min_value=1e-3, max_value=1e3))
def test_luxemburg_homogeneity(t):
    chart, metric = dp.build_torus(1, [32])
    x = chart.axis_coords(0)
    e = chart.field(1.7 + 0.2 * np.sin(2 * np.pi * x))
    u = chart.field(0.3 + np.sin(2 * np.pi * x))
    base = dp.luxemburg_norm(u, e, metric)
    scaled = dp.luxemburg_norm(chart.field(t * u.values), e, metric)
    assert scaled == pytest.approx(t * base, rel=1e-10)


def test_weighted_reduces_to_unweighted(torus, variable_q):
    chart, metric = torus
    rng = dp.substream(8, "wred")
    u = dp.random_band_limited(chart, rng, amplitude=1.5, mean=0.2)
    ones = dp.WeightField(mu=chart.constant(1.0))
    assert dp.weighted_modular(u, variable_q, ones, metric) == pytest.approx(
        dp.modular(u, variable_q, metric), rel=1e-14
    )
    assert dp.weighted_norm(u, variable_q, ones, metric) == pytest.approx(
        dp.luxemburg_norm(u, variable_q, metric), rel=1e-11
    )


def test_weighted_constant_scaling(torus):
    chart, metric = torus
    rng = dp.substream(8, "wc")
    u = dp.random_band_limited(chart, rng, amplitude=1.5, mean=0.2)
    e = chart.constant(2.0)
    w4 = dp.WeightField(mu=chart.constant(4.0))
    assert dp.weighted_modular(u, e, w4, metric) == pytest.approx(
        4.0 * dp.modular(u, e, metric), rel=1e-13
    )
    assert dp.weighted_norm(u, e, w4, metric) == pytest.approx(
        2.0 * dp.luxemburg_norm(u, e, metric), rel=1e-10
    )


def test_weighted_modular_refinement_oracle():
    # weight shaped like the growth example: (1 + d(x))^{eps(x)} with d the
    # periodic distance to the origin (kink at the antipode only)
    vals = {}
    for n in (16384, 65536):
        chart, metric = dp.build_torus(1, [n])
        x = chart.axis_coords(0)
        d = np.minimum(x, 1.0 - x)
        eps = 1.5 + 0.2 * np.sin(2 * np.pi * x)
        w = dp.WeightField(mu=chart.field((1.0 + d) ** eps))
        u = chart.field(np.sin(2 * np.pi * x))
        e = chart.field(2.5 + 0.3 * np.cos(2 * np.pi * x))
        vals[n] = dp.weighted_modular(u, e, w, metric)
    assert vals[16384] == pytest.approx(vals[65536], abs=1e-8)


def test_holder_trivial_cases(torus):
    chart, metric = torus
    e = chart.constant(2.0)
    rep = dp.holder_check(chart.constant(1.0), chart.constant(1.0), e, metric)
    assert rep.passed
    assert rep.lhs == pytest.approx(1.0, rel=1e-14)
    assert rep.rhs == pytest.approx(2.0, rel=1e-11)
    rep0 = dp.holder_check(chart.constant(1.0), chart.zeros(), e, metric)
    assert rep0.passed and rep0.lhs == 0.0 and rep0.rhs == 0.0


def test_holder_randomized(torus, variable_q):
    chart, metric = torus
    for i in range(100):
        rng = dp.substream(13, "holder", i)
        u = dp.random_band_limited(chart, rng, amplitude=float(10 ** rng.uniform(-1, 1)), mean=float(rng.uniform(-1, 1)))
        v = dp.random_band_limited(chart, rng, amplitude=float(10 ** rng.uniform(-1, 1)))
        rep = dp.holder_check(u, v, variable_q, metric)
        assert rep.passed, f"trial {i}: lhs={rep.lhs} rhs={rep.rhs}"


def test_holder_factor_value(torus):
    chart, _ = torus
    x = chart.axis_coords(0)
    e = chart.field(1.7 + 0.2 * np.sin(2 * np.pi * x))
    assert holder_factor(e) == pytest.approx(1 + 1 / e.values.min() + 1 / e.values.max())


def test_relations_norm_exactly_one(torus, variable_q):
    chart, metric = torus
    rng = dp.substream(17, "rel1")
    u = dp.random_band_limited(chart, rng, amplitude=1.0, mean=0.3)
    nu = dp.luxemburg_norm(u, variable_q, metric)
    rep = dp.modular_norm_relations(chart.field(u.values / nu), variable_q, metric)
    assert rep.ok
    assert abs(rep.modular_value - 1.0) <= 1e-9


def test_relations_constant_exponent_collapse(torus):
    chart, metric = torus
    rng = dp.substream(17, "rel2")
    u = dp.random_band_limited(chart, rng, amplitude=0.4)
    e = chart.constant(2.5)
    rep = dp.modular_norm_relations(u, e, metric)
    assert rep.ok
    # all clauses collapse to modular = norm^e
    assert rep.modular_value == pytest.approx(rep.norm**2.5, rel=1e-10)


def test_relations_randomized(torus, variable_q):
    chart, metric = torus
    for i in range(100):
        rng = dp.substream(19, "rel", i)
        u = dp.random_band_limited(chart, rng, amplitude=float(10 ** rng.uniform(-1.5, 1.5)), mean=float(rng.uniform(-0.5, 0.5)))
        rep = dp.modular_norm_relations(u, variable_q, metric)
        assert rep.ok, f"trial {i}: {rep.failed()}"


def test_relations_clause_iv_sequences(torus, variable_q):
    chart, metric = torus
    rng = dp.substream(23, "seq")
    u = dp.random_band_limited(chart, rng, amplitude=1.0, mean=0.5)
    norms, mods = [], []
    for k in range(0, 30, 6):
        scaled = chart.field(u.values / 2.0**k)
        norms.append(dp.luxemburg_norm(scaled, variable_q, metric))
        mods.append(dp.modular(scaled, variable_q, metric))
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert all(b < a for a, b in zip(mods, mods[1:]))
    assert norms[-1] < 1e-6 and mods[-1] < 1e-6


def test_sobolev_norm_constant_field(torus):
    chart, metric = torus
    e = chart.constant(2.0)
    u = chart.constant(1.3)
    assert dp.sobolev_norm(u, e, metric) == pytest.approx(
        dp.luxemburg_norm(u, e, metric), rel=1e-12
    )
    assert dp.sobolev_norm(chart.zeros(), e, metric) == 0.0


def test_sobolev_norm_sine_analytic():
    chart, metric = dp.build_torus(1, [8192])
    x = chart.axis_coords(0)
    u = chart.field(np.sin(2 * np.pi * x))
    e = chart.constant(2.0)
    expected = math.sqrt(0.5) * (1.0 + 2.0 * math.pi)
    assert dp.sobolev_norm(u, e, metric) == pytest.approx(expected, abs=1e-6)


def test_conjugate_exponent_guard(torus):
    chart, _ = torus
    e = chart.constant(2.0)
    conj = dp.conjugate_exponent(e)
    assert np.allclose(conj.values, 2.0)
    near_one = chart.constant(1.0)
    conj2 = dp.conjugate_exponent(near_one)
    assert np.all(np.isfinite(conj2.values))


@pytest.fixture(scope="module")
def setup():
    chart, metric = dp.build_torus(1, [64])
    e = dp.ExponentField(p=chart.constant(3.0), q=chart.constant(2.0))
    w = dp.WeightField(mu=chart.constant(1.0))
    return chart, metric, e, w


class TestEstimateConstants:
    def test_requires_enough_trials(self, setup):
        chart, metric, e, w = setup
        with pytest.raises(ValueError, match="at least 100"):
            dp.estimate_constants(e, w, metric, trials=10, seed=0)

    def test_poincare_reaches_first_mode(self, setup):
        chart, metric, e, w = setup
        consts = dp.estimate_constants(e, w, metric, trials=100, seed=42)
        assert consts.c_poincare >= 1.0 / (2 * math.pi) - 1e-3

    def test_single_mode_ratio_closed_form(self, setup):
        # the discrete ratio for the first mode is h / sin(2 pi h)
        chart, metric, e, w = setup
        x = chart.axis_coords(0)
        u = chart.field(np.sin(2 * np.pi * x))
        gn = dp.grad_norm_g(dp.gradient(u), metric)
        ratio = dp.luxemburg_norm(u, e.q, metric) / dp.luxemburg_norm(gn, e.q, metric)
        h = 1.0 / 64
        assert ratio == pytest.approx(h / math.sin(2 * math.pi * h), rel=1e-10)
        assert ratio == pytest.approx(1.0 / (2 * math.pi), rel=(2 * math.pi * h) ** 2 / 6 * 1.1)

    def test_more_trials_never_decrease(self, setup):
        chart, metric, e, w = setup
        c100 = dp.estimate_constants(e, w, metric, trials=100, seed=7, refine_iters=0)
        c150 = dp.estimate_constants(e, w, metric, trials=150, seed=7, refine_iters=0)
        assert c150.c_poincare >= c100.c_poincare
        assert c150.D_embed >= c100.D_embed
        assert c150.c1_embed >= c100.c1_embed

    def test_r_q_value(self, setup):
        chart, metric, e, w = setup
        consts = dp.estimate_constants(e, w, metric, trials=100, seed=1)
        assert consts.r_q == pytest.approx(1 + 1 / e.q_minus + 1 / e.q_plus)

    def test_deterministic(self, setup):
        chart, metric, e, w = setup
        a = dp.estimate_constants(e, w, metric, trials=100, seed=3)
        b = dp.estimate_constants(e, w, metric, trials=100, seed=3)
        assert a == b


def test_said_embedding_estimate_holds():
    chart, metric = dp.build_torus(1, [64])
    x = chart.axis_coords(0)
    p = chart.field(3.0 + 0.5 * np.sin(2 * np.pi * x + 2.0))
    q = chart.field(1.7 + 0.2 * np.sin(2 * np.pi * x))
    e = dp.ExponentField(p=p, q=q)
    w = dp.WeightField(mu=chart.constant(1.0))
    consts = dp.estimate_constants(e, w, metric, trials=150, seed=11)
    factor = (1.01 * consts.D_embed * (1.01 * consts.c_poincare + 1.0)) ** e.p_plus
    for i in range(200):
        rng = dp.substream(29, "said", i)
        u0 = dp.random_band_limited(chart, rng, amplitude=float(10 ** rng.uniform(-0.5, 0.5)))
        gq = dp.grad_norm_g(dp.gradient(u0), metric)
        norm_p = dp.luxemburg_norm(u0, p, metric)
        norm_g = dp.luxemburg_norm(gq, q, metric)
        if norm_p == 0 or norm_g == 0:
            continue
        s = 1.000001 * max(1.0 / norm_p, 1.0 / norm_g)
        lhs = dp.modular(chart.field(s * u0.values), p, metric)
        rhs = factor * dp.modular(chart.field(s * gq.values), q, metric) ** (e.p_plus / e.q_minus)
        assert lhs <= rhs, f"trial {i}: {lhs} > {rhs}"


def test_weight_exponent_window():
    chart, metric = dp.build_torus(2, [8, 8])
    e = dp.ExponentField(p=chart.constant(1.8), q=chart.constant(1.2))
    lo, hi = dp.weight_exponent_window(e, dim=2)
    # N=2, p=1.8, q=1.2: lo = 3.6/(3.6-0.24) = 15/14, hi = 3
    assert np.allclose(lo.values, 3.6 / 3.36)
    assert np.allclose(hi.values, 3.0)
    assert np.all(lo.values < hi.values)
