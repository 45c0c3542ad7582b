import numpy as np
import pytest

import doublephase as dp


def make_reference_instance(lam=0.1, n=64, mu=1.0):
    """1-d unit torus, p = 3, q = 2, beta = 4, unit source amplitude."""
    chart, metric = dp.build_torus(1, [n])
    return dp.ProblemInstance(
        chart=chart,
        metric=metric,
        exponents=dp.ExponentField(p=chart.constant(3.0), q=chart.constant(2.0)),
        weight=dp.WeightField(mu=chart.constant(mu)),
        lam=lam,
        nonlinearity=dp.PowerNonlinearity(beta=4.0, amplitude=chart.constant(1.0)),
    )


def make_variable_instance(lam=0.7, n=64):
    """Smooth variable exponents: q in [1.5, 1.9], p in [2.5, 3.5]."""
    chart, metric = dp.build_torus(1, [n])
    x = chart.axis_coords(0)
    p = chart.field(3.0 + 0.5 * np.sin(2 * np.pi * x + 2.0))
    q = chart.field(1.7 + 0.2 * np.sin(2 * np.pi * x))
    mu = chart.field(1.5 + 0.5 * np.sin(2 * np.pi * x + 1.0))
    return dp.ProblemInstance(
        chart=chart,
        metric=metric,
        exponents=dp.ExponentField(p=p, q=q),
        weight=dp.WeightField(mu=mu),
        lam=lam,
        nonlinearity=dp.PowerNonlinearity(beta=4.0, amplitude=chart.constant(1.0)),
    )


def make_calibrated_ray(s_target=1.0, g_target=1.0, e_target=1.0, lam=1.0, n=64):
    """Instance and field whose discrete fibering map is exactly

        phi(t) = S t^3 + G t^2 - E t^4

    with (S, G, E) the requested targets. Built by scaling a sine mode and
    solving for the source amplitude and the weight from the implemented
    quadrature itself, so the closed form holds to float precision.
    """
    chart, metric = dp.build_torus(1, [n])
    x = chart.axis_coords(0)
    u0 = chart.field(np.sin(2 * np.pi * x))
    gn = dp.grad_norm_g(dp.gradient(u0), metric)
    A0 = dp.integrate(chart.field(gn.values**3), metric)
    D0 = dp.integrate(chart.field(np.abs(u0.values) ** 3), metric)
    B0 = dp.integrate(chart.field(gn.values**2), metric)
    C0 = dp.integrate(chart.field(u0.values**2), metric)
    E0 = dp.integrate(chart.field(u0.values**4), metric)
    c = (s_target / (A0 + D0)) ** (1.0 / 3.0)
    a_const = e_target / (c**4 * E0)
    mu_const = (g_target + lam * c**2 * C0) / (c**2 * B0)
    if mu_const <= 0:
        raise ValueError("targets need a larger lambda to keep the weight positive")
    P = dp.ProblemInstance(
        chart=chart,
        metric=metric,
        exponents=dp.ExponentField(p=chart.constant(3.0), q=chart.constant(2.0)),
        weight=dp.WeightField(mu=chart.constant(mu_const)),
        lam=lam,
        nonlinearity=dp.PowerNonlinearity(beta=4.0, amplitude=chart.constant(a_const)),
    )
    return P, chart.field(c * u0.values)


@pytest.fixture(scope="session")
def unit_torus_64():
    return dp.build_torus(1, [64])


@pytest.fixture(scope="session")
def reference_instance():
    return make_reference_instance()


@pytest.fixture(scope="session")
def variable_instance():
    return make_variable_instance()


@pytest.fixture(scope="session")
def golden_ray():
    return make_calibrated_ray(1.0, 1.0, 1.0, lam=1.0)
