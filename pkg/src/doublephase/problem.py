"""The parametric double-phase problem: energy, derivative, residual.

The unknown u lives on a periodic metric grid. The energy combines a
p(x)-growth and a weighted q(x)-growth gradient term with a q-power well, a
p-power penalty, and a superlinear power source. Only directional objects
are ever assembled (weak formulation); the operator itself never is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import Chart, MetricField, ScalarField, grad_norm_g, gradient, integrate
from .spaces import ExponentField, WeightField

__all__ = [
    "PowerNonlinearity",
    "TabulatedNonlinearity",
    "ProblemInstance",
    "EnergyBreakdown",
    "F1Report",
    "F3Report",
    "f_eval",
    "F_eval",
    "check_f1",
    "check_f3",
    "energy",
    "gateaux",
    "residual_gradient",
]


def _power(base: np.ndarray, expo) -> np.ndarray:
    """base**expo for base >= 0 with the convention 0**negative = 0.

    Needed for the degenerate gradient density |grad u|^{e-2} at critical
    points of u when e < 2: the product with grad u tends to 0 there.
    """
    out = np.zeros_like(base)
    nz = base > 0
    if np.isscalar(expo) or np.ndim(expo) == 0:
        out[nz] = base[nz] ** float(expo)
    else:
        out[nz] = base[nz] ** np.asarray(expo)[nz]
    return out


@dataclass(frozen=True)
class PowerNonlinearity:
    """Source f(x, s) = a(x) |s|^{beta-2} s with primitive a(x) |s|^beta / beta.

    For this family the superlinearity inequality holds with equality for
    every s, f(x, 0) = 0, and the small-argument decay against |s|^{q(x)-1}
    holds whenever beta exceeds the largest q. ``a_threshold`` records the
    amplitude A above which the superlinearity inequality is asserted.
    """

    beta: float
    amplitude: ScalarField
    a_threshold: float = 1.0
    verified_family: bool = True

    def __post_init__(self):
        if self.beta <= 1.0:
            raise ValueError(f"beta must exceed 1, got {self.beta}")
        if self.amplitude.values.min() <= 0:
            raise ValueError("amplitude must be positive everywhere")
        if self.a_threshold <= 0:
            raise ValueError("a_threshold must be positive")

    def f_values(self, u: np.ndarray) -> np.ndarray:
        return self.amplitude.values * _power(np.abs(u), self.beta - 2.0) * u

    def F_values(self, u: np.ndarray) -> np.ndarray:
        return self.amplitude.values * np.abs(u) ** self.beta / self.beta


@dataclass(frozen=True)
class TabulatedNonlinearity:
    """User-supplied source hook: f given as a callable on node values.

    The primitive is computed by fixed Gauss-Legendre quadrature from 0 to
    each node value. Hypotheses are not verified for this family; anything
    built on it carries an "unverified hypotheses" warning.
    """

    f: object
    beta: float
    a_threshold: float = 1.0
    quad_points: int = 64
    verified_family: bool = False

    def f_values(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.f(u), dtype=float)

    def F_values(self, u: np.ndarray) -> np.ndarray:
        nodes, weights = np.polynomial.legendre.leggauss(self.quad_points)
        # map [-1, 1] to [0, u] per node
        half = 0.5 * u
        samples = half[..., None] * (nodes + 1.0)
        vals = np.asarray(self.f(samples), dtype=float)
        return half * np.einsum("...k,k->...", vals, weights)


@dataclass(frozen=True)
class ProblemInstance:
    """One fully specified instance: grid, exponents, weight, lambda, source."""

    chart: Chart
    metric: MetricField
    exponents: ExponentField
    weight: WeightField
    lam: float
    nonlinearity: object

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        for other in (self.metric.chart, self.exponents.chart, self.weight.chart):
            if other != self.chart:
                raise ValueError("all fields must share the problem chart")
        warnings = []
        e = self.exponents
        nl = self.nonlinearity
        if getattr(nl, "verified_family", False):
            if nl.amplitude.chart != self.chart:
                raise ValueError("source amplitude must live on the problem chart")
            if nl.beta <= e.p_plus:
                raise ValueError(
                    f"superlinearity requires beta > p+ = {e.p_plus}, got beta = {nl.beta}"
                )
        else:
            warnings.append("tabulated source: hypotheses unverified")
        n = self.chart.dim
        if not e.p_plus < n:
            warnings.append(
                f"p+ = {e.p_plus} is not below the dimension {n}; "
                "critical-growth condition violated (desk-scale regime)"
            )
        if e.q_plus > e.q_minus:
            lhs = e.p_plus / (e.q_plus - e.q_minus)
            rhs = (e.p_plus - e.q_plus) / (e.p_plus - e.q_minus) - (
                (e.q_plus - e.q_minus) * (e.p_plus - e.q_plus)
            ) / ((e.p_plus - e.q_minus) * (e.p_minus - e.q_minus))
            if not lhs < rhs:
                warnings.append("exponent-spread inequality violated (diagnostic only)")
        else:
            warnings.append("exponent-spread inequality inapplicable: q+ equals q-")
        if not e.p_minus / e.q_plus <= 1.0 + 1.0 / n:
            warnings.append(f"p-/q+ exceeds 1 + 1/{n} (diagnostic only)")
        object.__setattr__(self, "warnings", tuple(warnings))
        # quadrature weight of each node in the discrete pairing
        nw = self.metric.sqrt_det * self.chart.cell_volume
        nw = nw.copy()
        nw.setflags(write=False)
        object.__setattr__(self, "node_weight", nw)

    def with_lambda(self, lam: float) -> "ProblemInstance":
        return replace(self, lam=float(lam))


def f_eval(nl, u: ScalarField) -> ScalarField:
    return u.chart.field(nl.f_values(u.values))


def F_eval(nl, u: ScalarField) -> ScalarField:
    return u.chart.field(nl.F_values(u.values))


@dataclass(frozen=True)
class F1Report:
    passed: bool
    max_gap: float
    reason: str = ""


def check_f1(nl, exponents: ExponentField, metric: MetricField, samples=None) -> F1Report:
    """Superlinearity: 0 < integral of F(x, a) <= integral of f(x, a) a / beta.

    Checked at constant sample amplitudes |a| above the recorded threshold.
    For the power family both sides coincide, so the gap is float noise.
    Fails outright when beta does not exceed p+.
    """
    if nl.beta <= exponents.p_plus:
        return F1Report(False, math.inf, f"beta = {nl.beta} does not exceed p+ = {exponents.p_plus}")
    chart = metric.chart
    if samples is None:
        A = nl.a_threshold
        samples = (2.0 * A, -2.0 * A, 5.0 * A, -5.0 * A)
    worst = 0.0
    for alpha in samples:
        if abs(alpha) <= nl.a_threshold:
            return F1Report(False, math.inf, f"sample {alpha} not above threshold {nl.a_threshold}")
        const = np.full(chart.shape, float(alpha))
        lhs = integrate(chart.field(nl.F_values(const)), metric)
        rhs = integrate(chart.field(nl.f_values(const) * alpha / nl.beta), metric)
        scale = max(abs(lhs), abs(rhs), 1.0)
        if lhs <= 0:
            return F1Report(False, math.inf, f"primitive integral not positive at alpha={alpha}")
        worst = max(worst, (lhs - rhs) / scale)
        if lhs > rhs + 1e-12 * scale:
            return F1Report(False, worst, f"superlinearity bound violated at alpha={alpha}")
    return F1Report(True, worst)


@dataclass(frozen=True)
class F3Report:
    passed: bool
    alphas: tuple
    ratios: tuple


def check_f3(nl, exponents: ExponentField, metric: MetricField, alphas=None) -> F3Report:
    """Small-argument decay of max_x |f(x, a)| / |a|^{q(x)-1}.

    The ratio sequence over a = 1e-1 .. 1e-6 must decay geometrically, which
    for the power family happens exactly when beta exceeds the largest q.
    """
    chart = metric.chart
    if alphas is None:
        alphas = tuple(10.0 ** (-k) for k in range(1, 7))
    q_vals = exponents.q.values
    ratios = []
    for alpha in alphas:
        const = np.full(chart.shape, float(alpha))
        ratio = np.abs(nl.f_values(const)) / np.abs(alpha) ** (q_vals - 1.0)
        ratios.append(float(ratio.max()))
    quotients = [b / a for a, b in zip(ratios[:-1], ratios[1:]) if a > 0]
    passed = bool(quotients) and all(qt < 0.99 for qt in quotients)
    return F3Report(passed=passed, alphas=tuple(alphas), ratios=tuple(ratios))


@dataclass(frozen=True)
class EnergyBreakdown:
    """The five named terms; total = grad_p + grad_q - lambda_q + u_p - F."""

    grad_p_term: float
    grad_q_term: float
    lambda_q_term: float
    u_p_term: float
    F_term: float
    total: float

    def to_dict(self):
        return {
            "grad_p_term": self.grad_p_term,
            "grad_q_term": self.grad_q_term,
            "lambda_q_term": self.lambda_q_term,
            "u_p_term": self.u_p_term,
            "F_term": self.F_term,
            "total": self.total,
        }


def _source_mask(u_vals: np.ndarray, truncated: bool):
    if not truncated:
        return 1.0
    return (u_vals >= 0.0).astype(float)


def energy(P: ProblemInstance, u: ScalarField, truncated: bool = False) -> EnergyBreakdown:
    """Energy value, term by term.

    With ``truncated`` the three source terms (the lambda well, the p-power
    penalty, and the primitive) are integrated over {u >= 0} only; the
    gradient terms are untouched. Critical points of the truncated energy
    have no negative-side source, which is what drives them non-negative.
    """
    vals = u.values
    p = P.exponents.p.values
    q = P.exponents.q.values
    mu = P.weight.mu.values
    mask = _source_mask(vals, truncated)
    gn = grad_norm_g(gradient(u), P.metric).values
    au = np.abs(vals)
    chart = u.chart
    grad_p = integrate(chart.field(gn**p / p), P.metric)
    grad_q = integrate(chart.field(mu * gn**q / q), P.metric)
    lam_q = integrate(chart.field(P.lam * mask * au**q / q), P.metric)
    u_p = integrate(chart.field(mask * au**p / p), P.metric)
    f_term = integrate(chart.field(mask * P.nonlinearity.F_values(vals)), P.metric)
    total = grad_p + grad_q - lam_q + u_p - f_term
    return EnergyBreakdown(
        grad_p_term=grad_p,
        grad_q_term=grad_q,
        lambda_q_term=lam_q,
        u_p_term=u_p,
        F_term=f_term,
        total=total,
    )


def gateaux(P: ProblemInstance, u: ScalarField, phi: ScalarField, truncated: bool = False) -> float:
    """Directional derivative of the energy at u in direction phi.

    Zero for every phi exactly at discrete weak solutions. The degenerate
    density |grad u|^{e-2} is taken as 0 where grad u vanishes.
    """
    if phi.chart != u.chart:
        raise ValueError("u and phi must share a chart")
    vals = u.values
    p = P.exponents.p.values
    q = P.exponents.q.values
    mu = P.weight.mu.values
    mask = _source_mask(vals, truncated)
    gu = gradient(u)
    gphi = gradient(phi)
    gn = grad_norm_g(gu, P.metric).values
    coef = _power(gn, p - 2.0) + mu * _power(gn, q - 2.0)
    bilinear = np.einsum("...ab,...a,...b->...", P.metric.inv, gu.components, gphi.components)
    au = np.abs(vals)
    source = (
        -P.lam * _power(au, q - 2.0) * vals
        + _power(au, p - 2.0) * vals
        - P.nonlinearity.f_values(vals)
    ) * mask
    dens = coef * bilinear + source * phi.values
    return integrate(u.chart.field(dens), P.metric)


def residual_gradient(P: ProblemInstance, u: ScalarField, truncated: bool = False):
    """Node representative r of the energy derivative, and its norm.

    r is defined by <J'(u), phi> = sum_i w_i r_i phi_i with w the quadrature
    node weight, i.e. r_i = gateaux(u, delta_i) / w_i. The returned norm is
    sqrt(integral of r^2 dv), the dual norm of the derivative in the
    w-weighted node pairing; it vanishes exactly at discrete critical points.
    """
    vals = u.values
    chart = u.chart
    p = P.exponents.p.values
    q = P.exponents.q.values
    mu = P.weight.mu.values
    mask = _source_mask(vals, truncated)
    gu = gradient(u)
    gn = grad_norm_g(gu, P.metric).values
    coef = _power(gn, p - 2.0) + mu * _power(gn, q - 2.0)
    flux = np.einsum("...ab,...b->...a", P.metric.inv, gu.components)
    w = P.node_weight
    div = np.zeros(chart.shape)
    for a in range(chart.dim):
        h = chart.spacings[a]
        dens = w * coef * flux[..., a]
        div += (np.roll(dens, -1, axis=a) - np.roll(dens, 1, axis=a)) / (2.0 * h)
    au = np.abs(vals)
    source = (
        -P.lam * _power(au, q - 2.0) * vals
        + _power(au, p - 2.0) * vals
        - P.nonlinearity.f_values(vals)
    ) * mask
    r = -div / w + source
    r_field = chart.field(r)
    norm = math.sqrt(max(integrate(chart.field(r * r), P.metric), 0.0))
    return r_field, norm
