"""Variable-exponent Lebesgue and Sobolev machinery on metric grids.

Modulars, Luxemburg norms (by bisection on the monotone modular), weighted
analogs, executable inequality checks, and seeded lower estimates of the
functional constants that feed the branch thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Chart,
    MetricField,
    ScalarField,
    band_filter,
    grad_norm_g,
    gradient,
    integrate,
    pairwise_sum,
    random_band_limited,
    substream,
)

__all__ = [
    "ExponentField",
    "WeightField",
    "ConstantsEstimate",
    "HolderReport",
    "ClauseCheck",
    "RelationsReport",
    "conjugate_exponent",
    "modular",
    "luxemburg_norm",
    "weighted_modular",
    "weighted_norm",
    "holder_check",
    "modular_norm_relations",
    "sobolev_norm",
    "estimate_constants",
    "weight_exponent_window",
]

_CONJUGATE_GUARD = 1.0 + 1e-6


@dataclass(frozen=True)
class ExponentField:
    """The exponent pair p(x), q(x) with cached extrema.

    Construction enforces the ordering 1 < q- <= q+ < p- <= p+. The upper
    bound p+ < dim is deliberately not enforced here; at desk scale it rarely
    holds and is surfaced as an instance warning instead.
    """

    p: ScalarField
    q: ScalarField

    def __post_init__(self):
        if self.p.chart != self.q.chart:
            raise ValueError("p and q must live on the same chart")
        p_vals, q_vals = self.p.values, self.q.values
        object.__setattr__(self, "p_minus", float(p_vals.min()))
        object.__setattr__(self, "p_plus", float(p_vals.max()))
        object.__setattr__(self, "q_minus", float(q_vals.min()))
        object.__setattr__(self, "q_plus", float(q_vals.max()))
        if not (1.0 < self.q_minus <= self.q_plus < self.p_minus <= self.p_plus):
            raise ValueError(
                "exponent ordering violated: need 1 < q- <= q+ < p- <= p+, got "
                f"q in [{self.q_minus}, {self.q_plus}], p in [{self.p_minus}, {self.p_plus}]"
            )

    @property
    def chart(self) -> Chart:
        return self.p.chart


@dataclass(frozen=True)
class WeightField:
    """Positive weight with cached infimum mu0 > 0."""

    mu: ScalarField

    def __post_init__(self):
        object.__setattr__(self, "mu0", float(self.mu.values.min()))
        if self.mu0 <= 0:
            raise ValueError(f"weight must be positive everywhere, min is {self.mu0}")

    @property
    def chart(self) -> Chart:
        return self.mu.chart


def conjugate_exponent(e: ScalarField) -> ScalarField:
    """Nodewise e/(e-1), with e clamped to 1 + 1e-6 from below."""
    safe = np.maximum(e.values, _CONJUGATE_GUARD)
    return e.chart.field(safe / (safe - 1.0))


def _check_exponent(e: ScalarField):
    if e.values.min() <= 1.0:
        raise ValueError(f"exponent must exceed 1 everywhere, min is {e.values.min()}")


def modular(u: ScalarField, e: ScalarField, metric: MetricField) -> float:
    """Integral of |u|^{e(x)} against the volume element."""
    _check_exponent(e)
    return integrate(u.chart.field(np.abs(u.values) ** e.values), metric)


def weighted_modular(u: ScalarField, e: ScalarField, w: WeightField, metric: MetricField) -> float:
    _check_exponent(e)
    dens = w.mu.values * np.abs(u.values) ** e.values
    return integrate(u.chart.field(dens), metric)


def _luxemburg(abs_vals, e_vals, weight_vals, metric, max_iter=200, rtol=1e-12):
    peak = float(abs_vals.max())
    if peak == 0.0:
        return 0.0
    e_lo = float(e_vals.min())
    e_hi = float(e_vals.max())
    cell = metric.chart.cell_volume
    wsd = metric.sqrt_det if weight_vals is None else metric.sqrt_det * weight_vals
    vol = pairwise_sum(wsd) * cell

    def rho(gamma):
        with np.errstate(over="ignore"):
            dens = (abs_vals / gamma) ** e_vals * wsd
        return pairwise_sum(dens) * cell

    lo = peak * vol ** (1.0 / e_hi) * 1e-8
    hi = peak * (1.0 + vol) ** (1.0 / e_lo)
    # hi always encloses the root; lo can miss it for fields supported on a
    # vanishing fraction of the nodes, so both ends expand geometrically
    for _ in range(200):
        if rho(hi) <= 1.0:
            break
        hi *= 4.0
    for _ in range(200):
        if rho(lo) >= 1.0:
            break
        lo /= 4.0
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def luxemburg_norm(u: ScalarField, e: ScalarField, metric: MetricField) -> float:
    """inf{gamma > 0 : modular(u/gamma) <= 1}, by bisection.

    The modular is continuous and strictly decreasing in gamma, so bisection
    on the bracket [max|u| vol^{1/e+} 1e-8, max|u| (1+vol)^{1/e-}] always
    encloses the root. Satisfies modular(u/result) = 1 to about 1e-10 for
    nonzero u, and returns 0 for the zero field.
    """
    _check_exponent(e)
    return _luxemburg(np.abs(u.values), e.values, None, metric)


def weighted_norm(u: ScalarField, e: ScalarField, w: WeightField, metric: MetricField) -> float:
    _check_exponent(e)
    return _luxemburg(np.abs(u.values), e.values, w.mu.values, metric)


def sobolev_norm(u: ScalarField, e: ScalarField, metric: MetricField) -> float:
    """First-order norm: Luxemburg norm of u plus that of |grad u|_g."""
    gnorm = grad_norm_g(gradient(u), metric)
    return luxemburg_norm(u, e, metric) + luxemburg_norm(gnorm, e, metric)


def holder_factor(e: ExponentField | ScalarField) -> float:
    """The constant 1 + 1/e- + 1/e+ used on the right of the Hoelder bound."""
    if isinstance(e, ExponentField):
        return 1.0 + 1.0 / e.q_minus + 1.0 / e.q_plus
    vals = e.values
    return 1.0 + 1.0 / float(vals.min()) + 1.0 / float(vals.max())


@dataclass(frozen=True)
class HolderReport:
    lhs: float
    rhs: float
    r_q: float
    norm_u: float
    norm_v: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def holder_check(
    u: ScalarField,
    v: ScalarField,
    e: ScalarField,
    metric: MetricField,
    r_factor: float | None = None,
) -> HolderReport:
    """Integral of |uv| against r_q ||u||_e ||v||_{e'}.

    ``r_factor`` overrides the default 1 + 1/e- + 1/e+ (used by fault
    injection in the verify suite).
    """
    _check_exponent(e)
    r_q = holder_factor(e) if r_factor is None else float(r_factor)
    lhs = integrate(u.chart.field(np.abs(u.values * v.values)), metric)
    nu = luxemburg_norm(u, e, metric)
    nv = luxemburg_norm(v, conjugate_exponent(e), metric)
    rhs = r_q * nu * nv
    return HolderReport(
        lhs=lhs, rhs=rhs, r_q=r_q, norm_u=nu, norm_v=nv, passed=lhs <= rhs + 1e-12
    )


@dataclass(frozen=True)
class ClauseCheck:
    name: str
    lhs: float
    rhs: float
    margin: float
    ok: bool


@dataclass(frozen=True)
class RelationsReport:
    norm: float
    modular_value: float
    clauses: tuple
    ok: bool

    def failed(self):
        return [c for c in self.clauses if not c.ok]


def modular_norm_relations(
    u: ScalarField,
    e: ScalarField,
    metric: MetricField,
    tol: float = 1e-12,
    unit_band: float = 1e-9,
) -> RelationsReport:
    """Check the norm/modular comparison clauses for one field.

    Covered: the trichotomy of norm and modular against 1, the two-sided
    power bounds norm^{e+} <= modular <= norm^{e-} (norm < 1) and its mirror
    (norm > 1), and the min/max sandwich
    min(rho^{1/e-}, rho^{1/e+}) <= norm <= max(rho^{1/e-}, rho^{1/e+}).
    Fields with norm within ``unit_band`` of 1 skip the strict trichotomy
    sides and instead require modular = 1 to 1e-8.
    """
    if u.max_abs == 0.0:
        raise ValueError("relations are stated for nonzero fields")
    _check_exponent(e)
    e_lo = float(e.values.min())
    e_hi = float(e.values.max())
    nu = luxemburg_norm(u, e, metric)
    rho = modular(u, e, metric)
    clauses = []

    if abs(nu - 1.0) <= unit_band:
        clauses.append(
            ClauseCheck("trichotomy_unit", rho, 1.0, 1e-8 - abs(rho - 1.0), abs(rho - 1.0) <= 1e-8)
        )
    elif nu < 1.0:
        clauses.append(ClauseCheck("trichotomy_below", rho, 1.0, 1.0 - rho, rho <= 1.0 + tol))
        lo, hi = nu**e_hi, nu**e_lo
        margin = min(rho - lo, hi - rho)
        clauses.append(ClauseCheck("power_bound_below", lo, hi, margin, margin >= -tol))
    else:
        clauses.append(ClauseCheck("trichotomy_above", rho, 1.0, rho - 1.0, rho >= 1.0 - tol))
        lo, hi = nu**e_lo, nu**e_hi
        margin = min(rho - lo, hi - rho)
        clauses.append(ClauseCheck("power_bound_above", lo, hi, margin, margin >= -tol))

    lo = min(rho ** (1.0 / e_lo), rho ** (1.0 / e_hi))
    hi = max(rho ** (1.0 / e_lo), rho ** (1.0 / e_hi))
    margin = min(nu - lo, hi - nu)
    clauses.append(ClauseCheck("norm_sandwich", lo, hi, margin, margin >= -tol))

    clauses = tuple(clauses)
    return RelationsReport(norm=nu, modular_value=rho, clauses=clauses, ok=all(c.ok for c in clauses))


@dataclass(frozen=True)
class ConstantsEstimate:
    """Finite-sample lower estimates of the functional constants.

    c_poincare: sup ||u||_q / || |grad u| ||_q over zero-mean fields.
    D_embed:    sup ||u||_p / (||u||_q + || |grad u| ||_q).
    c1_embed:   sup weighted q-modular of u normalized to unit Sobolev norm.
    r_q:        the Hoelder factor 1 + 1/q- + 1/q+.

    All are maxima over seeded band-limited samples (plus a smoothing-based
    refinement for the Poincare ratio), hence lower estimates of the true
    suprema; reports that consume them record trials and seed.
    """

    c_poincare: float
    D_embed: float
    c1_embed: float
    r_q: float
    trials: int
    seed: int

    def __post_init__(self):
        if min(self.c_poincare, self.D_embed, self.c1_embed, self.r_q) <= 0:
            raise ValueError("estimated constants must be positive")

    def to_dict(self):
        return {
            "c_poincare": self.c_poincare,
            "D_embed": self.D_embed,
            "c1_embed": self.c1_embed,
            "r_q": self.r_q,
            "trials": self.trials,
            "seed": self.seed,
        }


def _inverse_gradient_smoother(chart: Chart, max_mode_frac: float):
    """FFT solve of the central-difference Laplacian on the retained band.

    Used only to propose candidate extremal fields; every ratio is evaluated
    with the true metric norms afterwards.
    """
    grids = np.meshgrid(*[np.fft.fftfreq(n, d=1.0 / n) for n in chart.shape], indexing="ij")
    symbol = np.zeros(chart.shape)
    for g_k, n, h in zip(grids, chart.shape, chart.spacings):
        symbol = symbol + (np.sin(2.0 * np.pi * g_k / n) / h) ** 2
    mask = np.ones(chart.shape, dtype=bool)
    for g_k, n in zip(grids, chart.shape):
        mask &= np.abs(g_k) <= int(n * max_mode_frac)
    mask[(0,) * chart.dim] = False
    inv_symbol = np.where(mask, 1.0 / np.where(symbol > 0, symbol, 1.0), 0.0)

    def smooth(values):
        out = np.fft.ifftn(np.fft.fftn(values) * inv_symbol).real
        peak = np.max(np.abs(out))
        return out / peak if peak > 0 else out

    return smooth


def estimate_constants(
    exponents: ExponentField,
    weight: WeightField,
    metric: MetricField,
    trials: int = 200,
    seed: int = 0,
    max_mode_frac: float = 0.25,
    refine_iters: int = 40,
) -> ConstantsEstimate:
    """Seeded random search for the Poincare and embedding constants.

    Zero-mean band-limited samples drive the Poincare ratio; the same samples
    plus mean-shifted and constant candidates drive the embedding ratios
    (whose suprema admit constant fields). The best Poincare candidate is
    refined by repeated inverse-Laplacian smoothing, which converges to the
    extremal low mode for constant exponents. Deterministic given the seed;
    with the same seed, more trials can only increase the estimates.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    chart = exponents.chart
    p, q = exponents.p, exponents.q

    def poincare_ratio(field):
        ng = luxemburg_norm(grad_norm_g(gradient(field), metric), q, metric)
        if ng == 0.0:
            return 0.0
        return luxemburg_norm(field, q, metric) / ng

    def embed_ratio(field):
        s = sobolev_norm(field, q, metric)
        if s == 0.0:
            return 0.0
        return luxemburg_norm(field, p, metric) / s

    def weighted_ratio(field):
        s = sobolev_norm(field, q, metric)
        if s == 0.0:
            return 0.0
        unit = chart.field(field.values / s)
        return weighted_modular(unit, q, weight, metric)

    ones = chart.constant(1.0)
    c_best, c_field = 0.0, None
    d_best = embed_ratio(ones)
    c1_best = weighted_ratio(ones)
    for i in range(trials):
        rng = substream(seed, "constants", i)
        amp = float(10.0 ** rng.uniform(-1.0, 0.5))
        osc = random_band_limited(chart, rng, max_mode_frac, amplitude=amp)
        ratio = poincare_ratio(osc)
        if ratio > c_best:
            c_best, c_field = ratio, osc
        d_best = max(d_best, embed_ratio(osc))
        c1_best = max(c1_best, weighted_ratio(osc))
        shifted = chart.field(osc.values + float(rng.uniform(0.1, 2.0)))
        d_best = max(d_best, embed_ratio(shifted))
        c1_best = max(c1_best, weighted_ratio(shifted))

    if c_field is not None and refine_iters > 0:
        smooth = _inverse_gradient_smoother(chart, max_mode_frac)
        vals = c_field.values
        for _ in range(refine_iters):
            vals = smooth(vals)
            candidate = chart.field(vals)
            c_best = max(c_best, poincare_ratio(candidate))
            d_best = max(d_best, embed_ratio(candidate))

    return ConstantsEstimate(
        c_poincare=c_best,
        D_embed=d_best,
        c1_embed=c1_best,
        r_q=holder_factor(exponents),
        trials=trials,
        seed=int(seed),
    )


def weight_exponent_window(exponents: ExponentField, dim: int):
    """Nodewise admissible window for the weight-integrability exponent.

    Returns (lo, hi) fields with
    lo = N p / (N p - q (N - p)) and hi = p / (p - q), N = dim. This window
    is an optional diagnostic only; nothing downstream consumes it.
    """
    p = exponents.p.values
    q = exponents.q.values
    n = float(dim)
    lo = n * p / (n * p - q * (n - p))
    hi = p / (p - q)
    chart = exponents.chart
    return chart.field(lo), chart.field(hi)
