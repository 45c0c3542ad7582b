"""Constraint-set machinery: fibering maps, branch classification, thresholds.

A nonzero field u is on the constraint set when the ray derivative
psi(u) = <J'(u), u> vanishes. Along the ray t -> t u every term of psi is an
explicit power of t (the source is a pure power), so the fibering map and
its exact t-derivative are cheap nodewise sums. Roots of the fibering map
are constraint points on the ray; the sign of t phi'(t) there separates the
local-minimum branch (positive), the local-maximum branch (negative), and
inflections (zero within tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grid import ScalarField, grad_norm_g, gradient, pairwise_sum
from .problem import PowerNonlinearity, ProblemInstance, _source_mask, gateaux
from .spaces import ConstantsEstimate

__all__ = [
    "NehariClass",
    "FiberingSample",
    "ProjectionResult",
    "Thresholds",
    "NoRootError",
    "NotOnNehariError",
    "psi",
    "fibering",
    "project",
    "classify",
    "thresholds",
    "threshold_formulas",
]

PSI_TOL = 1e-8
ROOT_TOL = 1e-10
CLASS_TOL = 1e-9


class NehariClass(Enum):
    PLUS = "plus"
    MINUS = "minus"
    ZERO = "zero"


class NoRootError(RuntimeError):
    """The fibering map kept one sign over the whole probe bracket."""


class NotOnNehariError(ValueError):
    """classify() called for a field that does not satisfy the constraint."""


@dataclass(frozen=True)
class FiberingSample:
    t_values: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("t grid must be a nonempty 1-d array")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("t grid must be positive and strictly increasing")
        if len(self.phi) != t.size or len(self.phi_prime) != t.size:
            raise ValueError("phi arrays must match the t grid")


@dataclass(frozen=True)
class ProjectionResult:
    t_roots: tuple
    classes: tuple
    phi_at_roots: tuple
    scale: float

    def first(self, target: NehariClass):
        """Smallest projection root of the requested class, or None."""
        for t, cls in zip(self.t_roots, self.classes):
            if cls is target:
                return t
        return None


class _RayProfile:
    """Nodewise power decomposition of psi(t u) and J(t u) along one ray."""

    def __init__(self, P: ProblemInstance, u: ScalarField, truncated: bool = False):
        nl = P.nonlinearity
        if not isinstance(nl, PowerNonlinearity):
            raise TypeError(
                "fibering requires the pure power source family; tabulated "
                "sources only support pointwise evaluation"
            )
        vals = u.values
        mask = _source_mask(vals, truncated)
        gn = grad_norm_g(gradient(u), P.metric).values
        au = np.abs(vals)
        w = P.node_weight
        p = P.exponents.p.values
        q = P.exponents.q.values
        mu = P.weight.mu.values
        a_grad_p = w * gn**p
        a_grad_q = w * mu * gn**q
        a_u_q = w * mask * au**q
        a_u_p = w * mask * au**p
        a_src = w * mask * nl.amplitude.values * au**nl.beta

        self.p = p.ravel()
        self.q = q.ravel()
        self.beta = float(nl.beta)
        self.lam = float(P.lam)
        self.coef_p = (a_grad_p + a_u_p).ravel()
        self.coef_q = (a_grad_q - self.lam * a_u_q).ravel()
        self.j_p = ((a_grad_p + a_u_p) / p).ravel()
        self.j_q = ((a_grad_q - self.lam * a_u_q) / q).ravel()
        self.src = pairwise_sum(a_src)
        self.j_src = pairwise_sum(a_src) / self.beta
        # dimensionless tolerance scale: the five ray integrals at t = 1
        self.scale = (
            pairwise_sum(a_grad_p)
            + pairwise_sum(a_grad_q)
            + self.lam * pairwise_sum(a_u_q)
            + pairwise_sum(a_u_p)
            + pairwise_sum(a_src)
        )

    def phi(self, t: float) -> float:
        t = float(t)
        return (
            pairwise_sum(t**self.p * self.coef_p + t**self.q * self.coef_q)
            - t**self.beta * self.src
        )

    def phi_prime(self, t: float) -> float:
        t = float(t)
        body = self.p * t ** (self.p - 1.0) * self.coef_p + self.q * t ** (self.q - 1.0) * self.coef_q
        return pairwise_sum(body) - self.beta * t ** (self.beta - 1.0) * self.src

    def energy_at(self, t: float) -> float:
        t = float(t)
        return (
            pairwise_sum(t**self.p * self.j_p + t**self.q * self.j_q)
            - t**self.beta * self.j_src
        )

    def classify_root(self, t: float) -> NehariClass:
        sign = t * self.phi_prime(t)
        tol = CLASS_TOL * self.scale
        if sign > tol:
            return NehariClass.PLUS
        if sign < -tol:
            return NehariClass.MINUS
        return NehariClass.ZERO


def psi(P: ProblemInstance, u: ScalarField, truncated: bool = False) -> float:
    """Ray derivative <J'(u), u>; shares the gateaux code path exactly."""
    return gateaux(P, u, u, truncated=truncated)


def fibering(P: ProblemInstance, u: ScalarField, t_grid, truncated: bool = False) -> FiberingSample:
    if u.max_abs == 0.0:
        raise ValueError("fibering is defined along rays through nonzero fields")
    profile = _RayProfile(P, u, truncated)
    t = np.asarray(t_grid, dtype=float)
    phi = np.array([profile.phi(tv) for tv in t])
    dphi = np.array([profile.phi_prime(tv) for tv in t])
    return FiberingSample(t_values=t, phi=phi, phi_prime=dphi)


def _refine_root(profile: _RayProfile, lo: float, hi: float, f_lo: float, f_hi: float) -> float:
    tol = ROOT_TOL * profile.scale
    best_t, best_f = (lo, abs(f_lo)) if abs(f_lo) < abs(f_hi) else (hi, abs(f_hi))
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        f_mid = profile.phi(mid)
        if abs(f_mid) < best_f:
            best_t, best_f = mid, abs(f_mid)
        if best_f <= tol:
            return best_t
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= 4.0 * np.finfo(float).eps * hi:
            break
    return best_t


def _roots_on_grid(profile: _RayProfile, t_grid) -> list:
    phi_vals = [profile.phi(t) for t in t_grid]
    roots = []
    for i in range(len(t_grid) - 1):
        a, b = t_grid[i], t_grid[i + 1]
        fa, fb = phi_vals[i], phi_vals[i + 1]
        if fa == 0.0:
            roots.append(float(a))
        elif (fa > 0) != (fb > 0):
            roots.append(_refine_root(profile, float(a), float(b), fa, fb))
    if phi_vals[-1] == 0.0:
        roots.append(float(t_grid[-1]))
    return roots


def project(
    P: ProblemInstance,
    u: ScalarField,
    truncated: bool = False,
    bracket=(1e-6, 1e6),
    n_grid: int = 256,
) -> ProjectionResult:
    """All constraint points on the ray through u, smallest t first.

    Sign changes of the fibering map on a log-spaced probe grid are refined
    by bisection until |phi(t)| <= 1e-10 times the ray scale. Raises
    NoRootError when the map keeps one sign over the whole bracket, which
    the superlinear source makes possible only for degenerate rays.
    """
    if u.max_abs == 0.0:
        raise ValueError("cannot project the zero field")
    profile = _RayProfile(P, u, truncated)
    if profile.scale == 0.0:
        raise NoRootError("ray profile vanishes identically (source fully truncated)")
    t_grid = np.geomspace(bracket[0], bracket[1], n_grid)
    roots = _roots_on_grid(profile, t_grid)
    if not roots:
        raise NoRootError(
            "fibering map has constant sign on the probe bracket "
            f"[{bracket[0]:g}, {bracket[1]:g}]: phi({bracket[0]:g}) = "
            f"{profile.phi(bracket[0]):.3e}, phi({bracket[1]:g}) = {profile.phi(bracket[1]):.3e}"
        )
    roots = sorted(set(roots))
    classes = tuple(profile.classify_root(t) for t in roots)
    return ProjectionResult(
        t_roots=tuple(roots),
        classes=classes,
        phi_at_roots=tuple(profile.phi(t) for t in roots),
        scale=profile.scale,
    )


def classify(P: ProblemInstance, u: ScalarField, truncated: bool = False) -> NehariClass:
    """Branch of a field already lying on the constraint set.

    The sign of <psi'(u), u> is evaluated as the exact t-derivative of the
    fibering map at t = 1, the only pairing the constrained analysis uses.
    """
    if u.max_abs == 0.0:
        raise ValueError("the zero field is not on the constraint set")
    profile = _RayProfile(P, u, truncated)
    residual = profile.phi(1.0)
    if abs(residual) > PSI_TOL * profile.scale:
        raise NotOnNehariError(
            f"field is not on the constraint set: |psi| = {abs(residual):.3e} "
            f"exceeds {PSI_TOL:g} * scale = {PSI_TOL * profile.scale:.3e}"
        )
    return profile.classify_root(1.0)


def threshold_formulas(p_minus, p_plus, q_minus, q_plus, mu0, c, D, c1):
    """Raw smallness thresholds in terms of the functional constants.

    Returns (lambda_star_raw, lambda_star_star): below the first the
    inflection set is expected empty, below the second every maximum-branch
    point has positive energy. The first may be negative (callers clamp and
    flag); the second vanishes exactly when p+ = q+.
    """
    denom = D**p_plus * (c + 1.0) ** p_plus
    lam_ss = mu0 * q_minus * (p_plus - q_plus) / (denom * p_plus * (p_plus - q_minus))
    term1 = 2.0 * mu0 * (p_plus - q_plus) / (denom * (p_plus - q_minus))
    term2 = (
        mu0 * c1 * (q_plus - q_minus) * (p_plus - q_plus)
        / (denom * (p_plus - q_minus) * (p_minus - q_minus))
    )
    term3 = p_plus / (p_plus - q_minus)
    lam_s = term1 - term2 - term3
    return lam_s, lam_ss


@dataclass(frozen=True)
class Thresholds:
    lambda_star: float
    lambda_star_star: float
    lambda_bar: float
    star_clamped: bool
    star_star_degenerate: bool
    constants: ConstantsEstimate

    def to_dict(self):
        return {
            "lambda_star": self.lambda_star,
            "lambda_star_star": self.lambda_star_star,
            "lambda_bar": self.lambda_bar,
            "star_clamped": self.star_clamped,
            "star_star_degenerate": self.star_star_degenerate,
            "constants": self.constants.to_dict(),
        }


def thresholds(P: ProblemInstance, consts: ConstantsEstimate) -> Thresholds:
    """Evaluate both smallness thresholds with the estimated constants.

    The no-inflection threshold is clamped at 0 (and flagged) when the raw
    expression is non-positive, which happens for weights without a large
    infimum. Both carry the estimate provenance.
    """
    e = P.exponents
    lam_s_raw, lam_ss = threshold_formulas(
        e.p_minus,
        e.p_plus,
        e.q_minus,
        e.q_plus,
        P.weight.mu0,
        consts.c_poincare,
        consts.D_embed,
        consts.c1_embed,
    )
    clamped = lam_s_raw <= 0.0
    lam_s = max(lam_s_raw, 0.0)
    return Thresholds(
        lambda_star=lam_s,
        lambda_star_star=lam_ss,
        lambda_bar=min(lam_s, lam_ss),
        star_clamped=clamped,
        star_star_degenerate=lam_ss == 0.0,
        constants=consts,
    )
