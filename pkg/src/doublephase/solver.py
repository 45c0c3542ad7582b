"""Constrained minimization on the two constraint branches.

Projected descent: from a band-limited random start, scale onto the target
branch, then repeat backtracking steps along the negative node residual with
re-projection after every step, until the residual norm passes the stop
threshold. Multistart runs are independent and merged deterministically.

The descent direction is spectrally confined to the resolved band
(|k| <= n/4 per axis by default): the periodic central-difference gradient
annihilates the two-node checkerboard, so unfiltered descent on the
truncated energy can fall into grid-artifact critical points carrying
negative checkerboard nodes. The reported residual norm is always the
unfiltered one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import ScalarField, band_filter, integrate, random_band_limited, substream
from .nehari import (
    NehariClass,
    NoRootError,
    Thresholds,
    _RayProfile,
    project,
    thresholds,
)
from .problem import ProblemInstance, energy, gateaux, residual_gradient
from .spaces import ConstantsEstimate, estimate_constants

__all__ = [
    "SolverConfig",
    "SolutionReport",
    "BranchError",
    "Certificate",
    "ExperimentResult",
    "SweepRow",
    "minimize_on_branch",
    "truncated_energy",
    "truncated_gateaux",
    "nonnegativity_certificate",
    "two_solution_experiment",
    "sweep",
]


@dataclass(frozen=True)
class SolverConfig:
    """Descent and multistart budget for one branch search."""

    target: NehariClass = NehariClass.MINUS
    truncate: bool = True
    multistart: int = 8
    seed: int = 0
    max_outer_iters: int = 5000
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    residual_tol: float = 1e-6
    projection_tol: float = 1e-8
    max_backtracks: int = 60
    start_mean: float | None = None
    start_amp: tuple = (0.02, 0.5)
    direction_max_mode_frac: float | None = 0.25
    use_bb_step: bool = True
    constants_trials: int = 200

    def __post_init__(self):
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1")
        for name in ("step0", "shrink", "armijo", "residual_tol", "projection_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration budgets must be positive")

    def resolved_start_mean(self) -> float:
        if self.start_mean is not None:
            return float(self.start_mean)
        return 1.0 if self.truncate else 0.0

    def to_dict(self):
        return {
            "target": self.target.value,
            "truncate": self.truncate,
            "multistart": self.multistart,
            "seed": self.seed,
            "max_outer_iters": self.max_outer_iters,
            "step0": self.step0,
            "shrink": self.shrink,
            "armijo": self.armijo,
            "residual_tol": self.residual_tol,
            "projection_tol": self.projection_tol,
            "max_backtracks": self.max_backtracks,
            "start_mean": self.resolved_start_mean(),
            "start_amp": list(self.start_amp),
            "direction_max_mode_frac": self.direction_max_mode_frac,
            "use_bb_step": self.use_bb_step,
            "constants_trials": self.constants_trials,
        }


@dataclass(frozen=True)
class SolutionReport:
    u: ScalarField
    J_value: float
    nehari_class: NehariClass
    psi_value: float
    residual_norm: float
    min_u: float
    theta_estimate: float
    iterations: int
    start_index: int
    n_converged_starts: int
    warnings: tuple
    constants: ConstantsEstimate | None = None

    def to_dict(self):
        d = {
            "J_value": self.J_value,
            "class": self.nehari_class.value,
            "psi_value": self.psi_value,
            "residual_norm": self.residual_norm,
            "min_u": self.min_u,
            "theta_estimate": self.theta_estimate,
            "iterations": self.iterations,
            "start_index": self.start_index,
            "n_converged_starts": self.n_converged_starts,
            "warnings": list(self.warnings),
        }
        if self.constants is not None:
            d["constants"] = self.constants.to_dict()
        return d


class BranchError(RuntimeError):
    """No multistart run converged on the requested branch."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind  # "empty" or "stalled"


def truncated_energy(P: ProblemInstance, u: ScalarField) -> float:
    """Energy with the source integrated over {u >= 0} only."""
    return energy(P, u, truncated=True).total


def truncated_gateaux(P: ProblemInstance, u: ScalarField, phi: ScalarField) -> float:
    return gateaux(P, u, phi, truncated=True)


@dataclass(frozen=True)
class Certificate:
    min_u: float
    negative_part_norm: float
    passed: bool


def nonnegativity_certificate(P: ProblemInstance, u: ScalarField, tol: float = 1e-10) -> Certificate:
    """Minimum node value and the norm of the negative part min(0, u)."""
    min_u = float(u.values.min())
    neg = np.minimum(u.values, 0.0)
    norm = math.sqrt(max(integrate(u.chart.field(neg * neg), P.metric), 0.0))
    return Certificate(min_u=min_u, negative_part_norm=norm, passed=min_u >= -tol)


def _start_field(P: ProblemInstance, cfg: SolverConfig, index: int) -> ScalarField:
    rng = substream(cfg.seed, "start", index)
    lo, hi = cfg.start_amp
    if cfg.multistart > 1:
        amp = float(np.geomspace(lo, hi, cfg.multistart)[index])
    else:
        amp = float(math.sqrt(lo * hi))
    return random_band_limited(
        P.chart, rng, max_mode_frac=0.25, amplitude=amp, mean=cfg.resolved_start_mean()
    )


def _project_onto(P, vals, cfg, local=False):
    """Scale a candidate onto the target branch; None when no matching root.

    Initial projections use the full probe bracket and take the smallest
    matching root. Re-projections inside the descent loop (``local``) first
    search a window around t = 1, where the root continuous with the current
    iterate lives, and fall back to the full bracket.
    """
    try:
        cand = P.chart.field(vals)
    except ValueError:
        return None
    if local:
        try:
            result = project(P, cand, truncated=cfg.truncate, bracket=(0.25, 4.0), n_grid=17)
            t = result.first(cfg.target)
            if t is not None:
                return P.chart.field(t * vals)
        except (NoRootError, ValueError):
            pass
    try:
        result = project(P, cand, truncated=cfg.truncate)
    except (NoRootError, ValueError):
        return None
    t = result.first(cfg.target)
    if t is None:
        return None
    return P.chart.field(t * vals)


@dataclass
class _StartOutcome:
    converged: bool
    projected: bool
    u: ScalarField | None = None
    J: float = math.inf
    residual_norm: float = math.inf
    iterations: int = 0
    note: str = ""


def _run_start(P: ProblemInstance, cfg: SolverConfig, index: int) -> _StartOutcome:
    u = _project_onto(P, _start_field(P, cfg, index).values, cfg)
    if u is None:
        return _StartOutcome(converged=False, projected=False, note="start did not project")
    J = energy(P, u, truncated=cfg.truncate).total
    frac = cfg.direction_max_mode_frac
    prev_u = None
    prev_g = None
    step_bb = None
    rnorm = math.inf
    for it in range(1, cfg.max_outer_iters + 1):
        r_field, rnorm = residual_gradient(P, u, truncated=cfg.truncate)
        if rnorm <= cfg.residual_tol:
            return _StartOutcome(True, True, u, J, rnorm, it - 1)
        g = r_field.values if frac is None else band_filter(r_field.values, P.chart, frac)
        d = -g
        slope = integrate(P.chart.field(r_field.values * d), P.metric)
        if slope >= 0.0:
            # filtered direction lost descent (can happen for rough metrics)
            g = r_field.values
            d = -g
            slope = -integrate(P.chart.field(g * g), P.metric)
        if cfg.use_bb_step and prev_u is not None:
            s = u.values - prev_u
            y = g - prev_g
            sy = integrate(P.chart.field(s * y), P.metric)
            ss = integrate(P.chart.field(s * s), P.metric)
            step_bb = ss / sy if sy > 0 and np.isfinite(sy) else None
        step = cfg.step0 if step_bb is None else float(np.clip(step_bb, 1e-10, 1e4))
        prev_u, prev_g = u.values, g
        accepted = False
        for _ in range(cfg.max_backtracks):
            cand = _project_onto(P, u.values + step * d, cfg, local=True)
            if cand is None:
                step *= cfg.shrink
                continue
            J_cand = energy(P, cand, truncated=cfg.truncate).total
            if J_cand <= J + cfg.armijo * step * slope:
                u, J = cand, J_cand
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            return _StartOutcome(False, True, u, J, rnorm, it, note="backtracking stalled")
    return _StartOutcome(False, True, u, J, rnorm, cfg.max_outer_iters, note="iteration cap reached")


def minimize_on_branch(
    P: ProblemInstance,
    cfg: SolverConfig,
    constants: ConstantsEstimate | None = None,
) -> SolutionReport:
    """Best converged multistart run on the target branch.

    Raises BranchError("empty") when no start even lands on the branch and
    BranchError("stalled") when starts land but none reaches the residual
    stop. Runs are merged by (J value, start index), so reports are
    deterministic for a fixed seed.
    """
    outcomes = [_run_start(P, cfg, i) for i in range(cfg.multistart)]
    converged = [(o.J, i, o) for i, o in enumerate(outcomes) if o.converged]
    if not converged:
        if not any(o.projected for o in outcomes):
            raise BranchError(
                "empty",
                f"no start projected onto the {cfg.target.value} branch "
                f"after {cfg.multistart} starts",
            )
        best = min((o.residual_norm, i) for i, o in enumerate(outcomes) if o.projected)
        raise BranchError(
            "stalled",
            f"{cfg.target.value} branch: no start reached residual "
            f"{cfg.residual_tol:g}; best residual {best[0]:.3e} (start {best[1]})",
        )
    J_best, index, out = min(converged, key=lambda rec: (rec[0], rec[1]))
    profile = _RayProfile(P, out.u, truncated=cfg.truncate)
    psi_value = profile.phi(1.0)
    cls = profile.classify_root(1.0)
    warnings = list(P.warnings)
    if cls is not cfg.target:
        warnings.append(f"converged point classifies as {cls.value}, target was {cfg.target.value}")
    return SolutionReport(
        u=out.u,
        J_value=out.J,
        nehari_class=cls,
        psi_value=psi_value,
        residual_norm=out.residual_norm,
        min_u=float(out.u.values.min()),
        theta_estimate=J_best,
        iterations=out.iterations,
        start_index=index,
        n_converged_starts=len(converged),
        warnings=tuple(warnings),
        constants=constants,
    )


@dataclass(frozen=True)
class ExperimentResult:
    status: str  # "converged" or "inconclusive"
    report_plus: SolutionReport | None
    report_minus: SolutionReport | None
    distinct: bool
    separation: float
    thresholds: Thresholds
    warnings: tuple
    failures: tuple

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "converged" else 2


def _node_l2(values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(values * values)))


def two_solution_experiment(P: ProblemInstance, cfg: SolverConfig) -> ExperimentResult:
    """Search both branches with the truncation active.

    Returns status "inconclusive" instead of failing when a branch cannot be
    found: the discrete search has no existence guarantee. Certificates and
    the separation test are recorded either way.
    """
    consts = estimate_constants(
        P.exponents,
        P.weight,
        P.metric,
        trials=cfg.constants_trials,
        seed=cfg.seed,
    )
    thr = thresholds(P, consts)
    warnings = list(P.warnings)
    if P.lam >= thr.lambda_bar:
        warnings.append(
            f"lambda = {P.lam:g} is not below the estimated threshold "
            f"lambda_bar = {thr.lambda_bar:g}; existence heuristics do not apply"
        )
    reports = {}
    failures = []
    for target in (NehariClass.PLUS, NehariClass.MINUS):
        run_cfg = replace(cfg, target=target, truncate=True)
        try:
            reports[target] = minimize_on_branch(P, run_cfg, constants=consts)
        except BranchError as exc:
            reports[target] = None
            failures.append(f"{target.value}: [{exc.kind}] {exc}")
    plus, minus = reports[NehariClass.PLUS], reports[NehariClass.MINUS]
    separation = 0.0
    distinct = False
    if plus is not None and minus is not None:
        diff = _node_l2(plus.u.values - minus.u.values)
        denom = _node_l2(plus.u.values) + _node_l2(minus.u.values)
        separation = diff / denom if denom > 0 else 0.0
        distinct = separation > 1e-6
        for rep in (plus, minus):
            cert = nonnegativity_certificate(P, rep.u)
            if not cert.passed:
                warnings.append(
                    f"{rep.nehari_class.value} minimizer has negative nodes: min = {cert.min_u:.3e}"
                )
    status = "converged" if plus is not None and minus is not None else "inconclusive"
    return ExperimentResult(
        status=status,
        report_plus=plus,
        report_minus=minus,
        distinct=distinct,
        separation=separation,
        thresholds=thr,
        warnings=tuple(warnings),
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class SweepRow:
    lam: float
    theta_plus_estimate: float
    theta_minus_estimate: float
    n_plus_found: int
    n_minus_found: int
    lambda_star: float
    lambda_star_star: float

    def to_csv_row(self):
        return [
            self.lam,
            self.theta_plus_estimate,
            self.theta_minus_estimate,
            self.n_plus_found,
            self.n_minus_found,
            self.lambda_star,
            self.lambda_star_star,
        ]


def sweep(
    P: ProblemInstance,
    lambdas,
    cfg: SolverConfig,
    n_samples: int = 64,
) -> list:
    """Branch census over a lambda grid, without descent.

    Per lambda: zero-mean band-limited samples are projected to estimate the
    maximum-branch level theta_minus (zero-mean rays are the family on which
    the smallness estimates are valid), and the solver's mean-biased start
    ladder is projected to count minimum-branch landings and estimate
    theta_plus. Thresholds are evaluated once (they do not depend on
    lambda).
    """
    consts = estimate_constants(
        P.exponents, P.weight, P.metric, trials=cfg.constants_trials, seed=cfg.seed
    )
    thr = thresholds(P, consts)
    rows = []
    for j, lam in enumerate(lambdas):
        Pj = P.with_lambda(float(lam))
        theta_minus = math.inf
        n_minus = 0
        for i in range(n_samples):
            rng = substream(cfg.seed, "sweep-minus", j, i)
            u = random_band_limited(Pj.chart, rng, amplitude=float(10.0 ** rng.uniform(-1, 1)))
            try:
                res = project(Pj, u)
            except NoRootError:
                continue
            profile = _RayProfile(Pj, u)
            for t, cls in zip(res.t_roots, res.classes):
                if cls is NehariClass.MINUS:
                    n_minus += 1
                    theta_minus = min(theta_minus, profile.energy_at(t))
                    break
        theta_plus = math.inf
        n_plus = 0
        plus_cfg = replace(cfg, target=NehariClass.PLUS, truncate=False, start_mean=1.0)
        for i in range(cfg.multistart):
            u = _start_field(Pj, plus_cfg, i)
            try:
                res = project(Pj, u)
            except NoRootError:
                continue
            profile = _RayProfile(Pj, u)
            for t, cls in zip(res.t_roots, res.classes):
                if cls is NehariClass.PLUS:
                    n_plus += 1
                    theta_plus = min(theta_plus, profile.energy_at(t))
                    break
        rows.append(
            SweepRow(
                lam=float(lam),
                theta_plus_estimate=theta_plus if n_plus else math.nan,
                theta_minus_estimate=theta_minus if n_minus else math.nan,
                n_plus_found=n_plus,
                n_minus_found=n_minus,
                lambda_star=thr.lambda_star,
                lambda_star_star=thr.lambda_star_star,
            )
        )
    return rows
