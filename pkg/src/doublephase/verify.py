"""Seeded property suite over the function-space inequalities.

Each trial draws random smooth fields and emits one CSV row per property:
property name, seed, lhs, rhs, margin, pass. Rows whose name ends in
"_info" are informational and do not gate the overall verdict (used for the
tighter Hoelder factor, which the adopted constant deliberately exceeds).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import grad_norm_g, gradient, random_band_limited, substream
from .nehari import psi
from .problem import energy, gateaux
from .spaces import (
    WeightField,
    estimate_constants,
    holder_check,
    luxemburg_norm,
    modular,
    modular_norm_relations,
    weighted_modular,
    weighted_norm,
)

__all__ = ["TrialRow", "run_verify_suite", "CSV_HEADER"]

CSV_HEADER = ["property", "seed", "lhs", "rhs", "margin", "pass"]


@dataclass(frozen=True)
class TrialRow:
    prop: str
    seed: int
    lhs: float
    rhs: float
    margin: float
    passed: bool

    @property
    def gating(self) -> bool:
        return not self.prop.endswith("_info")

    def to_csv_row(self):
        return [self.prop, self.seed, repr(self.lhs), repr(self.rhs), repr(self.margin), int(self.passed)]


def _weighted_relation_rows(u, q, w, metric, seed, rows):
    nu = weighted_norm(u, q, w, metric)
    rho = weighted_modular(u, q, w, metric)
    q_lo, q_hi = float(q.values.min()), float(q.values.max())
    tol = 1e-12
    if abs(nu - 1.0) <= 1e-9:
        rows.append(TrialRow("weighted_trichotomy", seed, rho, 1.0, 1e-8 - abs(rho - 1.0), abs(rho - 1.0) <= 1e-8))
    elif nu < 1.0:
        rows.append(TrialRow("weighted_trichotomy", seed, rho, 1.0, 1.0 - rho, rho <= 1.0 + tol))
        lo, hi = nu**q_hi, nu**q_lo
        margin = min(rho - lo, hi - rho)
        rows.append(TrialRow("weighted_power_bound", seed, lo, hi, margin, margin >= -tol))
    else:
        rows.append(TrialRow("weighted_trichotomy", seed, rho, 1.0, rho - 1.0, rho >= 1.0 - tol))
        lo, hi = nu**q_lo, nu**q_hi
        margin = min(rho - lo, hi - rho)
        rows.append(TrialRow("weighted_power_bound", seed, lo, hi, margin, margin >= -tol))


def _weighted_sequence_rows(u, q, w, metric, seed, rows):
    """Norm and modular of u/2^k (and 2^k u) vanish (blow up) together."""
    chart = u.chart
    shrink_norm = weighted_norm(chart.field(u.values / 2.0**24), q, w, metric)
    shrink_mod = weighted_modular(chart.field(u.values / 2.0**24), q, w, metric)
    ok = shrink_norm <= 1e-6 and shrink_mod <= 1e-6
    rows.append(TrialRow("weighted_seq_zero", seed, shrink_mod, shrink_norm, 1e-6 - max(shrink_mod, shrink_norm), ok))
    grow_norm = weighted_norm(chart.field(u.values * 2.0**24), q, w, metric)
    grow_mod = weighted_modular(chart.field(u.values * 2.0**24), q, w, metric)
    ok = grow_norm >= 1e6 and grow_mod >= 1e6
    rows.append(TrialRow("weighted_seq_inf", seed, grow_mod, grow_norm, min(grow_mod, grow_norm) - 1e6, ok))


def run_verify_suite(rc, seed: int, trials: int, fault: dict | None = None):
    """Run all trials; returns (rows, passed, constants).

    ``fault`` accepts test-only overrides; currently ``holder_rq`` replaces
    the Hoelder factor so a broken constant demonstrably fails the suite.
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    fault = fault or {}
    P = rc.build_instance()
    chart, metric = P.chart, P.metric
    exponents, weight = P.exponents, P.weight
    p, q = exponents.p, exponents.q
    consts = estimate_constants(
        exponents, weight, metric, trials=rc.constants_trials, seed=seed
    )
    r_fault = fault.get("holder_rq")
    r_tight = 1.0 + 1.0 / exponents.q_minus - 1.0 / exponents.q_plus
    said_factor = (1.01 * consts.D_embed * (1.01 * consts.c_poincare + 1.0)) ** exponents.p_plus
    rows: list[TrialRow] = []

    for i in range(trials):
        rng = substream(seed, "verify", i)
        amp = float(10.0 ** rng.uniform(-1.0, 1.0))
        mean = float(rng.uniform(-1.0, 1.0))
        u = random_band_limited(chart, rng, amplitude=amp, mean=mean)
        v = random_band_limited(chart, rng, amplitude=float(10.0 ** rng.uniform(-1.0, 1.0)))

        hol = holder_check(u, v, q, metric, r_factor=r_fault)
        rows.append(TrialRow("holder", seed + i, hol.lhs, hol.rhs, hol.margin, hol.passed))
        rhs_tight = r_tight * hol.norm_u * hol.norm_v
        rows.append(
            TrialRow("holder_tight_info", seed + i, hol.lhs, rhs_tight, rhs_tight - hol.lhs, hol.lhs <= rhs_tight + 1e-12)
        )

        rel = modular_norm_relations(u, q, metric)
        for clause in rel.clauses:
            rows.append(TrialRow(f"modular_norm_{clause.name}", seed + i, clause.lhs, clause.rhs, clause.margin, clause.ok))

        nu = rel.norm
        unit = chart.field(u.values / nu)
        rho_unit = modular(unit, q, metric)
        rows.append(
            TrialRow("lux_unit", seed + i, rho_unit, 1.0, 1e-10 - abs(rho_unit - 1.0), abs(rho_unit - 1.0) <= 1e-10)
        )
        t = float(rng.uniform(0.1, 10.0))
        scaled = luxemburg_norm(chart.field(t * u.values), q, metric)
        gap = abs(scaled - t * nu) / max(t * nu, 1e-300)
        rows.append(TrialRow("lux_homogeneity", seed + i, scaled, t * nu, 1e-10 - gap, gap <= 1e-10))

        ones = WeightField(mu=chart.constant(1.0))
        wm = weighted_modular(u, q, ones, metric)
        m = modular(u, q, metric)
        gap = abs(wm - m) / max(abs(m), 1e-300)
        rows.append(TrialRow("weighted_reduces", seed + i, wm, m, 1e-12 - gap, gap <= 1e-12))

        mu_rand = chart.field(np.exp(rng.uniform(-1.0, 1.0)) * (1.2 + random_band_limited(chart, rng).values))
        w_rand = WeightField(mu=mu_rand)
        _weighted_relation_rows(u, q, w_rand, metric, seed + i, rows)
        if i == 0:
            _weighted_sequence_rows(u, q, w_rand, metric, seed + i, rows)

        # embedding estimate on a zero-mean sample scaled into the regime
        # where the norm-to-modular exponent steps point the right way
        u0 = random_band_limited(chart, rng, amplitude=float(10.0 ** rng.uniform(-0.5, 0.5)))
        gq = grad_norm_g(gradient(u0), metric)
        norm_p = luxemburg_norm(u0, p, metric)
        norm_gq = luxemburg_norm(gq, q, metric)
        if norm_p > 0 and norm_gq > 0:
            s = 1.000001 * max(1.0 / norm_p, 1.0 / norm_gq)
            us = chart.field(s * u0.values)
            gqs = chart.field(s * gq.values)
            lhs = modular(us, p, metric)
            rhs = said_factor * modular(gqs, q, metric) ** (exponents.p_plus / exponents.q_minus)
            rows.append(TrialRow("said_embedding", seed + i, lhs, rhs, rhs - lhs, lhs <= rhs))

        if i % 10 == 0:
            phi = random_band_limited(chart, rng, amplitude=1.0)
            g_val = gateaux(P, u, phi)
            h = 1e-5
            up = chart.field(u.values + h * phi.values)
            dn = chart.field(u.values - h * phi.values)
            fd = (energy(P, up).total - energy(P, dn).total) / (2.0 * h)
            gap = abs(g_val - fd) / (1.0 + abs(g_val))
            rows.append(TrialRow("gateaux_fd", seed + i, g_val, fd, 1e-6 - gap, gap <= 1e-6))

            psi_val = psi(P, u)
            ray = gateaux(P, u, u)
            rows.append(TrialRow("psi_gateaux", seed + i, psi_val, ray, abs(psi_val - ray), psi_val == ray))

            br = energy(P, u)
            recomposed = br.grad_p_term + br.grad_q_term - br.lambda_q_term + br.u_p_term - br.F_term
            gap = abs(br.total - recomposed)
            rows.append(TrialRow("energy_decomposition", seed + i, br.total, recomposed, 1e-12 - gap, gap <= 1e-12))

    passed = all(r.passed for r in rows if r.gating)
    return rows, passed, consts
