"""Sampled checks of the local decay conditions b) to e) on an exterior scan set."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .fields import ConditionE, DensityField, NotDifferentiableError
from .geometry import Direction, ExteriorScanSet, Line
from .quadrature import DivergentIntegralError, QuadratureSpec, integrate, seed_breaks
from .transform import SingularLineError, vanishing_threshold, weighted_moments

__all__ = ["class_condition_probe", "default_anchor_offset"]

QUANTIFIER_NOTE = (
    "pointwise: finiteness checked separately for each sampled (omega, p); "
    "uniformity of the neighbourhood in omega is not tested"
)


def default_anchor_offset(field: DensityField, k: int, p0: float) -> float:
    """``sqrt(j pi)`` lines for the condition-e example, otherwise ``+inf``."""
    if isinstance(field, ConditionE):
        j = max(k, 1)
        while math.sqrt(j * math.pi) <= p0:
            j += 1
        return math.sqrt(j * math.pi)
    return math.inf


def _abs_moments(field, line, k_max, quad, derivative=None):
    rs = weighted_moments(field, line, 0.0, k_max, quad, derivative)
    return [r.abs_value + r.tail for r in rs], all(r.converged for r in rs)


def _finiteness(field, thetas, p_samples, k_max, quad, derivative=None):
    worst = [0.0] * (k_max + 1)
    failures = []
    for th in thetas:
        for p in p_samples:
            line = Line(Direction(float(th)), float(p))
            try:
                vals, conv = _abs_moments(field, line, k_max, quad, derivative)
            except (DivergentIntegralError, SingularLineError) as exc:
                failures.append({"theta": float(th), "p": float(p), "reason": str(exc)})
                continue
            if not conv or not all(math.isfinite(v) for v in vals):
                failures.append({"theta": float(th), "p": float(p), "reason": "quadrature did not converge"})
                continue
            worst = [max(w, v) for w, v in zip(worst, vals)]
    return {"pass": not failures, "worst": worst, "failures": failures[:10], "quantifier": QUANTIFIER_NOTE}


def _weighted_growth(field, line, k, mu, t_max=4096.0, quad=None):
    """Partial integrals of ``|u|^k e^{mu |u|} |f|`` over ``[-T, T]`` for doubling ``T``."""
    quad = quad or QuadratureSpec()
    base, perp = line.p * line.omega, line.perp

    def g(u):
        f = np.abs(field.eval(base + u[:, None] * perp))
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.abs(u) ** k * np.exp(mu * np.abs(u))
        return np.where(f > 0, w * f, 0.0)

    partial = []
    total = 0.0
    lo_T = 0.0
    T = 1.0
    while lo_T < t_max:
        pieces = 0.0
        for a, b in ((lo_T, T), (-T, -lo_T)):
            with np.errstate(over="ignore", invalid="ignore"):
                r = integrate(g, seed_breaks(a, b, 1.0), quad.abs_tol, quad.rel_tol, 2000)
            pieces += r.value
        total += pieces
        partial.append({"T": T, "value": total})
        if not math.isfinite(total):
            return False, partial, "overflow of the weighted integrand"
        if total > 0 and pieces <= 1e-13 * total and T >= 8.0:
            return True, partial, "partial integrals settled"
        if total == 0.0 and T >= 64.0:
            return True, partial, "integrand vanishes"
        lo_T, T = T, 2.0 * T
    return False, partial, "partial integrals still growing at the cap"


def class_condition_probe(
    field: DensityField,
    scan: ExteriorScanSet,
    k_max: int,
    p_samples: Sequence[float],
    n_theta: int = 5,
    mu: float = 1.0,
    lam: float = 0.0,
    anchors: Mapping[int, float] | None = None,
    conditions: Sequence[str] = ("b", "c", "d", "e"),
    quad: QuadratureSpec | None = None,
) -> dict:
    """Check conditions b)-e) at sampled directions and offsets.

    b) ``int |u^k f|`` finite on sampled lines; c) the same for ``d_omega f``;
    d) ``int |u|^k e^{mu |u|} |f|`` settles along ``omega_0`` lines;
    e) ``R^(k)_lam f(omega_0, q_k)`` at the anchors, reported with its budget.
    Observed suprema are reported in place of the unspecified constants.
    """
    quad = quad or QuadratureSpec()
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if any(p <= scan.p0 for p in p_samples):
        raise ValueError("all p_samples must exceed the scan offset p0")
    if "c" in conditions and field.smoothness == "continuous":
        raise NotDifferentiableError(f"condition c needs a C1 field; {field.describe()} is continuous")
    thetas = scan.sample_thetas(n_theta)
    report: dict = {"field": field.describe(), "k_max": k_max, "p_samples": list(map(float, p_samples)),
                    "thetas": thetas.tolist(), "conditions": {}}
    if "b" in conditions:
        report["conditions"]["b"] = _finiteness(field, thetas, p_samples, k_max, quad)
    if "c" in conditions:
        report["conditions"]["c"] = _finiteness(field, thetas, p_samples, k_max, quad, derivative="omega")
    d0 = Direction(scan.theta0)
    if "d" in conditions:
        rows = []
        ok_all = True
        for p in p_samples:
            for k in range(k_max + 1):
                ok, partial, why = _weighted_growth(field, Line(d0, float(p)), k, mu, quad=quad)
                ok_all &= ok
                rows.append({"p": float(p), "k": k, "pass": ok, "reason": why,
                             "last_partial": partial[-1]["value"], "T": partial[-1]["T"]})
        report["conditions"]["d"] = {"pass": ok_all, "mu": mu, "lines": rows}
    if "e" in conditions:
        rows = []
        for k in range(k_max + 1):
            q = (anchors or {}).get(k, default_anchor_offset(field, k, scan.p0))
            if math.isinf(q):
                # q = +inf: follow the offsets outwards and report the last value.
                seq = [max(p_samples) * 2.0**j for j in range(1, 6)]
                vals = []
                for qq in seq:
                    try:
                        vals.append(weighted_moments(field, Line(d0, qq), lam, k, quad)[k].value)
                    except DivergentIntegralError:
                        vals.append(math.nan)
                rows.append({"k": k, "q": "inf", "sequence": seq, "values": vals, "limit": vals[-1],
                             "pass": bool(np.isfinite(vals[-1]) and abs(vals[-1]) <= 1e-10)})
            else:
                r = weighted_moments(field, Line(d0, q), lam, k, quad)[k]
                rows.append({"k": k, "q": q, "value": r.value, "budget": r.budget,
                             "pass": abs(r.value) <= vanishing_threshold(r)})
        report["conditions"]["e"] = {"pass": all(r["pass"] for r in rows), "anchors": rows}
    report["pass"] = all(c["pass"] for c in report["conditions"].values())
    return report
