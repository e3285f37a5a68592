"""Exterior-vanishing checks for the stretched-exponential constructions."""

from __future__ import annotations

import math

import numpy as np

from .fields import DensityField, Restricted, StretchedExp, Transported
from .geometry import AffineMap, ConvexRegion, Direction, Line, line_intersects, map_region, transport_line
from .quadrature import QuadratureSpec
from .transform import EXTERIOR, INTERSECTS_HOLE, Sinogram, line_integral

__all__ = ["counterexample_field", "vanishing_summary", "transport_correspondence"]


def counterexample_field(beta: float, region: ConvexRegion, part: str = "Re") -> Restricted:
    """``exp(-z^beta)`` (real or imaginary part) set to zero on the closed hole."""
    return Restricted(StretchedExp(beta, part), region)


def vanishing_summary(sino: Sinogram, margin: float = 10.0, sanity_factor: float = 1e3) -> dict:
    """Exterior cells must satisfy ``|v| <= margin * budget``; some hole cell must exceed ``sanity_factor`` times that."""
    thr = margin * sino.errors
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(sino.values) / thr
    ext = (sino.mask == EXTERIOR) & np.isfinite(sino.values)
    hole = (sino.mask == INTERSECTS_HOLE) & np.isfinite(sino.values)
    ext_ratio = float(np.max(ratio[ext])) if ext.any() else 0.0
    hole_ratio = float(np.max(ratio[hole])) if hole.any() else 0.0
    exterior_ok = bool(ext.any()) and ext_ratio <= 1.0
    sanity_ok = hole_ratio >= sanity_factor
    return {
        "max_abs": float(np.max(np.abs(sino.values[ext]))) if ext.any() else 0.0,
        "max_rel": ext_ratio,
        "cells_checked": int(ext.sum()),
        "tolerance": 1.0,
        "pass": exterior_ok and sanity_ok,
        "max_threshold": float(np.max(thr[ext])) if ext.any() else 0.0,
        "hole_cells": int(hole.sum()),
        "max_hole_ratio": hole_ratio,
        "sanity_factor": sanity_factor,
        "sanity_pass": sanity_ok,
        "divergent_cells": int((sino.mask == 2).sum()),
    }


def _sample_lines(region, n, rng, p_max, exterior=True, limit=100000):
    out = []
    tries = 0
    while len(out) < n and tries < limit:
        tries += 1
        line = Line(Direction(float(rng.uniform(0.0, 2 * math.pi))), float(rng.uniform(-p_max, p_max)))
        if line_intersects(region, line) != exterior:
            out.append(line)
    return out


def transport_correspondence(
    field: DensityField,
    region: ConvexRegion,
    amap: AffineMap,
    n_lines: int = 100,
    seed: int = 0,
    lam: float = 0.0,
    quad: QuadratureSpec | None = None,
    p_max: float = 6.0,
    margin: float = 10.0,
    n_hole: int = 10,
) -> dict:
    """Zero sets of ``R f_A`` and ``R f`` under ``l -> A l``.

    ``f`` vanishes in transform on lines avoiding ``region``; ``f_A(x) = f(Ax)``
    should then vanish on lines avoiding ``A^{-1} region``.  Each sampled
    exterior line ``l`` is checked on both sides of the correspondence, and
    for hole lines at ``lam = 0`` the ratio ``R f_A(l) |A omega_perp| / R f(A l)``
    is recorded (it is 1 for the arc-length reparameterisation).
    """
    quad = quad or QuadratureSpec()
    rng = np.random.default_rng(seed)
    fA = Transported(field, amap)
    pre = map_region(amap.inverse(), region)
    rows = []
    worst = 0.0
    for line in _sample_lines(pre, n_lines, rng, p_max):
        a = line_integral(fA, line, lam, quad)
        img = transport_line(amap, line)
        b = line_integral(field, img, lam, quad)
        ra = abs(a.value) / (margin * a.budget)
        rb = abs(b.value) / (margin * b.budget)
        worst = max(worst, ra, rb)
        rows.append({"theta": line.theta, "p": line.p, "value_A": a.value, "budget_A": a.budget,
                     "value_image": b.value, "budget_image": b.budget})
    ratios = []
    nonzero = 0
    for line in _sample_lines(pre, n_hole, rng, p_max, exterior=False):
        a = line_integral(fA, line, 0.0, quad)
        img = transport_line(amap, line)
        b = line_integral(field, img, 0.0, quad)
        if abs(a.value) > 1e3 * margin * a.budget and abs(b.value) > 1e3 * margin * b.budget:
            nonzero += 1
            stretch = float(np.linalg.norm(amap.linear @ line.perp))
            ratios.append(a.value * stretch / b.value)
    return {
        "max_abs": max((abs(r["value_A"]) for r in rows), default=0.0),
        "max_rel": worst,
        "cells_checked": len(rows),
        "tolerance": 1.0,
        "pass": len(rows) == n_lines and worst <= 1.0 and nonzero > 0,
        "hole_lines_nonzero": nonzero,
        "jacobian_ratios": ratios,
        "lines": rows,
    }
