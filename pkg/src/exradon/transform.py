"""Forward exponential Radon transform and its weighted moments.

``R_lam f(omega, p) = int exp(-lam u) f(p omega + u omega_perp) du``, with
``u`` increasing along ``omega_perp``.  Each line integral is computed on a
window chosen from the field's decay envelopes; the discarded tails are
bounded and reported alongside the quadrature error.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .fields import DensityField, Mollified, NotDifferentiableError, SingularPointError
from .geometry import ConvexRegion, Direction, Line, line_intersects
from .quadrature import (
    DivergentIntegralError,
    QuadResult,
    QuadratureSpec,
    integrate,
    seed_breaks,
    tail_bound,
    truncation_radius,
)

__all__ = [
    "DivergentTransformError",
    "SingularLineError",
    "InsufficientDecayError",
    "LineIntegral",
    "GridSpec",
    "Sinogram",
    "MomentTable",
    "MASK_NAMES",
    "EXTERIOR",
    "INTERSECTS_HOLE",
    "DIVERGENT",
    "line_integral",
    "weighted_moment",
    "weighted_moments",
    "line_integrals_at",
    "sinogram",
    "direct_moment_table",
    "convolution_check",
    "helgason_moment_check",
    "vanishing_threshold",
    "worker_count",
]

EXTERIOR, INTERSECTS_HOLE, DIVERGENT = 0, 1, 2
MASK_NAMES = ("exterior", "intersects-hole", "divergent")


class DivergentTransformError(DivergentIntegralError):
    pass


class SingularLineError(ValueError):
    pass


class InsufficientDecayError(DivergentIntegralError):
    pass


@dataclass(frozen=True)
class LineIntegral:
    """Value of one line integral with its quadrature error and tail bound."""

    value: float
    error: float
    tail: float
    abs_value: float
    window: tuple
    n_eval: int
    converged: bool

    @property
    def budget(self) -> float:
        return self.error + self.tail

    def __float__(self) -> float:
        return float(self.value)


def worker_count() -> int:
    """Worker processes for grid sweeps, from ``EXRADON_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("EXRADON_WORKERS", "1")))
    except ValueError:
        return 1


def _ordered_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- single lines -------------------------------------------------------------

def _direction_vector(line: Line, derivative) -> np.ndarray | None:
    if derivative is None:
        return None
    if isinstance(derivative, str):
        if derivative == "omega":
            return line.omega
        if derivative == "perp":
            return line.perp
        raise ValueError(f"unknown derivative {derivative!r}")
    v = np.asarray(derivative, dtype=float)
    return v / np.linalg.norm(v)


def _side_window(field: DensityField, line: Line, side: int, lam: float, quad: QuadratureSpec, k: int):
    env = field.envelope(line, side, 0.0)
    if env is None:
        raise DivergentTransformError(
            f"{field.describe()} has no decay envelope along {'+' if side > 0 else '-'}perp of {line}")
    if env.log_c > 700.0:
        raise DivergentTransformError(
            f"{field.describe()} reaches e^{env.log_c:.0f} along {line}; the transform is beyond double range")
    kappa = -lam * side
    target = quad.truncation_threshold * max(1.0, math.exp(env.log_c))
    try:
        R, _ = truncation_radius(env, target, k, kappa, cap=quad.max_halfwidth,
                                 initial=max(1.0, field.length_scale))
    except DivergentIntegralError as exc:
        raise DivergentTransformError(str(exc)) from exc
    return env, kappa, R


def _window(field, line, lam, quad, k_max, derivative):
    k_env = k_max + (1 if derivative is not None else 0)
    plus = _side_window(field, line, +1, lam, quad, k_env)
    minus = _side_window(field, line, -1, lam, quad, k_env)
    return plus, minus


def _tails(plus, minus, ks, derivative):
    extra = 1 if derivative is not None else 0
    out = []
    for k in ks:
        t = 0.0
        for env, kappa, R in (plus, minus):
            t += tail_bound(env, R, k + extra, kappa)
        out.append(t)
    return np.array(out)


def _line_quadrature(field, line, lam, quad, ks, derivative):
    if field.singular_segment(line):
        raise SingularLineError(f"{line} runs along the singular set of {field.describe()}")
    dvec = _direction_vector(line, derivative)
    if dvec is not None and field.smoothness == "continuous":
        raise NotDifferentiableError(f"{field.describe()} is only continuous")
    plus, minus = _window(field, line, lam, quad, max(ks), derivative)
    lo, hi = -minus[2], plus[2]
    extra = [u for u in field.breakpoints(line)]
    breaks = seed_breaks(lo, hi, field.length_scale, extra, field.seed_width(line))
    ks_arr = np.asarray(ks, dtype=float)[:, None]
    base = line.p * line.omega
    perp = line.perp
    noisy = dvec is None and field.has_eval_error
    n_k = len(ks)

    def integrand(u):
        x = base + u[:, None] * perp
        f = field.eval(x) if dvec is None else field.gradient(x) @ dvec
        weight = np.exp(-lam * u)[None, :] * np.where(ks_arr == 0, 1.0, u[None, :] ** ks_arr)
        rows = weight * f
        if noisy:
            # Integrated evaluation-error bound, carried as extra components.
            rows = np.vstack([rows, np.abs(weight) * field.eval_error(x)])
        return rows

    res = integrate(integrand, breaks, quad.abs_tol, quad.rel_tol, quad.max_panels)
    if noisy:
        val, err, absv = (np.asarray(a) for a in (res.value, res.error, res.abs_value))
        res = QuadResult(val[:n_k], err[:n_k] + np.abs(val[n_k:]) + err[n_k:], absv[:n_k], res.n_eval,
                         res.converged)
    tails = _tails(plus, minus, ks, derivative)
    return res, tails, (lo, hi)


def weighted_moments(
    field: DensityField,
    line: Line,
    lam: float,
    k_max: int,
    quad: QuadratureSpec | None = None,
    derivative=None,
) -> list[LineIntegral]:
    """``int exp(-lam u) u^k g(p omega + u omega_perp) du`` for ``k = 0..k_max``.

    ``g`` is the field itself, or its directional derivative along
    ``derivative`` (``"omega"``, ``"perp"`` or a 2-vector).
    """
    quad = quad or QuadratureSpec()
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    ks = list(range(k_max + 1))
    res, tails, win = _line_quadrature(field, line, lam, quad, ks, derivative)
    return [
        LineIntegral(float(res.value[k]), float(res.error[k]), float(tails[k]), float(res.abs_value[k]),
                     win, res.n_eval, res.converged)
        for k in ks
    ]


def weighted_moment(field, line, lam, k, quad=None, derivative=None) -> LineIntegral:
    return weighted_moments(field, line, lam, k, quad, derivative)[k]


def line_integral(field, line, lam, quad=None, derivative=None) -> LineIntegral:
    """Exponential Radon transform of ``field`` on one line; see :func:`weighted_moments`."""
    return weighted_moments(field, line, lam, 0, quad, derivative)[0]


def line_integrals_at(
    field: DensityField,
    theta: float,
    ps: Sequence[float],
    lam: float,
    quad: QuadratureSpec | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Transform values on many parallel lines with one shared set of panels.

    Returns ``(values, budgets)``.  Intended for smooth fields where the
    union of the per-line windows is a reasonable common window.
    """
    quad = quad or QuadratureSpec()
    ps = np.asarray(ps, dtype=float)
    d = Direction(theta)
    lines = [Line(d, float(p)) for p in ps]
    wins = [_window(field, ln, lam, quad, 0, None) for ln in lines]
    hi = max(w[0][2] for w in wins)
    lo = -max(w[1][2] for w in wins)
    tails = np.array([tail_bound(w[0][0], hi, 0, w[0][1]) + tail_bound(w[1][0], -lo, 0, w[1][1]) for w in wins])
    omega, perp = d.omega, d.perp
    widths = [field.seed_width(ln) for ln in lines]
    breaks = seed_breaks(lo, hi, field.length_scale, width=lambda u: min(w(u) for w in widths))

    def integrand(u):
        x = ps[:, None, None] * omega + u[None, :, None] * perp
        return np.exp(-lam * u)[None, :] * field.eval(x)

    res = integrate(integrand, breaks, quad.abs_tol, quad.rel_tol, quad.max_panels)
    return np.asarray(res.value), np.asarray(res.error) + tails


def vanishing_threshold(result: LineIntegral) -> float:
    """``10 * (quadrature error + tail bound)``: the bar for a numerically zero line."""
    return 10.0 * result.budget


# -- grids ----------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform ``(theta, p)`` grid; angles in radians."""

    theta_start: float
    theta_count: int
    theta_step: float
    p_start: float
    p_count: int
    p_step: float

    def __post_init__(self):
        if self.theta_count < 1 or self.p_count < 1:
            raise ValueError("grid counts must be >= 1")
        if self.theta_count > 1 and self.theta_step <= 0:
            raise ValueError("theta_step must be positive")
        if self.p_count > 1 and self.p_step <= 0:
            raise ValueError("p_step must be positive")

    @classmethod
    def from_degrees(cls, theta_start_deg, theta_count, theta_step_deg, p_start, p_count, p_step):
        return cls(math.radians(theta_start_deg), int(theta_count), math.radians(theta_step_deg),
                   float(p_start), int(p_count), float(p_step))

    @classmethod
    def centered(cls, theta0: float, half_count: int, theta_step: float, p_lo: float, p_hi: float, p_count: int):
        """Grid with ``2 * half_count + 1`` angles centred on ``theta0``."""
        return cls(theta0 - half_count * theta_step, 2 * half_count + 1, theta_step,
                   p_lo, p_count, (p_hi - p_lo) / (p_count - 1))

    @property
    def thetas(self) -> np.ndarray:
        return self.theta_start + self.theta_step * np.arange(self.theta_count)

    @property
    def ps(self) -> np.ndarray:
        return self.p_start + self.p_step * np.arange(self.p_count)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.theta_count, self.p_count)

    def refined(self) -> "GridSpec":
        """Same extent with both steps halved."""
        return GridSpec(self.theta_start, 2 * self.theta_count - 1, self.theta_step / 2,
                        self.p_start, 2 * self.p_count - 1, self.p_step / 2)

    def as_dict(self) -> dict:
        return {
            "theta_start": self.theta_start, "theta_count": self.theta_count, "theta_step": self.theta_step,
            "p_start": self.p_start, "p_count": self.p_count, "p_step": self.p_step,
        }


@dataclass
class Sinogram:
    lam: float
    grid: GridSpec
    values: np.ndarray
    errors: np.ndarray
    mask: np.ndarray
    provenance: dict = dc_field(default_factory=dict)

    @property
    def exterior(self) -> np.ndarray:
        return self.mask == EXTERIOR

    def rows(self):
        for i, th in enumerate(self.grid.thetas):
            for j, p in enumerate(self.grid.ps):
                yield th, p, self.values[i, j], MASK_NAMES[self.mask[i, j]], self.errors[i, j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_rad", "p", "value", "mask", "err_estimate"])
        for th, p, v, m, e in self.rows():
            w.writerow([f"{th:.16e}", f"{p:.16e}", f"{v:.16e}", m, f"{e:.16e}"])
        return buf.getvalue()


def _row_task(args):
    field, region, theta, ps, lam, quad, compute_hole = args
    d = Direction(theta)
    vals = np.full(len(ps), np.nan)
    errs = np.full(len(ps), np.nan)
    mask = np.zeros(len(ps), dtype=np.int8)
    for j, p in enumerate(ps):
        line = Line(d, float(p))
        hole = region is not None and line_intersects(region, line)
        mask[j] = INTERSECTS_HOLE if hole else EXTERIOR
        if hole and not compute_hole:
            continue
        try:
            r = line_integral(field, line, lam, quad)
        except (DivergentIntegralError, SingularLineError, SingularPointError):
            mask[j] = DIVERGENT
            continue
        vals[j] = r.value
        errs[j] = r.budget
    return vals, errs, mask


def sinogram(
    field: DensityField,
    region: ConvexRegion | None,
    grid: GridSpec,
    lam: float,
    quad: QuadratureSpec | None = None,
    compute_hole: bool = False,
    workers: int | None = None,
) -> Sinogram:
    """Transform values on every grid line, masking lines that meet the hole.

    Cells meeting ``region`` are computed only when ``compute_hole`` is set;
    lines where the transform diverges or meets the singular set are masked
    as divergent.  ``errors`` holds quadrature error plus tail bound.
    """
    quad = quad or QuadratureSpec()
    ps = grid.ps
    tasks = [(field, region, float(th), ps, lam, quad, compute_hole) for th in grid.thetas]
    rows = _ordered_map(_row_task, tasks, workers)
    values = np.stack([r[0] for r in rows])
    errors = np.stack([r[1] for r in rows])
    mask = np.stack([r[2] for r in rows])
    prov = {"field": field.describe(), "quadrature": quad.as_dict(),
            "region": None if region is None else region.describe()}
    return Sinogram(lam, grid, values, errors, mask, prov)


@dataclass
class MomentTable:
    """``values[k, i, j] = R^(k)_lam f(theta_i, p_j)`` with validity mask and error budget."""

    lam: float
    grid: GridSpec
    values: np.ndarray
    err_budget: np.ndarray
    valid: np.ndarray
    origin: str

    @property
    def k_max(self) -> int:
        return self.values.shape[0] - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "theta_rad", "p", "value", "origin", "err_budget"])
        thetas, ps = self.grid.thetas, self.grid.ps
        for k in range(self.k_max + 1):
            for i, th in enumerate(thetas):
                for j, p in enumerate(ps):
                    if not self.valid[k, i, j]:
                        continue
                    w.writerow([k, f"{th:.16e}", f"{p:.16e}", f"{self.values[k, i, j]:.16e}",
                                self.origin, f"{self.err_budget[k, i, j]:.16e}"])
        return buf.getvalue()


def _moment_row_task(args):
    field, theta, ps, lam, k_max, quad, region = args
    d = Direction(theta)
    vals = np.full((k_max + 1, len(ps)), np.nan)
    errs = np.full((k_max + 1, len(ps)), np.nan)
    for j, p in enumerate(ps):
        line = Line(d, float(p))
        if region is not None and line_intersects(region, line):
            continue
        try:
            rs = weighted_moments(field, line, lam, k_max, quad)
        except (DivergentIntegralError, SingularLineError, SingularPointError):
            continue
        vals[:, j] = [r.value for r in rs]
        errs[:, j] = [r.budget for r in rs]
    return vals, errs


def direct_moment_table(
    field: DensityField,
    grid: GridSpec,
    lam: float,
    k_max: int,
    quad: QuadratureSpec | None = None,
    region: ConvexRegion | None = None,
    thetas: Sequence[int] | None = None,
    workers: int | None = None,
) -> MomentTable:
    """Weighted moments by direct quadrature; ``thetas`` restricts to some grid rows."""
    quad = quad or QuadratureSpec()
    rows_idx = list(range(grid.theta_count)) if thetas is None else list(thetas)
    ps = grid.ps
    tasks = [(field, float(grid.thetas[i]), ps, lam, k_max, quad, region) for i in rows_idx]
    rows = _ordered_map(_moment_row_task, tasks, workers)
    values = np.full((k_max + 1,) + grid.shape, np.nan)
    errs = np.full_like(values, np.nan)
    for i, (v, e) in zip(rows_idx, rows):
        values[:, i, :] = v
        errs[:, i, :] = e
    return MomentTable(lam, grid, values, errs, np.isfinite(values), "direct")


# -- identities -------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    max_abs: float
    max_rel: float
    cells_checked: int
    tolerance: float
    passed: bool
    details: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"max_abs": self.max_abs, "max_rel": self.max_rel, "cells_checked": self.cells_checked,
               "tolerance": self.tolerance, "pass": bool(self.passed)}
        out.update(self.details)
        return out


def _convolution_rhs(rg_of_q, field, theta, ps, lam, radius, n, quad):
    q = np.linspace(-radius, radius, n)
    wq = np.full(n, 2.0 * radius / (n - 1))
    wq[[0, -1]] *= 0.5
    rg = rg_of_q(q)
    shifted = (ps[:, None] - q[None, :]).ravel()
    rf, _ = line_integrals_at(field, theta, shifted, lam, quad)
    return rf.reshape(len(ps), n) @ (wq * rg)


def convolution_check(
    field: DensityField,
    radius: float,
    region: ConvexRegion | None,
    grid: GridSpec,
    lam: float,
    quad: QuadratureSpec | None = None,
    tolerance: float = 1e-3,
    n_start: int = 9,
    levels: int = 4,
    noise_floor: float = 1e-9,
) -> CheckReport:
    """Compare ``R(f * g_r)`` with the p-convolution ``R g_r * R f`` on exterior cells.

    The right side uses the trapezoid rule on ``[-r, r]`` (the bump transform
    and all its derivatives vanish at the ends), starting from ``n_start``
    nodes and halving the step ``levels - 1`` times.  The discrepancy must
    not increase under refinement beyond ``noise_floor``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    quad = quad or QuadratureSpec()
    moll = field if isinstance(field, Mollified) and field.radius == radius else Mollified(field, radius)
    lhs = sinogram(moll, region, grid, lam, quad)
    bump = moll.bump
    ext = lhs.exterior
    scale = float(np.max(np.abs(lhs.values[ext]))) if ext.any() else 0.0
    history = []
    rhs = np.full(grid.shape, np.nan)
    n = n_start
    for _ in range(levels):
        for i, th in enumerate(grid.thetas):
            cols = np.where(ext[i])[0]
            if cols.size == 0:
                continue
            d = Direction(float(th))

            def rg_of_q(q, d=d):
                return np.array([line_integral(bump, Line(d, float(qq)), lam, quad).value for qq in q])

            rhs[i, cols] = _convolution_rhs(rg_of_q, field, float(th), grid.ps[cols], lam, radius, n, quad)
        diff = np.abs(lhs.values - rhs)[ext]
        max_abs = float(diff.max()) if diff.size else 0.0
        history.append({"n_q": n, "step": 2.0 * radius / (n - 1), "max_abs": max_abs,
                        "max_rel": max_abs / scale if scale > 0 else (0.0 if max_abs == 0 else math.inf)})
        n = 2 * n - 1
    rels = [h["max_rel"] for h in history]
    stable = all(b <= a + noise_floor for a, b in zip(rels, rels[1:]))
    final = history[-1]
    return CheckReport(final["max_abs"], final["max_rel"], int(ext.sum()), tolerance,
                       final["max_rel"] <= tolerance and stable,
                       {"refinement": history, "stable_under_refinement": stable, "lambda": lam,
                        "radius": radius})


def _trig_design(thetas: np.ndarray, degree: int) -> np.ndarray:
    cols = [np.ones_like(thetas)]
    for j in range(1, degree + 1):
        cols += [np.cos(j * thetas), np.sin(j * thetas)]
    return np.stack(cols, axis=1)


def helgason_moment_check(
    field: DensityField,
    k_max: int,
    thetas: Sequence[float],
    p_window: tuple[float, float],
    lam: float = 0.0,
    quad: QuadratureSpec | None = None,
    tolerance: float = 1e-6,
    panels: int = 16,
    order: int = 20,
) -> dict:
    """Fit ``M_k(theta) = int R f(theta, p) p^k dp`` by trigonometric polynomials of degree k.

    The p-integral is composite Gauss-Legendre over ``p_window``.  The
    residual ratio is ``||M_k - fit|| / max(||M_k||, ||M_0||)`` so that
    identically vanishing moments are judged against the mass scale.
    """
    quad = quad or QuadratureSpec()
    thetas = np.asarray(thetas, dtype=float)
    lo, hi = p_window
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = ((edges[:-1] + half)[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    M = np.zeros((k_max + 1, thetas.size))
    budget = np.zeros(thetas.size)
    for i, th in enumerate(thetas):
        vals, errs = line_integrals_at(field, float(th), nodes, lam, quad)
        for k in range(k_max + 1):
            M[k, i] = np.sum(weights * vals * nodes**k)
        budget[i] = np.sum(weights * errs)
    # Tails beyond the window are checked, not assumed.
    edge_vals = np.array([max(abs(line_integral(field, Line(Direction(float(th)), p), lam, quad).value)
                              for p in (lo, hi)) for th in thetas])
    ref = np.linalg.norm(M[0])
    per_k = []
    for k in range(k_max + 1):
        A = _trig_design(thetas, k)
        coef, *_ = np.linalg.lstsq(A, M[k], rcond=None)
        resid = float(np.linalg.norm(M[k] - A @ coef))
        denom = max(float(np.linalg.norm(M[k])), float(ref))
        ratio = resid / denom if denom > 0 else 0.0
        per_k.append({"k": k, "residual": resid, "signal_norm": float(np.linalg.norm(M[k])),
                      "ratio": ratio, "pass": ratio <= tolerance, "coefficients": coef.tolist()})
    return {
        "lambda": lam,
        "k_max": k_max,
        "tolerance": tolerance,
        "per_k": per_k,
        "max_window_edge_value": float(edge_vals.max()),
        "max_quadrature_budget": float(budget.max()),
        "pass": all(r["pass"] for r in per_k),
        "moments": M.tolist(),
    }
