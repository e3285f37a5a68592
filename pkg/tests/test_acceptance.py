"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed in the terminal summary."""
import math
import time

import numpy as np
import pytest

from conftest import record_acceptance
from exradon.counterexample import counterexample_field, transport_correspondence, vanishing_summary
from exradon.fields import Bump, ConditionE, ExpDecay, Gaussian, Mollified, StretchedExp, Transported
from exradon.geometry import AffineMap, Line, line_intersects, normalizing_affine, wedge
from exradon.laplace import INDETERMINATE, moment_vanishing_test, moments_1d, series_vs_transform, \
    stieltjes_control, two_sided_exp, two_sided_laplace
from exradon.moments import RecursionConfig, recover_moments, relative_error, validate_recursion
from exradon.quadrature import QuadratureSpec
from exradon.transform import (GridSpec, convolution_check, direct_moment_table, helgason_moment_check, line_integral,
                               sinogram, vanishing_threshold, weighted_moment)

SQRT_PI = math.sqrt(math.pi)
B_MATRIX = np.array([[1.5, 0.4], [-0.3, 0.8]])
B_SHIFT = np.array([0.3, -0.2])


# -- 1 -------------------------------------------------------------------------------

def test_01_forward_closed_form():
    grid = GridSpec.from_degrees(0, 9, 40, -4, 33, 0.25)
    worst = {}
    for lam in (0.0, 0.5):
        s = sinogram(Gaussian(), None, grid, lam)
        exact = SQRT_PI * math.exp(lam * lam / 4) * np.exp(-grid.ps**2)[None, :]
        worst[lam] = float(np.max(np.abs(s.values - exact) / exact))
    ok = max(worst.values()) <= 1e-6
    record_acceptance(1, "forward closed form", ok,
                      f"max rel err {worst[0.0]:.1e} (lam=0), {worst[0.5]:.1e} (lam=0.5); tol 1e-6")
    assert ok


# -- 2 -------------------------------------------------------------------------------

def _any_line(rng, p_max=2.5):
    return float(rng.uniform(0, 2 * math.pi)), float(rng.uniform(-p_max, p_max))


def _catalog_samplers():
    """Each catalog field with a sampler of (theta, p, lam) on which its transform converges."""
    k = wedge(67.5, 180)

    def free(lam_max):
        return lambda rng: (*_any_line(rng), float(rng.uniform(-lam_max, lam_max)))

    def stretched(rng):
        # Both ends of the line lie in the decay cone of exp(-z^0.8) and the line crosses the cut, so the
        # transform is nonzero; only lam = 0 converges.
        th = float(rng.choice([0.0, math.pi]) + rng.uniform(-0.3, 0.3))
        return th, -float(rng.uniform(0.5, 3.0)) * math.cos(th) / abs(math.cos(th)), 0.0

    def condition_e(rng):
        # Directions with Gaussian rate cos(2 theta) >= 0.54 along the line; closer to the 45 degree edge the
        # cancellation in exp(a^2) sin(a^2) pushes the rounding floor above 1e-8 (see the unit test of that corner).
        return float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-2.5, 2.5)), float(rng.uniform(-0.5, 0.5))

    def restricted(rng):
        while True:
            th, p = _any_line(rng, 6.0)
            if line_intersects(k, Line.at(th, p)):
                return th, p, 0.0

    return [
        ("gaussian", Gaussian(0.9, (0.3, -0.4)), free(0.8)),
        ("exp_decay", ExpDecay(1.5, (0.2, 0.1)), free(1.0)),
        ("bump", Bump(0.8), free(1.0)),
        ("stretched", StretchedExp(0.8), stretched),
        ("condition_e", ConditionE(0.0), condition_e),
        ("transported", Transported(Gaussian(), AffineMap(B_MATRIX, B_SHIFT)), free(0.8)),
        ("mollified", Mollified(ExpDecay(1.5), 0.25, 12, 12), free(0.8)),
        ("restricted", counterexample_field(0.8, k), restricted),
    ]


def test_02_orientation_involution():
    rng = np.random.default_rng(2)
    summary = []
    ok = True
    for name, field, sample in _catalog_samplers():
        worst = 0.0
        for _ in range(50):
            th, p, lam = sample(rng)
            a = line_integral(field, Line.at(th + math.pi, -p), lam).value
            b = line_integral(field, Line.at(th, p), -lam).value
            worst = max(worst, abs(a - b) / abs(b) if b != 0 else (0.0 if a == 0 else math.inf))
        ok &= worst <= 1e-8
        summary.append(f"{name} {worst:.0e}")
    record_acceptance(2, "orientation involution", ok, "max rel err " + ", ".join(summary) + "; tol 1e-8")
    assert ok


# -- 3 -------------------------------------------------------------------------------

COUNTER_GRID = GridSpec(0.0, 17, 2 * math.pi / 17, -8.0, 33, 0.5)


@pytest.mark.parametrize("beta,region,label", [(0.8, wedge(67.5, 180), "hyperbolic beta=0.8, wedge(67.5, 180)"),
                                               (0.3, wedge(5, 180), "parabolic beta=0.3, wedge(5, 180)")])
def test_03_counterexample_vanishing(beta, region, label):
    s = sinogram(counterexample_field(beta, region), region, COUNTER_GRID, 0.0, compute_hole=True)
    rep = vanishing_summary(s, margin=10.0, sanity_factor=1e3)
    ok = rep["pass"] and rep["divergent_cells"] == 0
    prev = _merge_record(3, label, ok,
                         f"{label}: {rep['cells_checked']} exterior cells, max |v|/(10 budget) {rep['max_rel']:.2f}, "
                         f"best hole cell {rep['max_hole_ratio']:.1e} x threshold")
    assert ok, prev


def _merge_record(number, label, ok, detail):
    from conftest import ACCEPTANCE_RESULTS
    old = ACCEPTANCE_RESULTS.get(number)
    if old is None:
        record_acceptance(number, "counterexamples vanish outside the hole", ok, detail)
    else:
        record_acceptance(number, old[0], old[1] and ok, old[2] + " | " + detail)
    return detail


# -- 4 -------------------------------------------------------------------------------

def test_04_affine_transport():
    k = wedge(67.5, 180)
    amap = normalizing_affine(k).inverse() @ AffineMap(B_MATRIX, B_SHIFT)
    rep = transport_correspondence(counterexample_field(0.8, k), k, amap, n_lines=100, seed=4)
    jac = max(abs(r - 1) for r in rep["jacobian_ratios"])
    ok = rep["pass"] and rep["cells_checked"] == 100
    record_acceptance(4, "affine transport zero sets", ok,
                      f"{rep['cells_checked']} lines, worst |v|/(10 budget) {rep['max_rel']:.2f}, "
                      f"{rep['hole_lines_nonzero']} nonzero hole lines, arc-length ratio off by {jac:.0e}")
    assert ok


# -- 5 -------------------------------------------------------------------------------

def test_05_integration_by_parts():
    rng = np.random.default_rng(5)
    k = wedge(30, 0)
    lam = 0.5
    worst = 0.0
    for field in (Gaussian(), Gaussian(1.0, (0.4, -0.3))):
        n = 0
        while n < 20:
            th, p = float(rng.uniform(0, 2 * math.pi)), float(rng.uniform(-3, 3))
            line = Line.at(th, p)
            if line_intersects(k, line):
                continue
            n += 1
            lhs = p * line_integral(field, line, lam, derivative="perp").value
            rhs = p * lam * line_integral(field, line, lam).value
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    ok = worst <= 1e-6
    record_acceptance(5, "integration by parts", ok, f"40 exterior lines, max scaled err {worst:.1e}; tol 1e-6")
    assert ok


# -- 6 -------------------------------------------------------------------------------

RECURSION_GRID = GridSpec.centered(0.0, 20, 5e-3, 0.5, 6.0, 257)


def test_06_moment_recursion():
    t0 = time.perf_counter()
    cfg = RecursionConfig(k_max=2, fd_order=4)
    parts = []
    ok = True
    for name, field in (("gaussian", Gaussian()), ("translated", Gaussian(1.0, (0.0, 0.5)))):
        s = sinogram(field, None, RECURSION_GRID, 0.0)
        rep = validate_recursion(s, cfg, field)
        e1, e2 = rep.per_k[1]["max_rel_err"], rep.per_k[2]["max_rel_err"]
        ok &= e1 <= 0.01 and e2 <= 0.02
        parts.append(f"{name} k=1 {e1:.1e}, k=2 {e2:.1e}")
    runtime = time.perf_counter() - t0
    ok &= runtime <= 300
    field = Gaussian(1.0, (0.0, 0.5))
    conv = validate_recursion(sinogram(field, None, RECURSION_GRID, 0.0), RecursionConfig(k_max=2, fd_order=2),
                              field, convergence=True, convergence_k=1).convergence
    ok &= conv["ratio"] >= 3
    record_acceptance(6, "moment recursion", ok,
                      "; ".join(parts) + f" (tol 1%/2%); fd_order=2 halving ratio {conv['ratio']:.2f} (>= 3); "
                      f"41x257 runtime {runtime:.0f} s")
    assert ok


# -- 7 -------------------------------------------------------------------------------

def test_07_condition_e_anchors():
    field, lam = ConditionE(0.0), 0.3
    worst_anchor = 0.0
    for k in range(5):
        q = math.sqrt(k * math.pi)
        for lam_k in (0.0, lam):
            r = weighted_moment(field, Line.at(0.0, q), lam_k, k)
            worst_anchor = max(worst_anchor, abs(r.value) / vanishing_threshold(r))
    grid = GridSpec.centered(0.0, 4, 5e-3, 0.5, 3.0, 251)
    anchors = {}
    for k in (1, 2):
        q = math.sqrt(k * math.pi)
        rows = [weighted_moment(field, Line.at(float(th), q), lam, k).value for th in grid.thetas]
        anchors[k] = (q, rows)
    i0 = grid.theta_count // 2
    row_anchor = max(abs(anchors[k][1][i0]) for k in (1, 2))
    table = recover_moments(sinogram(field, None, grid, lam), RecursionConfig(k_max=2, anchors=anchors))
    direct = direct_moment_table(field, grid, lam, 2, thetas=[i0])
    scale0 = float(np.max(np.abs(direct.values[0, i0])))
    errs = [relative_error(table.values[k, i0], direct.values[k, i0], scale0) for k in range(3)]
    ok = worst_anchor <= 1.0 and max(errs) <= 0.05
    record_acceptance(7, "condition-e anchors", ok,
                      f"|R^(k)(w0, sqrt(k pi))| / threshold <= {worst_anchor:.2f} for k=0..4; "
                      f"anchor on the w0 row {row_anchor:.0e}; recursion rel err "
                      + ", ".join(f"k={k} {e:.1e}" for k, e in enumerate(errs)) + " (tol 5%)")
    assert ok


# -- 8 -------------------------------------------------------------------------------

def test_08_convolution_identity():
    grid = GridSpec.from_degrees(0, 9, 40, -4, 33, 0.25)
    parts = []
    ok = True
    for lam in (0.0, 0.5):
        rep = convolution_check(Gaussian(), 0.25, None, grid, lam, tolerance=1e-3, levels=4)
        rels = [h["max_rel"] for h in rep.details["refinement"]]
        ok &= rep.passed
        parts.append(f"lam={lam}: " + " > ".join(f"{r:.0e}" for r in rels))
    record_acceptance(8, "convolution identity", ok, "; ".join(parts) + " under q-step halving (tol 1e-3)")
    assert ok


# -- 9 -------------------------------------------------------------------------------

def test_09_laplace_interchange():
    # The tail below 1e-18 is kept so that the smallest gaps (about 2e-16 at s=0.1, N=14) are resolved.
    quad = QuadratureSpec(1e-15, 1e-14, truncation_threshold=1e-18)
    prof = two_sided_exp()
    s_values = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    moments = moments_1d(prof, 14, quad)
    closed = max(abs(two_sided_laplace(prof, s, quad)[0] - 2 / (1 - s * s)) for s in s_values)
    worst, fails = 0.0, 0
    for N in range(4, 15):
        for s in s_values:
            r = series_vs_transform(prof, s, N, quad, moments)
            bound = r["bound_neg_axis"] + r["bound_pos_axis"]
            fails += r["abs_difference"] > bound
            worst = max(worst, r["abs_difference"] / bound)
    ok = fails == 0 and closed <= 1e-8
    record_acceptance(9, "Laplace interchange", ok,
                      f"99 (s, N) pairs, {fails} above the bound sum, max gap/bound {worst:.3f}; "
                      f"closed form err {closed:.0e} (tol 1e-8)")
    assert ok


# -- 10 ------------------------------------------------------------------------------

def test_10_stieltjes_control():
    prof = stieltjes_control()
    m = moments_1d(prof, 8)
    rel = float(np.max(np.abs(m.values) / m.abs_moments))
    peak = float(np.max(np.abs(prof.func(np.linspace(0, 50, 501)))))
    verdict = moment_vanishing_test(prof, n_max=8)["verdict"]
    ok = rel <= 1e-8 and peak > 0.1 and verdict == INDETERMINATE
    record_acceptance(10, "Stieltjes negative control", ok,
                      f"max |m_n| / int |x^n f| = {rel:.0e} for n<=8, profile peak {peak:.2f}, verdict {verdict}")
    assert ok


# -- 11 ------------------------------------------------------------------------------

def test_11_helgason():
    thetas = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    ratios = []
    for field in (Gaussian(), Gaussian(1.0, (0.7, -0.4))):
        rep = helgason_moment_check(field, 3, thetas, (-9, 9), 0.0)
        ratios += [r["ratio"] for r in rep["per_k"]]
    consistent = max(ratios)
    att = helgason_moment_check(Gaussian(1.0, (0.7, -0.4)), 0, thetas, (-9, 9), 0.5)["per_k"][0]["ratio"]
    ok = consistent <= 1e-6 and att >= 10 * max(consistent, 1e-6)
    record_acceptance(11, "Helgason moment conditions", ok,
                      f"lam=0 max residual ratio {consistent:.0e} (tol 1e-6); lam=0.5 translated k=0 ratio {att:.2f}")
    assert ok
