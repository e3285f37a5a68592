import math

import numpy as np
import pytest

from exradon.counterexample import counterexample_field, transport_correspondence, vanishing_summary
from exradon.fields import ConditionE, Gaussian, NotDifferentiableError, Restricted, StretchedExp
from exradon.geometry import AffineMap, Direction, ExteriorScanSet, Line, halfstrip, normalizing_affine, wedge
from exradon.probe import class_condition_probe, default_anchor_offset
from exradon.transform import GridSpec, line_integral, sinogram


def test_gaussian_passes_every_condition():
    scan = ExteriorScanSet.around(0.0, 0.3, 0.5)
    rep = class_condition_probe(Gaussian(), scan, 4, [1.0, 2.0], n_theta=3)
    assert rep["pass"]
    e = rep["conditions"]["e"]["anchors"]
    assert all(row["q"] == "inf" and abs(row["limit"]) <= 1e-10 for row in e)
    assert "pointwise" in rep["conditions"]["b"]["quantifier"]


def test_condition_e_field_passes_with_anchor_lines():
    scan = ExteriorScanSet.around(0.0, 0.2, 0.5)
    rep = class_condition_probe(ConditionE(0.0), scan, 2, [1.0, 2.0], n_theta=3, lam=0.3)
    assert rep["conditions"]["d"]["pass"]
    for row in rep["conditions"]["e"]["anchors"]:
        assert math.isclose(row["q"], default_anchor_offset(ConditionE(0.0), row["k"], 0.5))
        assert abs(row["value"]) <= 10 * row["budget"]
    assert rep["pass"]


def test_stretched_field_fails_weighted_decay():
    scan = ExteriorScanSet.around(0.0, 0.2, 0.5)
    rep = class_condition_probe(StretchedExp(0.3), scan, 1, [2.0], n_theta=3, conditions=("d",))
    assert not rep["conditions"]["d"]["pass"]
    assert not rep["pass"]


def test_probe_rejects_offsets_inside_scan_gap():
    with pytest.raises(ValueError):
        class_condition_probe(Gaussian(), ExteriorScanSet.around(0.0, 0.2, 1.0), 1, [0.5])


def test_condition_c_needs_differentiable_field():
    with pytest.raises(NotDifferentiableError):
        class_condition_probe(Restricted(Gaussian(), wedge(20, 180)), ExteriorScanSet.around(0.0, 0.2, 0.5), 0,
                              [1.0], conditions=("c",))


def test_parabolic_counterexample_small_grid():
    k = halfstrip(1.0, 180)
    s = sinogram(counterexample_field(0.3, k), k, GridSpec.from_degrees(0, 7, 360 / 7, -6, 13, 1.0), 0.0,
                 compute_hole=True)
    rep = vanishing_summary(s)
    assert rep["pass"] and rep["divergent_cells"] == 0
    assert rep["max_hole_ratio"] >= 1e3


def test_vanishing_summary_fails_on_nonvanishing_field():
    k = wedge(67.5, 180)
    s = sinogram(Restricted(Gaussian(1.0, (2.0, 0.0)), k), k, GridSpec.from_degrees(0, 5, 72, -3, 7, 1.0), 0.0)
    assert not vanishing_summary(s)["pass"]


def test_transport_correspondence_small():
    k = wedge(67.5, 180)
    b = AffineMap(np.array([[1.5, 0.4], [-0.3, 0.8]]), np.array([0.3, -0.2]))
    amap = normalizing_affine(k).inverse() @ b
    rep = transport_correspondence(counterexample_field(0.8, k), k, amap, n_lines=12, n_hole=4, seed=1)
    assert rep["pass"] and rep["cells_checked"] == 12
    assert all(abs(r - 1) < 1e-8 for r in rep["jacobian_ratios"])


def test_far_oscillating_tail_is_not_falsely_converged():
    # Along this exterior line the integrand oscillates with wavelength ~40 out to u ~ 7000; a single wide
    # seed panel there once aliased both Kronrod rules and returned 4.6e-12 with a claimed budget of 1.6e-13.
    k = wedge(67.5, 180)
    line = Line(Direction(0.3523252423305782), 8.492816960254505)
    r = line_integral(counterexample_field(0.8, k), line, 0.0)
    assert abs(r.value) <= 10 * r.budget
