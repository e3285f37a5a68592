"""JSON experiment configuration: defaults, unknown-key rejection and full-violation reporting."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Any

from .fields import DensityField, StretchedExp, parse_field
from .geometry import ConvexRegion, parse_region
from .quadrature import QuadratureSpec
from .transform import GridSpec

__all__ = ["COMMANDS", "ConfigParseError", "ConfigValidationError", "ExperimentConfig", "parse_config",
           "check_counterexample_cone"]

COMMANDS = ("forward", "counterexample", "recover", "convolution", "laplace", "helgason", "probe")

# A default of None accepts any JSON value; a dict default is a nested section
# whose keys are checked recursively.
_DEFAULTS: dict[str, Any] = {
    "command": None,
    "field": "gaussian(1.0)",
    "region": None,
    "grid": {
        "theta_start_deg": 0.0,
        "theta_count": 8,
        "theta_step_deg": 45.0,
        "p_start": -4.0,
        "p_count": 32,
        "p_step": 0.25,
    },
    "lambda": 0.0,
    "quadrature": {
        "abs_tol": 1e-12,
        "rel_tol": 1e-10,
        "truncation_threshold": 1e-14,
        "max_halfwidth": 1e7,
        "max_panels": 40000,
    },
    "recursion": {
        "k_max": 2,
        "fd_order": 4,
        "anchor_tol": 1e-10,
        "integration": "simpson",
        "anchors": {},
        "tolerance": None,
        "theta0_index": None,
        "p_range": None,
        "convergence": False,
        "convergence_k": 1,
    },
    "counterexample": {
        "margin": 10.0,
        "sanity_factor": 1e3,
        "transport": None,
    },
    "convolution": {
        "radius": 0.25,
        "tolerance": 1e-3,
        "n_start": 9,
        "levels": 4,
    },
    "laplace": {
        "profile": "two_sided_exp(1.0, 1.0)",
        "line": None,
        "s_values": [0.1, 0.3, 0.5, 0.7, 0.9],
        "N_values": [4, 8, 14],
        "n_max": 12,
        "vanishing_tol": 1e-8,
    },
    "helgason": {
        "k_max": 3,
        "theta_count": 24,
        "p_window": [-8.0, 8.0],
        "tolerance": 1e-6,
        "panels": 16,
        "order": 20,
        "expect": "consistent",
    },
    "probe": {
        "theta0_deg": 0.0,
        "halfwidth_deg": 10.0,
        "p0": 0.5,
        "k_max": 2,
        "p_samples": [1.0, 2.0, 3.0],
        "n_theta": 5,
        "mu": 1.0,
        "conditions": ["b", "c", "d", "e"],
        "anchors": {},
    },
    "output": {
        "dir": "out",
        "prefix": None,
    },
    "seed": 0,
    "compute_hole": False,
    "workers": None,
}

_TRANSPORT_DEFAULTS = {"matrix": [[1.0, 0.0], [0.0, 1.0]], "translation": [0.0, 0.0],
                       "n_lines": 100, "n_hole": 10, "p_max": 6.0}


class ConfigParseError(ValueError):
    """Malformed JSON; carries the line and column of the failure."""

    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class ConfigValidationError(ValueError):
    """Every violation found in an otherwise well-formed document."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(violations))
        self.violations = violations


def _type_ok(default, value) -> bool:
    if default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, type(default))


def _merge(defaults: dict, given: Any, path: str, errors: list[str]) -> dict:
    if not isinstance(given, dict):
        errors.append(f"{path or '<root>'}: expected an object")
        return copy.deepcopy(defaults)
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            errors.append(f"{where}: unknown key")
            continue
        d = defaults[key]
        if isinstance(d, dict) and d:
            out[key] = _merge(d, value, where, errors)
        elif not _type_ok(d, value):
            errors.append(f"{where}: expected {type(d).__name__}, got {type(value).__name__}")
        else:
            out[key] = float(value) if isinstance(d, float) else value
    return out


def check_counterexample_cone(field: DensityField, region: ConvexRegion | None) -> str | None:
    """The hole must cover every ray from the origin along which the stretched field fails to decay.

    ``exp(-z^beta)`` decays in ``|arg z| < pi / (2 beta)``; the remaining
    sector (and the branch cut on the negative axis) has to lie in the hole.
    Returns a message when it does not.
    """
    if not isinstance(field, StretchedExp):
        return f"counterexample needs a stretched(beta, part) field, got {field.describe()}"
    if region is None:
        return "counterexample needs a nonempty hole region"
    cone = field.valid_cone
    lo = cone if cone < math.pi else math.pi
    angles = [lo + (2 * math.pi - 2 * lo) * t / 16 for t in range(17)]
    for a in angles:
        for r in (0.0, 1.0, 10.0, 1e4):
            pt = (r * math.cos(a), r * math.sin(a))
            if not region.contains(pt, tol=1e-9 * max(1.0, r)):
                return (f"hole {region.describe()} misses the point ({pt[0]:.3g}, {pt[1]:.3g}) of the "
                        f"non-decay sector |arg z| >= {math.degrees(cone):.4g} deg")
    return None


@dataclass
class ExperimentConfig:
    raw: dict
    field: DensityField
    region: ConvexRegion | None
    grid: GridSpec
    quadrature: QuadratureSpec

    @property
    def command(self) -> str:
        return self.raw["command"]

    @property
    def lam(self) -> float:
        return self.raw["lambda"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def section(self, name: str) -> dict:
        return self.raw[name]

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _positive(errors, path, value, strict=True):
    if value is None:
        return
    if (value <= 0) if strict else (value < 0):
        errors.append(f"{path}: must be {'positive' if strict else 'non-negative'}")


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a JSON experiment; ``overrides`` replaces top-level keys first."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from None
    errors: list[str] = []
    if isinstance(doc, dict) and overrides:
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    raw = _merge(_DEFAULTS, doc, "", errors)
    if raw["command"] not in COMMANDS:
        errors.append(f"command: must be one of {', '.join(COMMANDS)}")
    g = raw["grid"]
    for key in ("theta_count", "p_count"):
        if g[key] < 1:
            errors.append(f"grid.{key}: must be >= 1")
    for key in ("theta_step_deg", "p_step"):
        _positive(errors, f"grid.{key}", g[key])
    for key in ("abs_tol", "rel_tol", "truncation_threshold", "max_halfwidth"):
        _positive(errors, f"quadrature.{key}", raw["quadrature"][key])
    if raw["quadrature"]["max_panels"] < 1:
        errors.append("quadrature.max_panels: must be >= 1")
    if not math.isfinite(raw["lambda"]):
        errors.append("lambda: must be finite")
    if raw["workers"] is not None and (not isinstance(raw["workers"], int) or raw["workers"] < 1):
        errors.append("workers: must be a positive integer")
    rc = raw["recursion"]
    if rc["k_max"] < 0:
        errors.append("recursion.k_max: must be >= 0")
    if rc["fd_order"] not in (2, 4):
        errors.append("recursion.fd_order: must be 2 or 4")
    if rc["integration"] not in ("simpson", "trapezoid"):
        errors.append("recursion.integration: must be simpson or trapezoid")
    if rc["tolerance"] is None:
        rc["tolerance"] = 1e-4
    tols = rc["tolerance"] if isinstance(rc["tolerance"], list) else [rc["tolerance"]]
    if not tols or not all(isinstance(t, (int, float)) and not isinstance(t, bool) and t > 0 for t in tols):
        errors.append("recursion.tolerance: must be a positive number or a list of them (one per k)")
    for k, v in rc["anchors"].items():
        if not str(k).isdigit() or not (isinstance(v, list) and len(v) == 2):
            errors.append(f"recursion.anchors.{k}: expected integer key and [q, value]")
    cv = raw["convolution"]
    _positive(errors, "convolution.radius", cv["radius"])
    if cv["n_start"] < 3 or cv["n_start"] % 2 == 0:
        errors.append("convolution.n_start: must be odd and >= 3")
    if cv["levels"] < 1:
        errors.append("convolution.levels: must be >= 1")
    hg = raw["helgason"]
    if hg["expect"] not in ("consistent", "inconsistent"):
        errors.append("helgason.expect: must be consistent or inconsistent")
    if hg["theta_count"] < 2 * hg["k_max"] + 2:
        errors.append("helgason.theta_count: must exceed 2 * k_max + 1")
    pr = raw["probe"]
    _positive(errors, "probe.p0", pr["p0"])
    _positive(errors, "probe.halfwidth_deg", pr["halfwidth_deg"])
    if any(c not in ("b", "c", "d", "e") for c in pr["conditions"]):
        errors.append("probe.conditions: entries must be among b, c, d, e")
    tr = raw["counterexample"]["transport"]
    if tr is not None:
        raw["counterexample"]["transport"] = _merge(_TRANSPORT_DEFAULTS, tr, "counterexample.transport", errors)
    if raw["output"]["prefix"] is None:
        raw["output"]["prefix"] = raw["command"] if raw["command"] in COMMANDS else "run"

    field = region = grid = quad = None
    region_ok = True
    try:
        field = parse_field(raw["field"])
    except (ValueError, TypeError) as exc:
        errors.append(f"field: {exc}")
    try:
        region = parse_region(raw["region"])
    except (ValueError, TypeError) as exc:
        region_ok = False
        errors.append(f"region: {exc}")
    n_before = len(errors)
    if not any(e.startswith("grid.") for e in errors[:n_before]):
        try:
            grid = GridSpec.from_degrees(**g)
        except (ValueError, TypeError) as exc:
            errors.append(f"grid: {exc}")
    try:
        q = raw["quadrature"]
        quad = QuadratureSpec(q["abs_tol"], q["rel_tol"], q["truncation_threshold"], q["max_halfwidth"],
                              q["max_panels"])
    except (ValueError, TypeError) as exc:
        errors.append(f"quadrature: {exc}")
    if raw["command"] == "counterexample" and field is not None and region_ok:
        msg = check_counterexample_cone(field, region)
        if msg:
            errors.append(f"region: {msg}")
    if errors:
        raise ConfigValidationError(errors)
    return ExperimentConfig(raw, field, region, grid, quad)
