"""Oriented lines, polyhedral convex holes and affine maps of the plane.

Conventions: a direction angle ``theta`` gives ``omega = (cos t, sin t)`` and
``omega_perp = (-sin t, cos t)``; the line ``l(omega, p)`` is
``{x : <x, omega> = p}`` parametrised as ``p * omega + u * omega_perp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog

from ._calls import parse_call

__all__ = [
    "TWO_PI",
    "Direction",
    "Line",
    "ConvexRegion",
    "AffineMap",
    "ExteriorScanSet",
    "EmptyRegionError",
    "NotNormalizableError",
    "DegenerateMapError",
    "line_intersects",
    "classify_region",
    "epsilon_offset",
    "normalizing_frame",
    "normalizing_affine",
    "transport_line",
    "quadrant",
    "wedge",
    "halfstrip",
    "polyhedral",
    "parse_region",
]

TWO_PI = 2.0 * math.pi
_TOL = 1e-12


class EmptyRegionError(ValueError):
    pass


class NotNormalizableError(ValueError):
    pass


class DegenerateMapError(ValueError):
    pass


def _canon(theta: float) -> float:
    t = math.fmod(theta, TWO_PI) + 0.0
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


def _rot90(v):
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class Direction:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _canon(float(self.theta)))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        return cls(math.atan2(v[1], v[0]))

    @property
    def omega(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def perp(self) -> np.ndarray:
        return np.array([-math.sin(self.theta), math.cos(self.theta)])

    def opposite(self) -> "Direction":
        return Direction(self.theta + math.pi)


@dataclass(frozen=True)
class Line:
    direction: Direction
    p: float

    @classmethod
    def at(cls, theta: float, p: float) -> "Line":
        return cls(Direction(theta), float(p))

    @property
    def theta(self) -> float:
        return self.direction.theta

    @property
    def omega(self) -> np.ndarray:
        return self.direction.omega

    @property
    def perp(self) -> np.ndarray:
        return self.direction.perp

    def points(self, u) -> np.ndarray:
        """Points ``p * omega + u * omega_perp``; shape ``u.shape + (2,)``."""
        u = np.asarray(u, dtype=float)
        return self.p * self.omega + u[..., None] * self.perp

    def param(self, x) -> np.ndarray:
        """Coordinate ``u = <x, omega_perp>`` of points on the line."""
        return np.asarray(x, dtype=float) @ self.perp

    def reversed(self) -> "Line":
        """Same point set, opposite orientation: ``l(-omega, -p)``."""
        return Line(self.direction.opposite(), -self.p)


@dataclass(frozen=True, eq=False)
class ConvexRegion:
    """Closed intersection of half-planes ``<x, n_i> <= c_i`` with unit ``n_i``."""

    normals: np.ndarray
    offsets: np.ndarray
    name: str = field(default="polyhedral")

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.normals, dtype=float))
        c = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if n.shape[0] == 0 or n.shape[1] != 2 or c.shape != (n.shape[0],):
            raise ValueError("need one offset per 2-D normal and at least one half-plane")
        norm = np.linalg.norm(n, axis=1)
        if np.any(norm < _TOL):
            raise ValueError("half-plane normals must be nonzero")
        object.__setattr__(self, "normals", n / norm[:, None])
        object.__setattr__(self, "offsets", c / norm)

    def __len__(self):
        return self.offsets.size

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.normals.T <= self.offsets + tol, axis=-1)

    def line_interval(self, line: Line, tol: float = _TOL) -> tuple[float, float] | None:
        """Parameter interval ``[lo, hi]`` of ``line`` inside the region, or None."""
        a = self.normals @ line.perp
        b = self.offsets - line.p * (self.normals @ line.omega)
        lo, hi = -math.inf, math.inf
        for ai, bi in zip(a, b):
            if abs(ai) < _TOL:
                if bi < -tol:
                    return None
            elif ai > 0:
                hi = min(hi, bi / ai)
            else:
                lo = max(lo, bi / ai)
        if lo > hi + tol:
            return None
        return lo, hi

    @cached_property
    def is_empty(self) -> bool:
        res = linprog(np.zeros(2), A_ub=self.normals, b_ub=self.offsets,
                      bounds=[(None, None)] * 2, method="highs")
        return res.status == 2

    @cached_property
    def recession_rays(self) -> tuple[np.ndarray, ...]:
        """Extreme unit rays of the recession cone ``{d : <n_i, d> <= 0}``.

        For a two-dimensional cone the rays are ordered so that the cone is
        the counter-clockwise arc from the first to the second.
        """
        cands = []
        for n in self.normals:
            for d in (_rot90(n), -_rot90(n)):
                if np.all(self.normals @ d <= 1e-12):
                    if not any(np.allclose(d, e, atol=1e-9) for e in cands):
                        cands.append(d)
        if len(cands) <= 1:
            return tuple(cands)
        for i, d in enumerate(cands):
            for e in cands[i + 1:]:
                if np.allclose(d, -e, atol=1e-9):
                    return tuple(cands)
        # Pick the pair spanning the widest angle.
        best, pair = -1.0, None
        for i, d in enumerate(cands):
            for e in cands[i + 1:]:
                ang = math.acos(max(-1.0, min(1.0, float(d @ e))))
                if ang > best:
                    best, pair = ang, (d, e)
        d, e = pair
        if d[0] * e[1] - d[1] * e[0] < 0:
            d, e = e, d
        return (d, e)

    @cached_property
    def classification(self) -> str:
        if self.is_empty:
            raise EmptyRegionError("half-plane intersection is empty")
        rays = self.recession_rays
        if not rays:
            return "compact"
        for i, d in enumerate(rays):
            for e in rays[i + 1:]:
                if np.allclose(d, -e, atol=1e-9):
                    return "contains-line"
        if len(rays) == 1:
            return "parabolic"
        return "hyperbolic"

    @cached_property
    def vertices(self) -> np.ndarray:
        pts = []
        m = len(self)
        for i in range(m):
            for j in range(i + 1, m):
                M = self.normals[[i, j]]
                if abs(np.linalg.det(M)) < 1e-12:
                    continue
                x = np.linalg.solve(M, self.offsets[[i, j]])
                if self.contains(x, tol=1e-9) and not any(np.allclose(x, q, atol=1e-9) for q in pts):
                    pts.append(x)
        return np.array(pts).reshape(-1, 2)

    def active(self, x, tol: float = 1e-9) -> np.ndarray:
        return np.nonzero(np.abs(self.normals @ np.asarray(x) - self.offsets) <= tol)[0]

    def describe(self) -> str:
        return self.name


def line_intersects(region: ConvexRegion | None, line: Line) -> bool:
    """True iff the line meets the closed region; tangency counts."""
    if region is None:
        return False
    return region.line_interval(line) is not None


def classify_region(region: ConvexRegion) -> str:
    """One of ``compact``, ``parabolic``, ``hyperbolic``, ``contains-line``."""
    return region.classification


def epsilon_offset(region: ConvexRegion, eps: float) -> ConvexRegion:
    """Outer polyhedral eps-hull: every half-plane pushed out by ``eps``.

    Exceeds the true distance hull only near corners, by at most
    ``eps * (1 / sin(alpha / 2) - 1)`` in distance for a corner of angle alpha.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return ConvexRegion(region.normals, region.offsets + eps, name=f"{region.name}+{eps:g}")


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> linear @ x + translation`` with a stored inverse."""

    linear: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        L = np.asarray(self.linear, dtype=float).reshape(2, 2)
        t = np.asarray(self.translation, dtype=float).reshape(2)
        det = float(np.linalg.det(L))
        if abs(det) < 1e-12:
            raise DegenerateMapError(f"affine map is singular (det={det:.3e})")
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "_inv_linear", np.linalg.inv(L))

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(np.eye(2))

    @classmethod
    def rotation(cls, phi: float) -> "AffineMap":
        c, s = math.cos(phi), math.sin(phi)
        return cls(np.array([[c, -s], [s, c]]))

    @classmethod
    def shift(cls, t) -> "AffineMap":
        return cls(np.eye(2), np.asarray(t, dtype=float))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    @property
    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.linear, compute_uv=False)[-1])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.translation

    def inverse(self) -> "AffineMap":
        Li = self._inv_linear
        return AffineMap(Li, -Li @ self.translation)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """``self o other``."""
        return AffineMap(self.linear @ other.linear, self.linear @ other.translation + self.translation)

    def __matmul__(self, other: "AffineMap") -> "AffineMap":
        return self.compose(other)

    def as_dict(self) -> dict:
        return {"linear": self.linear.tolist(), "translation": self.translation.tolist()}


def transport_line(amap: AffineMap, line: Line) -> Line:
    """Image ``A l`` of a line, refit in normal form.

    The normal is oriented so that the image of the ``+omega`` side of the
    input stays on the ``+omega`` side of the output.
    """
    y1 = amap(line.p * line.omega)
    y2 = amap(line.p * line.omega + line.perp)
    y3 = amap((line.p + 1.0) * line.omega)
    e = y2 - y1
    e /= np.linalg.norm(e)
    n = np.array([e[1], -e[0]])
    if (y3 - y1) @ n < 0:
        n = -n
    return Line(Direction.from_vector(n), float(y1 @ n))


def map_region(amap: AffineMap, region: ConvexRegion) -> ConvexRegion:
    """Image ``A K`` of a region: ``<A^-1 y, n> <= c``."""
    inv = amap.inverse()
    normals = region.normals @ inv.linear
    offsets = region.offsets - region.normals @ inv.translation
    return ConvexRegion(normals, offsets, name=f"A({region.name})")


class NormalizationFrame(NamedTuple):
    point: np.ndarray
    half_line: np.ndarray
    support: np.ndarray


def _interior_point(region: ConvexRegion) -> np.ndarray:
    scale = 10.0 * (1.0 + (np.abs(region.vertices).max() if region.vertices.size else 0.0)
                    + np.abs(region.offsets).max())
    A = np.hstack([region.normals, np.ones((len(region), 1))])
    res = linprog([0, 0, -1], A_ub=A, b_ub=region.offsets,
                  bounds=[(-scale, scale), (-scale, scale), (0, 1.0)], method="highs")
    if res.status != 0 or res.x[2] <= 0:
        raise NotNormalizableError("region has empty interior")
    return res.x[:2]


def normalizing_frame(region: ConvexRegion, choice: str = "auto", point=None) -> NormalizationFrame:
    """Boundary point, contained half-line direction and support direction.

    ``choice='auto'`` follows the construction for unbounded holes: a
    half-line whose relative interior lies in the interior of the region.
    ``'h'`` and ``'g'`` pick the two extreme recession rays explicitly
    (they coincide for parabolic regions).
    """
    cls = region.classification
    if cls not in ("parabolic", "hyperbolic"):
        raise NotNormalizableError(f"cannot normalise a {cls} region")
    rays = region.recession_rays
    if choice == "auto":
        d = rays[0] if len(rays) == 1 else rays[0] + rays[1]
    elif choice == "h":
        d = rays[0]
    elif choice == "g":
        d = rays[-1]
    else:
        raise ValueError(f"choice must be auto, h or g, not {choice!r}")
    d = d / np.linalg.norm(d)

    if point is not None:
        x = np.asarray(point, dtype=float)
        if not region.contains(x, tol=1e-9) or region.active(x).size == 0:
            raise NotNormalizableError("point is not on the region boundary")
    else:
        x = None
        strict = choice == "auto"
        verts = region.vertices
        order = np.argsort(verts @ d) if verts.size else []
        for i in order:
            v = verts[i]
            probe = v + 1e-6 * d
            ok = np.all(region.normals @ probe < region.offsets - 1e-10) if strict else region.contains(probe, 1e-12)
            if ok:
                x = v
                break
        if x is None:
            c = _interior_point(region)
            back = region.normals @ (-d)
            slack = region.offsets - region.normals @ c
            t = min(s / b for s, b in zip(slack, back) if b > _TOL)
            x = c - t * d

    act = region.active(x)
    normals = region.normals[act]
    target = -d
    n_s = None
    if len(normals) == 1:
        if np.allclose(normals[0], target, atol=1e-9):
            n_s = target
    else:
        for i in range(len(normals)):
            for j in range(i + 1, len(normals)):
                M = np.column_stack([normals[i], normals[j]])
                if abs(np.linalg.det(M)) < 1e-12:
                    continue
                ab = np.linalg.solve(M, target)
                if np.all(ab >= -1e-12):
                    n_s = target
    if n_s is None:
        n_s = normals[np.argmax(normals @ target)]
    s = _rot90(n_s)
    if d[0] * s[1] - d[1] * s[0] < 0:
        s = -s
    return NormalizationFrame(x, d, s)


def normalizing_affine(region: ConvexRegion, choice: str = "auto", point=None) -> AffineMap:
    """Affine map sending the chosen half-line to the positive x1-axis and
    the support line through its endpoint to the x2-axis."""
    fr = normalizing_frame(region, choice, point)
    B = np.column_stack([fr.half_line, fr.support])
    L = np.linalg.inv(B)
    return AffineMap(L, -L @ fr.point)


@dataclass(frozen=True)
class ExteriorScanSet:
    """Lines ``l(omega, p)`` with ``theta`` in an open window and ``p > p0``."""

    theta0: float
    theta_lo: float
    theta_hi: float
    p0: float

    def __post_init__(self):
        if self.p0 <= 0:
            raise ValueError("p0 must be positive")
        if not self.theta_lo < self.theta0 < self.theta_hi:
            raise ValueError("theta0 must lie inside the open window")

    @classmethod
    def around(cls, theta0: float, halfwidth: float, p0: float) -> "ExteriorScanSet":
        return cls(theta0, theta0 - halfwidth, theta0 + halfwidth, p0)

    def contains(self, line: Line) -> bool:
        t = line.theta
        for shift in (0.0, TWO_PI, -TWO_PI):
            if self.theta_lo < t + shift < self.theta_hi:
                return line.p > self.p0
        return False

    def sample_thetas(self, n: int) -> np.ndarray:
        return np.linspace(self.theta_lo, self.theta_hi, n + 2)[1:-1]


# -- presets ---------------------------------------------------------------

def quadrant() -> ConvexRegion:
    return ConvexRegion([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0], name="quadrant")


def wedge(half_angle_deg: float, axis_deg: float = 0.0, apex=(0.0, 0.0)) -> ConvexRegion:
    """Closed angular domain of half-angle ``< 90`` degrees about ``axis``."""
    if not 0.0 < half_angle_deg < 90.0:
        raise ValueError("wedge half-angle must lie in (0, 90) degrees")
    a, h = math.radians(axis_deg), math.radians(half_angle_deg)
    n1 = np.array([math.cos(a + h + math.pi / 2), math.sin(a + h + math.pi / 2)])
    n2 = np.array([math.cos(a - h - math.pi / 2), math.sin(a - h - math.pi / 2)])
    apex = np.asarray(apex, dtype=float)
    return ConvexRegion([n1, n2], [n1 @ apex, n2 @ apex],
                        name=f"wedge({half_angle_deg:g}, {axis_deg:g})")


def halfstrip(width: float, axis_deg: float = 0.0) -> ConvexRegion:
    """``{<x, a> >= 0, |<x, a_perp>| <= width / 2}`` for the axis direction ``a``."""
    if width <= 0:
        raise ValueError("width must be positive")
    a = math.radians(axis_deg)
    e = np.array([math.cos(a), math.sin(a)])
    ep = _rot90(e)
    return ConvexRegion([-e, ep, -ep], [0.0, width / 2, width / 2],
                        name=f"halfstrip({width:g}, {axis_deg:g})")


def polyhedral(planes: Sequence[Sequence[float]]) -> ConvexRegion:
    """Half-planes given as ``(normal_deg, offset)`` pairs."""
    normals = [[math.cos(math.radians(d)), math.sin(math.radians(d))] for d, _ in planes]
    return ConvexRegion(normals, [c for _, c in planes], name="polyhedral")


_PRESETS = {"quadrant": quadrant, "wedge": wedge, "halfstrip": halfstrip}


def parse_region(text: str | None) -> ConvexRegion | None:
    if text is None or str(text).strip().lower() in ("", "none", "empty"):
        return None
    name, args, kwargs = parse_call(text)
    if name == "polyhedral":
        planes = args[0] if len(args) == 1 else args
        return polyhedral(planes)
    if name not in _PRESETS:
        raise ValueError(f"unknown region preset {name!r}")
    region = _PRESETS[name](*args, **kwargs)
    return ConvexRegion(region.normals, region.offsets, name=text.strip())
