"""Catalog of planar density fields with gradients and decay envelopes.

Every field is an immutable descriptor evaluated on arrays of points of
shape ``(..., 2)``.  Besides values and gradients each field can produce a
one-sided :class:`~exradon.quadrature.Envelope` along any line, which the
transform uses to choose a truncation radius with a certified tail bound.
"""

from __future__ import annotations

import math
from typing import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from ._calls import parse_call, split_pipeline
from .geometry import AffineMap, ConvexRegion, Direction, Line, parse_region, transport_line
from .quadrature import SEED_WIDTH_FACTOR, Envelope

__all__ = [
    "Decay",
    "DensityField",
    "SingularPointError",
    "NotDifferentiableError",
    "Zero",
    "Gaussian",
    "ExpDecay",
    "Bump",
    "StretchedExp",
    "ConditionE",
    "Transported",
    "Mollified",
    "Restricted",
    "Combination",
    "stretched_exp_field",
    "transport_affine",
    "mollify",
    "restrict",
    "parse_field",
    "class_condition_probe",
]


class SingularPointError(ValueError):
    pass


class NotDifferentiableError(ValueError):
    pass


@dataclass(frozen=True)
class Decay:
    """Declared envelope ``|f(x)| <= C exp(-mu |x|**beta)`` for ``|x| >= radius``.

    ``mu = 0`` means no global decay is claimed; line envelopes still apply.
    """

    mu: float
    beta: float
    C: float = 1.0
    radius: float = 0.0

    def bound(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return self.C * np.exp(-self.mu * r**self.beta)


def _as_vector(direction) -> np.ndarray:
    if isinstance(direction, Direction):
        return direction.omega
    v = np.asarray(direction, dtype=float)
    return v / np.linalg.norm(v)


class DensityField:
    """Base class; subclasses implement ``_eval`` and usually ``_gradient``."""

    kind = "abstract"
    smoothness = "smooth"
    length_scale = 1.0

    @property
    def decay(self) -> Decay:
        return Decay(0.0, 1.0)

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        bad = self.singular_mask(x)
        if np.any(bad):
            raise SingularPointError(f"{self.describe()} is singular at {x[bad][0].tolist()}")
        return self._eval(x)

    def _eval(self, x):
        raise NotImplementedError

    def singular_mask(self, x) -> np.ndarray:
        return np.zeros(np.shape(x)[:-1], dtype=bool)

    has_eval_error = False

    def eval_error(self, x) -> np.ndarray:
        """Pointwise bound on the floating-point error of :meth:`eval` beyond plain rounding.

        Only fields that amplify rounding (large prefactors times cancelling
        factors) override this; the default is zero.
        """
        return np.zeros(np.shape(x)[:-1])

    def gradient(self, x) -> np.ndarray:
        if self.smoothness == "continuous":
            raise NotDifferentiableError(f"{self.describe()} is only continuous")
        x = np.asarray(x, dtype=float)
        bad = self.singular_mask(x)
        if np.any(bad):
            raise SingularPointError(f"{self.describe()} is singular at {x[bad][0].tolist()}")
        return self._gradient(x)

    def _gradient(self, x):
        return fd_gradient(self._eval, x)

    def grad(self, x, direction) -> np.ndarray:
        """Directional derivative ``<grad f(x), direction>``."""
        return self.gradient(x) @ _as_vector(direction)

    def envelope(self, line: Line, side: int, start: float = 0.0) -> Envelope | None:
        """Bound on ``|f(line.points(side * t))|`` for ``t >= start``; None if unknown."""
        return None

    def breakpoints(self, line: Line) -> list[float]:
        """Line parameters where the restriction to ``line`` is not smooth."""
        return []

    def seed_width(self, line: Line) -> Callable[[float], float]:
        """Largest seed panel width near line parameter ``u``, well below the local oscillation period."""
        w = SEED_WIDTH_FACTOR * self.length_scale
        return lambda u: w

    def singular_segment(self, line: Line) -> bool:
        """True when the line runs along the singular set for a positive length."""
        return False

    def describe(self) -> str:
        return self.kind


def fd_gradient(fun, x, step: float = 1e-5) -> np.ndarray:
    """Central differences with step ``step * max(1, |x|)``."""
    x = np.asarray(x, dtype=float)
    h = step * np.maximum(1.0, np.linalg.norm(x, axis=-1))[..., None]
    ex = np.zeros_like(x)
    ex[..., 0] = 1.0
    ey = np.zeros_like(x)
    ey[..., 1] = 1.0
    gx = (fun(x + h * ex) - fun(x - h * ex)) / (2 * h[..., 0])
    gy = (fun(x + h * ey) - fun(x - h * ey)) / (2 * h[..., 0])
    return np.stack([gx, gy], axis=-1)


@dataclass(frozen=True)
class Zero(DensityField):
    kind = "zero"

    @property
    def decay(self):
        return Decay(1.0, 2.0, C=0.0)

    def _eval(self, x):
        return np.zeros(np.shape(x)[:-1])

    def _gradient(self, x):
        return np.zeros(np.shape(x))

    def envelope(self, line, side, start=0.0):
        return Envelope.vanishing(start)


@dataclass(frozen=True)
class Gaussian(DensityField):
    """``amplitude * exp(-|x - center|^2 / sigma^2)``."""

    sigma: float = 1.0
    center: tuple = (0.0, 0.0)
    amplitude: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def length_scale(self):
        return self.sigma

    @property
    def decay(self):
        # |x - c|^2 >= |x|^2 / 2 - |c|^2.
        c2 = float(np.dot(self.center, self.center))
        return Decay(0.5 / self.sigma**2, 2.0, C=abs(self.amplitude) * math.exp(c2 / self.sigma**2))

    def _eval(self, x):
        d = x - np.asarray(self.center)
        return self.amplitude * np.exp(-np.sum(d * d, axis=-1) / self.sigma**2)

    def _gradient(self, x):
        d = x - np.asarray(self.center)
        return (-2.0 / self.sigma**2) * d * self._eval(x)[..., None]

    def envelope(self, line, side, start=0.0):
        if self.amplitude == 0:
            return Envelope.vanishing(start)
        c = np.asarray(self.center)
        dp = line.p - c @ line.omega
        uc = c @ line.perp
        return Envelope(math.log(abs(self.amplitude)) - dp * dp / self.sigma**2,
                        1.0 / self.sigma**2, 2.0, side * uc, start)

    def describe(self):
        return f"gaussian({self.sigma:g}, {self.center[0]:g}, {self.center[1]:g})"


@dataclass(frozen=True)
class ExpDecay(DensityField):
    """Smooth exponential profile ``exp(-mu * sqrt(1 + |x - center|^2))``."""

    mu: float = 1.0
    center: tuple = (0.0, 0.0)
    kind = "exp_decay"

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def decay(self):
        return Decay(self.mu, 1.0, C=math.exp(self.mu * math.hypot(*self.center)))

    def _eval(self, x):
        d = x - np.asarray(self.center)
        return np.exp(-self.mu * np.sqrt(1.0 + np.sum(d * d, axis=-1)))

    def _gradient(self, x):
        d = x - np.asarray(self.center)
        r = np.sqrt(1.0 + np.sum(d * d, axis=-1))
        return (-self.mu * self._eval(x) / r)[..., None] * d

    def envelope(self, line, side, start=0.0):
        uc = np.asarray(self.center) @ line.perp
        return Envelope(0.0, self.mu, 1.0, side * uc, start)

    def describe(self):
        return f"exp_decay({self.mu:g}, {self.center[0]:g}, {self.center[1]:g})"


_E2_1 = float(special.expn(2, 1.0))
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Bump(DensityField):
    """Unit-mass bump ``c_r exp(-1 / (1 - |x/r|^2))`` supported in the open disk of radius r."""

    radius: float = 1.0
    kind = "bump"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def normalization(self) -> float:
        # int_{|x|<r} exp(-1/(1-|x/r|^2)) dx = pi r^2 E_2(1).
        return 1.0 / (math.pi * self.radius**2 * _E2_1)

    @property
    def length_scale(self):
        return self.radius

    @property
    def decay(self):
        return Decay(1.0, 2.0, C=self.normalization, radius=self.radius)

    def _profile(self, s2):
        out = np.zeros_like(s2)
        inside = s2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - s2[inside]))
        return out

    def _eval(self, x):
        s2 = np.sum(x * x, axis=-1) / self.radius**2
        return self.normalization * self._profile(np.asarray(s2, dtype=float))

    def _gradient(self, x):
        s2 = np.asarray(np.sum(x * x, axis=-1) / self.radius**2, dtype=float)
        g = np.zeros_like(s2)
        inside = s2 < 1.0
        g[inside] = -2.0 / (self.radius**2 * (1.0 - s2[inside]) ** 2)
        return (self._eval(x) * g)[..., None] * x

    def envelope(self, line, side, start=0.0):
        half = math.sqrt(max(self.radius**2 - line.p**2, 0.0))
        return Envelope.vanishing(max(start, half))

    def describe(self):
        return f"bump({self.radius:g})"


@dataclass(frozen=True)
class StretchedExp(DensityField):
    """Real or imaginary part of ``exp(-z**beta)`` on the principal branch.

    The branch cut is the closed negative real axis; the modulus is
    ``exp(-|z|**beta cos(beta arg z))``, so the field decays in the cone
    ``|arg z| < pi / (2 beta)``.
    """

    beta: float
    part: str = "re"
    kind = "stretched"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        part = str(self.part).lower()
        if part not in ("re", "im"):
            raise ValueError("part must be Re or Im")
        object.__setattr__(self, "part", part)

    @property
    def valid_cone(self) -> float:
        """Half-opening of the cone where ``Re z**beta > 0`` (capped at pi)."""
        return min(math.pi, math.pi / (2.0 * self.beta))

    @property
    def decay(self):
        return Decay(max(math.cos(self.beta * math.pi), 0.0), self.beta)

    def singular_mask(self, x):
        x = np.asarray(x, dtype=float)
        return (np.abs(x[..., 1]) <= 1e-12) & (x[..., 0] <= 0.0)

    def _complex(self, x):
        z = x[..., 0] + 1j * x[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.exp(self.beta * np.log(z))
        return z, np.exp(-w)

    def _eval(self, x):
        _, F = self._complex(x)
        return F.real if self.part == "re" else F.imag

    def _gradient(self, x):
        z, F = self._complex(x)
        dF = -self.beta * np.exp((self.beta - 1.0) * np.log(z)) * F
        # Cauchy-Riemann: d(Re F) = (Re F', -Im F'), d(Im F) = (Im F', Re F').
        if self.part == "re":
            return np.stack([dF.real, -dF.imag], axis=-1)
        return np.stack([dF.imag, dF.real], axis=-1)

    def modulus_bound(self, x) -> np.ndarray:
        z = x[..., 0] + 1j * x[..., 1]
        return np.exp(-np.abs(z) ** self.beta * np.cos(self.beta * np.angle(z)))

    def _cut_crossing(self, line: Line) -> float | None:
        c, s = math.cos(line.theta), math.sin(line.theta)
        if abs(c) < 1e-15:
            return None
        if line.p / c > 0:
            return None
        return -line.p * s / c

    def singular_segment(self, line):
        return abs(line.p) < 1e-12 and abs(math.cos(line.theta)) < 1e-12

    def breakpoints(self, line):
        u = self._cut_crossing(line)
        return [] if u is None else [u]

    def seed_width(self, line):
        # The phase |z|^b sin(b arg z) turns at most b |z|^(b-1) per unit length,
        # so 4 |z|^(1-b) / b is about 0.64 of the shortest local period.
        p, b = line.p, self.beta
        return lambda u: max(1.0, 4.0 * math.hypot(p, u) ** (1.0 - b) / b)

    def envelope(self, line, side, start=0.0):
        if self.singular_segment(line):
            return None
        u_cut = self._cut_crossing(line)
        t0 = start
        if u_cut is not None and side * u_cut >= start:
            t0 = side * u_cut * (1 + 1e-12) + 1e-12
        ray = side * line.perp
        phi_inf = math.atan2(ray[1], ray[0])
        c_inf = math.cos(self.beta * phi_inf)
        if c_inf <= 1e-12:
            return None
        # arg z moves monotonically towards phi_inf along the ray, so the
        # decay rate beyond t0 is the smaller of its values at t0 and at infinity;
        # step t0 outwards until that rate is a fair share of c_inf.
        for _ in range(200):
            if abs(line.p) < 1e-14:
                phi_start = phi_inf
            else:
                z = line.points(side * t0)
                phi_start = math.atan2(z[1], z[0])
            c = min(math.cos(self.beta * phi_start), c_inf)
            if c >= 0.5 * c_inf:
                break
            t0 = 2.0 * t0 + 1.0
        return Envelope(0.0, c, self.beta, 0.0, t0)

    def describe(self):
        return f"stretched({self.beta:g}, {self.part.capitalize()})"


@dataclass(frozen=True)
class ConditionE(DensityField):
    """``exp(<w0,x>^2) exp(-<w0perp,x>^2) sin(<w0,x>^2)``, zero on ``<w0,x> = sqrt(k pi)``."""

    theta0: float = 0.0
    kind = "condition_e"

    @property
    def decay(self):
        return Decay(0.0, 2.0)

    def _ab(self, x):
        d = Direction(self.theta0)
        return x @ d.omega, x @ d.perp

    def _eval(self, x):
        a, b = self._ab(x)
        return np.exp(a * a - b * b) * np.sin(a * a)

    has_eval_error = True

    def eval_error(self, x):
        # The argument a^2 carries a relative rounding error of a few eps, which
        # sin turns into an absolute error ~ eps a^2, amplified by exp(a^2 - b^2).
        a, b = self._ab(np.asarray(x, dtype=float))
        return 4.0 * _EPS * (1.0 + a * a) * np.exp(a * a - b * b)

    def _gradient(self, x):
        d = Direction(self.theta0)
        a, b = self._ab(x)
        e = np.exp(a * a - b * b)
        da = e * 2.0 * a * (np.sin(a * a) + np.cos(a * a))
        db = -2.0 * b * e * np.sin(a * a)
        return da[..., None] * d.omega + db[..., None] * d.perp

    def envelope(self, line, side, start=0.0):
        delta = line.theta - self.theta0
        kappa = math.cos(2.0 * delta)
        if kappa <= 1e-12:
            return None
        uc = -line.p * math.tan(2.0 * delta)
        return Envelope(line.p**2 / kappa, kappa, 2.0, side * uc, start)

    def describe(self):
        return f"condition_e({math.degrees(self.theta0):g})"


@dataclass(frozen=True)
class Transported(DensityField):
    """``f_A(x) = f(A x)`` for an affine map ``A``."""

    inner: DensityField
    amap: AffineMap
    kind = "transport"

    @property
    def smoothness(self):
        return self.inner.smoothness

    @property
    def length_scale(self):
        return self.inner.length_scale / max(np.linalg.norm(self.amap.linear, 2), 1e-12)

    @property
    def decay(self):
        d = self.inner.decay
        smin = self.amap.min_singular_value
        return Decay(d.mu * smin**d.beta, d.beta, d.C, d.radius)

    def singular_mask(self, x):
        return self.inner.singular_mask(self.amap(x))

    def _eval(self, x):
        return self.inner._eval(self.amap(x))

    @property
    def has_eval_error(self):
        return self.inner.has_eval_error

    def eval_error(self, x):
        return self.inner.eval_error(self.amap(x))

    def _gradient(self, x):
        return self.inner.gradient(self.amap(x)) @ self.amap.linear

    def _image(self, line):
        img = transport_line(self.amap, line)
        a0 = float(self.amap(line.p * line.omega) @ img.perp)
        scale = float((self.amap.linear @ line.perp) @ img.perp)
        return img, a0, scale

    def envelope(self, line, side, start=0.0):
        img, a0, scale = self._image(line)
        s_abs = abs(scale)
        side_img = side if scale > 0 else -side
        inner = self.inner.envelope(img, side_img, max(side_img * a0 + s_abs * start, 0.0))
        if inner is None:
            return None
        start_out = max(start, (inner.start - side_img * a0) / s_abs)
        if inner.is_zero:
            return Envelope.vanishing(start_out)
        return Envelope(inner.log_c, inner.rate * s_abs**inner.beta, inner.beta,
                        (inner.shift - side_img * a0) / s_abs, start_out)

    def breakpoints(self, line):
        img, a0, scale = self._image(line)
        return [(u - a0) / scale for u in self.inner.breakpoints(img)]

    def singular_segment(self, line):
        return self.inner.singular_segment(transport_line(self.amap, line))

    def seed_width(self, line):
        img, a0, scale = self._image(line)
        inner = self.inner.seed_width(img)
        s_abs = abs(scale)
        return lambda u: inner(a0 + scale * u) / s_abs

    def describe(self):
        return f"{self.inner.describe()} | transport({self.amap.linear.tolist()}, {self.amap.translation.tolist()})"


@dataclass(frozen=True)
class Mollified(DensityField):
    """Convolution ``f * g_r`` with the unit-mass bump, by polar Gauss quadrature per point."""

    inner: DensityField
    radius: float
    n_radial: int = 32
    n_angular: int = 32
    kind = "mollify"
    smoothness = "smooth"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def bump(self) -> Bump:
        return Bump(self.radius)

    @property
    def length_scale(self):
        return self.inner.length_scale

    @property
    def decay(self):
        return self.inner.decay

    @cached_property
    def _rule(self):
        s, ws = np.polynomial.legendre.leggauss(self.n_radial)
        rho = 0.5 * (s + 1.0) * self.radius
        wr = 0.5 * self.radius * ws
        phi = 2.0 * math.pi * np.arange(self.n_angular) / self.n_angular
        wphi = 2.0 * math.pi / self.n_angular
        R, P = np.meshgrid(rho, phi, indexing="ij")
        pts = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1).reshape(-1, 2)
        w = (wr[:, None] * wphi * rho[:, None] * np.ones_like(P)).reshape(-1)
        w = w * self.bump._eval(pts)
        raw_mass = float(w.sum())
        return pts, w / raw_mass, raw_mass

    @property
    def raw_mass(self) -> float:
        """Mass of the bump under the discrete rule before renormalisation."""
        return self._rule[2]

    def _apply(self, fun, x, vector=False):
        pts, w, _ = self._rule
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        out = np.empty((flat.shape[0], 2) if vector else flat.shape[0])
        chunk = max(1, 400000 // len(w))
        for i in range(0, flat.shape[0], chunk):
            blk = flat[i:i + chunk]
            vals = fun(blk[:, None, :] - pts[None, :, :])
            out[i:i + chunk] = np.tensordot(vals, w, axes=([1], [0])) if not vector else np.einsum("nmk,m->nk", vals, w)
        return out.reshape(x.shape[:-1] + ((2,) if vector else ()))

    def _eval(self, x):
        return self._apply(self.inner.eval, x)

    @property
    def has_eval_error(self):
        return self.inner.has_eval_error

    def eval_error(self, x):
        return self._apply(self.inner.eval_error, x)

    def _gradient(self, x):
        if self.inner.smoothness == "continuous":
            return fd_gradient(self._eval, x)
        return self._apply(self.inner.gradient, x, vector=True)

    def envelope(self, line, side, start=0.0):
        r = self.radius
        envs = []
        for dp in np.linspace(-r, r, 7):
            e = self.inner.envelope(Line(line.direction, line.p + dp), side, max(start - r, 0.0))
            if e is None:
                return None
            envs.append(e)
        st = max(start, max(e.start for e in envs) + r)
        live = [e for e in envs if not e.is_zero]
        if not live:
            return Envelope.vanishing(st)
        return Envelope(max(e.log_c for e in live), min(e.rate for e in live),
                        min(e.beta for e in live), max(e.shift for e in live) + r, st)

    def seed_width(self, line):
        return self.inner.seed_width(line)

    def describe(self):
        return f"{self.inner.describe()} | mollify({self.radius:g})"


@dataclass(frozen=True)
class Restricted(DensityField):
    """The inner field set to zero on a closed convex hole."""

    inner: DensityField
    region: ConvexRegion
    kind = "restrict"
    smoothness = "continuous"

    @property
    def length_scale(self):
        return self.inner.length_scale

    @property
    def decay(self):
        return self.inner.decay

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        outside = ~self.region.contains(x)
        if np.any(outside):
            out[outside] = self.inner.eval(x[outside])
        return out

    @property
    def has_eval_error(self):
        return self.inner.has_eval_error

    def eval_error(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        outside = ~self.region.contains(x)
        if np.any(outside):
            out[outside] = self.inner.eval_error(x[outside])
        return out

    def breakpoints(self, line):
        pts = [u for u in self.inner.breakpoints(line)]
        iv = self.region.line_interval(line)
        if iv is not None:
            pts.extend(u for u in iv if math.isfinite(u))
            pts = [u for u in pts if not iv[0] < u < iv[1]] + [u for u in iv if math.isfinite(u)]
        return sorted(set(pts))

    def envelope(self, line, side, start=0.0):
        iv = self.region.line_interval(line)
        if iv is not None:
            lo, hi = (iv if side > 0 else (-iv[1], -iv[0]))
            if hi == math.inf:
                return Envelope.vanishing(max(start, lo))
            # Only the ray beyond the hole matters for the tail.
            start = max(start, hi)
        return self.inner.envelope(line, side, start)

    def singular_segment(self, line):
        if not self.inner.singular_segment(line):
            return False
        iv = self.region.line_interval(line)
        return iv is None or math.isfinite(iv[0]) or math.isfinite(iv[1])

    def seed_width(self, line):
        return self.inner.seed_width(line)

    def describe(self):
        return f"{self.inner.describe()} | restrict({self.region.describe()})"


@dataclass(frozen=True)
class Combination(DensityField):
    """Finite linear combination ``sum c_i f_i``."""

    terms: tuple
    kind = "combination"

    @property
    def smoothness(self):
        order = ["continuous", "C1", "smooth"]
        return min((f.smoothness for _, f in self.terms), key=order.index)

    @property
    def decay(self):
        ds = [f.decay for _, f in self.terms]
        return Decay(min(d.mu for d in ds), min(d.beta for d in ds),
                     sum(abs(c) * d.C for (c, _), d in zip(self.terms, ds)), max(d.radius for d in ds))

    def _eval(self, x):
        return sum(c * f._eval(x) for c, f in self.terms)

    @property
    def has_eval_error(self):
        return any(f.has_eval_error for _, f in self.terms)

    def eval_error(self, x):
        return sum(abs(c) * f.eval_error(x) for c, f in self.terms)

    def singular_mask(self, x):
        m = np.zeros(np.shape(x)[:-1], dtype=bool)
        for _, f in self.terms:
            m |= f.singular_mask(x)
        return m

    def _gradient(self, x):
        return sum(c * f.gradient(x) for c, f in self.terms)

    def envelope(self, line, side, start=0.0):
        envs = []
        for c, f in self.terms:
            e = f.envelope(line, side, start)
            if e is None:
                return None
            if c != 0 and not e.is_zero:
                envs.append(Envelope(e.log_c + math.log(abs(c)), e.rate, e.beta, e.shift, e.start))
        if not envs:
            return Envelope.vanishing(start)
        shift = max(e.shift for e in envs)
        beta = min(e.beta for e in envs)
        # (t - s)^b_i >= (t - s)^b once t - s >= 1 and b <= b_i.
        st = max(max(e.start for e in envs), shift + 1.0 if len({e.beta for e in envs}) > 1 else start)
        log_c = float(np.logaddexp.reduce([e.log_c for e in envs])) + math.log(len(envs))
        return Envelope(log_c, min(e.rate for e in envs), beta, shift, st)

    def breakpoints(self, line):
        return sorted({u for _, f in self.terms for u in f.breakpoints(line)})

    def seed_width(self, line):
        widths = [f.seed_width(line) for _, f in self.terms]
        return lambda u: min(w(u) for w in widths)

    def describe(self):
        return " + ".join(f"{c:g}*[{f.describe()}]" for c, f in self.terms)


# -- constructors --------------------------------------------------------------

def stretched_exp_field(beta: float, part: str = "Re") -> StretchedExp:
    return StretchedExp(beta, part)


def transport_affine(field: DensityField, amap: AffineMap) -> Transported:
    return Transported(field, amap)


def mollify(field: DensityField, radius: float, n_radial: int = 32, n_angular: int = 32) -> Mollified:
    return Mollified(field, radius, n_radial, n_angular)


def restrict(field: DensityField, region: ConvexRegion) -> Restricted:
    return Restricted(field, region)


def _build_base(name, args, kwargs) -> DensityField:
    if name == "gaussian":
        sigma = args[0] if args else kwargs.pop("sigma", 1.0)
        center = tuple(args[1:3]) if len(args) >= 3 else tuple(kwargs.pop("center", (0.0, 0.0)))
        return Gaussian(sigma, center, kwargs.pop("amplitude", 1.0))
    if name == "exp_decay":
        mu = args[0] if args else kwargs.pop("mu", 1.0)
        center = tuple(args[1:3]) if len(args) >= 3 else tuple(kwargs.pop("center", (0.0, 0.0)))
        return ExpDecay(mu, center)
    if name == "stretched":
        return StretchedExp(*args, **kwargs)
    if name == "condition_e":
        deg = args[0] if args else kwargs.pop("theta0_deg", 0.0)
        return ConditionE(math.radians(deg))
    if name == "bump":
        return Bump(*args, **kwargs)
    if name == "zero":
        return Zero()
    raise ValueError(f"unknown field {name!r}")


def parse_field(text) -> DensityField:
    """Build a field from ``"gaussian(1) | transport([[2,0],[0,1]], [0,0]) | mollify(0.25)"``.

    A list of stage strings is accepted as well.
    """
    stages = split_pipeline(text) if isinstance(text, str) else list(text)
    if not stages:
        raise ValueError("empty field description")
    name, args, kwargs = parse_call(stages[0])
    fld = _build_base(name, args, kwargs)
    for stage in stages[1:]:
        name, args, kwargs = parse_call(stage)
        if name == "transport":
            matrix = args[0] if args else kwargs["matrix"]
            shift = args[1] if len(args) > 1 else kwargs.get("translation", (0.0, 0.0))
            fld = Transported(fld, AffineMap(np.asarray(matrix, dtype=float), np.asarray(shift, dtype=float)))
        elif name == "mollify":
            fld = Mollified(fld, *args, **kwargs)
        elif name == "restrict":
            region = parse_region(args[0] if args else kwargs["region"])
            fld = Restricted(fld, region)
        else:
            raise ValueError(f"unknown field modifier {name!r}")
    return fld


def class_condition_probe(field, scan, k_max, p_samples, **kwargs):
    """Sampled check of the local decay conditions; see :mod:`exradon.probe`."""
    from .probe import class_condition_probe as _probe

    return _probe(field, scan, k_max, p_samples, **kwargs)
