"""Scan geometry for a rotating emitter/receiver pair on the unit circle.

The emitter and receiver ride the unit circle at a constant angular
separation ``2*alpha``.  The integration curves of the transform are the
ellipses with those two positions as foci; a curve is indexed by the scan
angle ``s`` and its major diameter ``L`` (the focal-distance sum, which
must exceed the focal separation ``2a``).  This module holds the scan
constants, the trajectories, the ellipse level function and its gradient,
confocal elliptic coordinates, and the angular window in which an ellipse
stays inside the supported disc of radius ``b``.

All functions are pure and accept scalars or numpy arrays where that is
natural; nothing here owns mutable state.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FocalPointError, FocalSegmentError

TWO_PI = 2.0 * math.pi

# Points closer than this to a focus are treated as coincident with it.
_FOCUS_TOL = 1e-13


def reduce_angle(s):
    """Reduce an angle (scalar or array) to the canonical range [0, 2*pi).

    Every angle stored or compared by the package goes through this one
    function so that grid indexing in ``s`` stays exact.
    """
    return np.mod(s, TWO_PI)


@dataclass(frozen=True)
class ScanGeometry:
    """Scan configuration and its derived constants.

    ``a = sin(alpha)`` is half the focal separation, ``b = cos(alpha)``
    the radius of the supported disc; ``a**2 + b**2 == 1`` up to rounding.
    """

    alpha: float
    a: float
    b: float

    @property
    def diameter_min(self):
        """Focal separation ``2a``; every major diameter must exceed it."""
        return 2.0 * self.a

    @property
    def diameter_max(self):
        """Largest major diameter whose ellipse still meets the disc."""
        return 2.0 * math.sqrt(self.a * self.a + 4.0 * self.b * self.b)


def make_geometry(alpha):
    """Build the scan configuration for half-separation ``alpha``.

    Raises
    ------
    DomainError
        Unless ``0 < alpha < pi/2``.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5 * math.pi:
        raise DomainError(
            f"alpha must lie in the open interval (0, pi/2); got {alpha!r}")
    return ScanGeometry(alpha, math.sin(alpha), math.cos(alpha))


def emitter(g, s):
    """Emitter position at scan parameter ``s``: unit vector at angle s - alpha."""
    ang = np.asarray(s, dtype=float) - g.alpha
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def receiver(g, s):
    """Receiver position at scan parameter ``s``: unit vector at angle s + alpha."""
    ang = np.asarray(s, dtype=float) + g.alpha
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def emitter_deriv(g, s):
    """d/ds of the emitter position (tangent to the unit circle)."""
    ang = np.asarray(s, dtype=float) - g.alpha
    return np.stack([-np.sin(ang), np.cos(ang)], axis=-1)


def receiver_deriv(g, s):
    """d/ds of the receiver position (tangent to the unit circle)."""
    ang = np.asarray(s, dtype=float) + g.alpha
    return np.stack([-np.sin(ang), np.cos(ang)], axis=-1)


def level(g, x, s):
    """Sum of distances from ``x`` to the two foci at scan parameter ``s``.

    The level set ``{x : level(x, s) = L}`` is the scan ellipse with major
    diameter ``L``.  ``x`` has shape (..., 2) and broadcasts against ``s``.

    Raises
    ------
    FocalPointError
        If ``x`` coincides with a focus (distance below 1e-13).
    """
    x = np.asarray(x, dtype=float)
    dr = x - receiver(g, s)
    dt = x - emitter(g, s)
    nr = np.hypot(dr[..., 0], dr[..., 1])
    nt = np.hypot(dt[..., 0], dt[..., 1])
    if np.any(nr < _FOCUS_TOL) or np.any(nt < _FOCUS_TOL):
        raise FocalPointError("x coincides with an emitter or receiver position")
    return nr + nt


def is_on_focal_segment(g, x, s, tol=1e-12):
    """True where ``x`` lies on the closed segment joining the two foci.

    That segment is the degenerate ellipse ``L = 2a``; the level-set
    gradient vanishes on its interior, so the transform machinery never
    evaluates there.
    """
    return level(g, x, s) <= g.diameter_min + tol


def gradient_weight(g, x, s):
    """Spatial gradient of ``level`` and its magnitude.

    Returns the sum of the two unit vectors pointing from the foci to
    ``x`` together with its length, which is the backprojection weight.
    The magnitude lies in (0, 2]; it vanishes only on the open focal
    segment.

    Raises
    ------
    FocalPointError
        At a focus, where the gradient is undefined.
    FocalSegmentError
        On the open segment between the foci, where the weight is zero.
    """
    x = np.asarray(x, dtype=float)
    dr = x - receiver(g, s)
    dt = x - emitter(g, s)
    nr = np.hypot(dr[..., 0], dr[..., 1])
    nt = np.hypot(dt[..., 0], dt[..., 1])
    if np.any(nr < _FOCUS_TOL) or np.any(nt < _FOCUS_TOL):
        raise FocalPointError("gradient undefined at an emitter or receiver position")
    vec = dr / nr[..., None] + dt / nt[..., None]
    mag = np.hypot(vec[..., 0], vec[..., 1])
    if np.any(mag < 1e-12):
        raise FocalSegmentError(
            "level-set gradient degenerates on the open focal segment")
    return vec, mag


def rotate(theta, pts):
    """Counterclockwise rotation of 2-vectors.

    ``theta`` broadcasts against ``pts[..., 0]``.
    """
    pts = np.asarray(pts, dtype=float)
    c = np.cos(theta)
    s = np.sin(theta)
    x = pts[..., 0]
    y = pts[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def rho_from_diameter(g, L):
    """Radial elliptic coordinate of the ellipse with major diameter ``L``.

    Inverts ``L = 2 a cosh(rho)``; requires ``L > 2a``.
    """
    L = np.asarray(L, dtype=float)
    if np.any(L <= g.diameter_min):
        raise DomainError(
            f"major diameter must exceed the focal separation {g.diameter_min!r}")
    return np.arccosh(L / g.diameter_min)


@dataclass(frozen=True)
class EllipseParam:
    """A point (s, L) of the ellipse parameter space.

    ``s`` is stored reduced modulo 2*pi.  The constraint ``L > 2a`` depends
    on a geometry and is enforced by the operations that consume the pair.
    """

    s: float
    L: float

    def __post_init__(self):
        object.__setattr__(self, "s", float(reduce_angle(self.s)))
        object.__setattr__(self, "L", float(self.L))
        if not self.L > 0.0:
            raise DomainError(f"major diameter must be positive; got {self.L!r}")


def ellipse_point_reference(g, L, phi):
    """Point of the diameter-``L`` ellipse in the reference frame.

    The reference frame is the scan position whose foci are ``(-a, b)``
    and ``(a, b)``; the curve is ``(a cosh(rho) cos(phi),
    b + a sinh(rho) sin(phi))`` with ``rho`` from :func:`rho_from_diameter`.
    """
    rho = rho_from_diameter(g, L)
    phi = np.asarray(phi, dtype=float)
    return np.stack([
        g.a * np.cosh(rho) * np.cos(phi),
        g.b + g.a * np.sinh(rho) * np.sin(phi),
    ], axis=-1)


def ellipse_point(g, e, phi):
    """Point of the scan ellipse ``e`` at angular coordinate ``phi``.

    The general position is the reference-frame point rotated by
    ``e.s - pi/2``, which carries the reference foci onto the foci at
    scan parameter ``e.s``.
    """
    return rotate(e.s - 0.5 * math.pi, ellipse_point_reference(g, e.L, phi))


def arc_length_element(g, e, phi):
    """Arc length per unit ``phi`` on the scan ellipse ``e``.

    Equals ``a * sqrt(sinh(rho)**2 + sin(phi)**2)``; strictly positive for
    any nondegenerate ellipse.
    """
    rho = float(rho_from_diameter(g, e.L))
    sh = math.sinh(rho)
    phi = np.asarray(phi, dtype=float)
    return g.a * np.sqrt(sh * sh + np.sin(phi) ** 2)


@dataclass(frozen=True)
class EllipticCoord:
    """Confocal elliptic coordinates (rho >= 0, phi in [0, 2*pi))."""

    rho: float
    phi: float


def elliptic_to_cartesian(g, rho, phi):
    """Cartesian point of the elliptic coordinates (rho, phi).

    Same chart as :func:`ellipse_point_reference`, parameterized by the
    radial coordinate directly.
    """
    rho = np.asarray(rho, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([
        g.a * np.cosh(rho) * np.cos(phi),
        g.b + g.a * np.sinh(rho) * np.sin(phi),
    ], axis=-1)


def cartesian_to_elliptic(g, x):
    """Elliptic coordinates of a point ``x`` (shape (2,)).

    The inverse of :func:`elliptic_to_cartesian`; for points off the focal
    segment the round trip reproduces ``x`` to 1e-12.  On the segment the
    chart degenerates (rho = 0) but the returned pair still maps back onto
    the segment.
    """
    x = np.asarray(x, dtype=float)
    u = float(x[0])
    v = float(x[1]) - g.b
    d1 = math.hypot(u + g.a, v)
    d2 = math.hypot(u - g.a, v)
    ch = max(1.0, (d1 + d2) / (2.0 * g.a))
    rho = math.acosh(ch)
    cos_phi = min(1.0, max(-1.0, (d1 - d2) / (2.0 * g.a)))
    sh = math.sinh(rho)
    if sh > 0.0:
        sin_phi = v / (g.a * sh)
    else:
        sin_phi = 0.0
    phi = float(reduce_angle(math.atan2(sin_phi, cos_phi)))
    return EllipticCoord(rho, phi)


@dataclass(frozen=True)
class PhiWindow:
    """Open angular interval on which the reference ellipse stays in the disc.

    When non-empty the bounds satisfy ``pi < phi_min < phi_max < 2*pi``.
    """

    phi_min: float
    phi_max: float
    empty: bool

    @property
    def width(self):
        return 0.0 if self.empty else self.phi_max - self.phi_min


def phi_window_arrays(g, L, iters=60):
    """Vectorized angular windows for an array of major diameters.

    Returns ``(phi_min, phi_max, empty)``; the bounds are NaN where the
    window is empty.  The edges are located by bisection (to well below
    1e-10 in phi) on ``|x'(L, phi)|**2 - b**2`` starting from the bottom
    vertex at ``phi = 3*pi/2``, which is strictly inside the disc for
    every diameter in the open admissible range.
    """
    L = np.atleast_1d(np.asarray(L, dtype=float))
    a, b = g.a, g.b
    lo_out = np.full(L.shape, np.nan)
    hi_out = np.full(L.shape, np.nan)
    empty = ~((L > g.diameter_min) & (L < g.diameter_max))

    act = ~empty
    if np.any(act):
        rho = np.arccosh(L[act] / g.diameter_min)
        A = a * np.cosh(rho)
        B = a * np.sinh(rho)

        # bottom vertex (0, b - B) must be strictly inside the disc
        inside0 = (b - B) ** 2 < b * b
        if not np.all(inside0):
            idx = np.flatnonzero(act)
            empty[idx[~inside0]] = True
            act = ~empty
            keep = inside0
            rho, A, B = rho[keep], A[keep], B[keep]

        def gap(phi):
            return (A * np.cos(phi)) ** 2 + (b + B * np.sin(phi)) ** 2 - b * b

        # lower edge in (pi, 3*pi/2): gap(pi) > 0, gap(3*pi/2) < 0
        lo = np.full(A.shape, math.pi)
        hi = np.full(A.shape, 1.5 * math.pi)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            outside = gap(mid) > 0.0
            lo = np.where(outside, mid, lo)
            hi = np.where(outside, hi, mid)
        lo_out[act] = 0.5 * (lo + hi)

        # upper edge in (3*pi/2, 2*pi): gap(3*pi/2) < 0, gap(2*pi) > 0
        lo = np.full(A.shape, 1.5 * math.pi)
        hi = np.full(A.shape, TWO_PI)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            inside = gap(mid) < 0.0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        hi_out[act] = 0.5 * (lo + hi)

    return lo_out, hi_out, empty


def phi_window(g, L):
    """Angular window of the diameter-``L`` reference ellipse inside the disc.

    Empty exactly when ``L`` falls outside the open admissible diameter
    range; see :func:`phi_window_arrays`.
    """
    lo, hi, empty = phi_window_arrays(g, np.asarray([float(L)]))
    if empty[0]:
        return PhiWindow(math.nan, math.nan, True)
    return PhiWindow(float(lo[0]), float(hi[0]), False)
