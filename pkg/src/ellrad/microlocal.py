"""Numerical certification of the scan geometry's imaging properties.

The data-side covector of the transform at a curve point has a scan-angle
coefficient (``ds_coefficient``) whose strict monotonicity in the angular
curve parameter, over the window where the curve stays inside the
supported disc, guarantees that the data-to-image correspondence is an
injective immersion; the normal operator is then a genuine image-domain
filter that preserves singularities.  This module evaluates that
coefficient in three equivalent forms (general position, rotation-reduced
reference position, and closed form in elliptic coordinates), exposes the
factored profile in ``t = cos(phi)`` whose derivative sign is controlled
by an explicit numerator, and sweeps dense grids to certify:

* the angular derivative of the coefficient never vanishes,
* the coefficient is strictly monotone along every admissible curve,
* the derivative-sign numerator is positive on all admissible samples,
* admissible elliptic coordinates obey the cosine and radial bounds,
* the two positivity routes (wide and narrow half-separation) hold on
  their stated ranges, which jointly cover every geometry.

Everything here is a finite-grid numerical certificate with explicit
margins, not a proof; the reports say so.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketingError, DomainError, FocalPointError
from .geometry import (TWO_PI, elliptic_to_cartesian, emitter, emitter_deriv,
                       gradient_weight, level, make_geometry,
                       phi_window_arrays, receiver, receiver_deriv,
                       reduce_angle, rho_from_diameter, rotate)

DISCLAIMER = ("numerical certificate on finite grids with explicit margins; "
              "not a symbolic proof")

# order of the transform as a Fourier integral operator, recorded in the
# certificate for documentation: (dim Y - dim Z) / 2 with dim Y = 2,
# dim Z = 3
FIO_ORDER = -0.5


def _check_rho(rho):
    rho = np.asarray(rho, float)
    if np.any(rho <= 0.0):
        raise DomainError("radial elliptic coordinate must be positive")
    return rho


def _check_t(t):
    t = np.asarray(t, float)
    if np.any(np.abs(t) >= 1.0 - 1e-12):
        raise DomainError(
            "cosine coordinate too close to +-1: sqrt(1 - t^2) would "
            "overflow the profile quotient")
    return t


# ---------------------------------------------------------------------------
# the scan-angle coefficient and its reductions


def ds_coefficient(g, s, L, phi):
    """Scan-angle coefficient of the data-side covector in general position.

    For the curve point at ``(s, L, phi)`` this is the sum over the two
    foci of (point . focus velocity) / (distance to focus); it is what the
    data covector pairs with a unit change of the scan angle.
    """
    x = rotate(np.asarray(s, float) - 0.5 * math.pi,
               _reference_point(g, L, phi))
    gr = receiver(g, s)
    gt = emitter(g, s)
    grd = receiver_deriv(g, s)
    gtd = emitter_deriv(g, s)
    dr = np.hypot(x[..., 0] - gr[..., 0], x[..., 1] - gr[..., 1])
    dt = np.hypot(x[..., 0] - gt[..., 0], x[..., 1] - gt[..., 1])
    num_r = x[..., 0] * grd[..., 0] + x[..., 1] * grd[..., 1]
    num_t = x[..., 0] * gtd[..., 0] + x[..., 1] * gtd[..., 1]
    return num_r / dr + num_t / dt


def _reference_point(g, L, phi):
    rho = rho_from_diameter(g, L)
    phi = np.asarray(phi, float)
    return np.stack([
        g.a * np.cosh(rho) * np.cos(phi),
        g.b + g.a * np.sinh(rho) * np.sin(phi),
    ], axis=-1)


def ds_coefficient_reference(g, L, phi):
    """The scan-angle coefficient at the reference scan position.

    Rotation invariance reduces the general position to the frame with
    foci ``(-a, b)`` and ``(a, b)``, whose velocities are the constants
    ``(-b, -a)`` and ``(-b, a)``.
    """
    x = _reference_point(g, L, phi)
    a, b = g.a, g.b
    dr = np.hypot(x[..., 0] + a, x[..., 1] - b)
    dt = np.hypot(x[..., 0] - a, x[..., 1] - b)
    if np.any(dr < 1e-13) or np.any(dt < 1e-13):
        raise FocalPointError("curve point degenerates onto a focus")
    return ((x[..., 0] * (-b) + x[..., 1] * (-a)) / dr
            + (x[..., 0] * (-b) + x[..., 1] * a) / dt)


def ds_coefficient_elliptic(g, rho, phi):
    """Closed form of the reference coefficient in elliptic coordinates.

    Equals ``2 sinh(rho) cos(phi) (a sin(phi) - b sinh(rho)) /
    ((cosh(rho) + cos(phi)) (cosh(rho) - cos(phi)))``; the denominator is
    positive because cosh(rho) > 1 >= |cos(phi)|.
    """
    rho = _check_rho(rho)
    phi = np.asarray(phi, float)
    sh = np.sinh(rho)
    ch = np.cosh(rho)
    c = np.cos(phi)
    s = np.sin(phi)
    return 2.0 * sh * c * (g.a * s - g.b * sh) / ((ch + c) * (ch - c))


def coefficient_profile(g, rho, t):
    """Profile of the elliptic coefficient in ``t = cos(phi)``.

    On the admissible branch (phi between pi and 2*pi, where
    ``sin(phi) = -sqrt(1 - t^2)``) the elliptic coefficient equals
    ``-2 sinh(rho)`` times this profile.
    """
    rho = _check_rho(rho)
    t = _check_t(t)
    sh = np.sinh(rho)
    ch2 = np.cosh(rho) ** 2
    return (g.b * sh * t + g.a * t * np.sqrt(1.0 - t * t)) / (ch2 - t * t)


def profile_numerator(g, rho, t):
    """Numerator controlling the sign of the profile's t-derivative.

    ``(cosh^2 + t^2)(b sinh + a sqrt(1 - t^2))
    - (cosh^2 - t^2) a t^2 / sqrt(1 - t^2)``; positive exactly where the
    profile is strictly increasing.
    """
    rho = _check_rho(rho)
    t = _check_t(t)
    sh = np.sinh(rho)
    ch2 = np.cosh(rho) ** 2
    root = np.sqrt(1.0 - t * t)
    return ((ch2 + t * t) * (g.b * sh + g.a * root)
            - (ch2 - t * t) * g.a * t * t / root)


def coefficient_profile_deriv(g, rho, t):
    """t-derivative of the profile (numerator over the squared denominator)."""
    rho = _check_rho(rho)
    t = _check_t(t)
    ch2 = np.cosh(rho) ** 2
    return profile_numerator(g, rho, t) / (ch2 - t * t) ** 2


# ---------------------------------------------------------------------------
# admissibility


def is_admissible(g, rho, phi):
    """True where the elliptic-coordinate point lies inside the disc."""
    x = elliptic_to_cartesian(g, rho, phi)
    return x[..., 0] ** 2 + x[..., 1] ** 2 < g.b * g.b


@dataclass(frozen=True)
class MicrolocalSample:
    """An elliptic-coordinate sample with its derived quantities."""

    rho: float
    phi: float
    t: float
    k: float
    admissible: bool


def make_sample(g, rho, phi):
    rho = float(rho)
    phi = float(reduce_angle(phi))
    return MicrolocalSample(rho, phi, math.cos(phi), math.sinh(rho),
                            bool(is_admissible(g, rho, phi)))


@dataclass(frozen=True)
class CotangentSample:
    """One data/image covector pair on the incidence correspondence.

    ``ds_coeff`` is the scan-angle component, ``dl_coeff`` the diameter
    component (equal to omega), and ``dx_covector`` is omega times the
    level-set gradient at the curve point.
    """

    s: float
    L: float
    phi: float
    omega: float
    ds_coeff: float
    dl_coeff: float
    dx_covector: np.ndarray
    x: np.ndarray


def cotangent_sample(g, s, L, phi, omega):
    if omega == 0.0:
        raise DomainError("omega must be nonzero")
    s = float(reduce_angle(s))
    x = rotate(s - 0.5 * math.pi, _reference_point(g, L, phi))
    vec, _ = gradient_weight(g, x, s)
    coeff = float(ds_coefficient(g, s, L, phi))
    return CotangentSample(s, float(L), float(phi), float(omega),
                           -omega * coeff, float(omega), omega * vec, x)


# ---------------------------------------------------------------------------
# grid sweeps and reports


@dataclass(frozen=True)
class SweepReport:
    """Result of an admissible-region bound sweep."""

    name: str
    bound: float
    extremal: float
    margin: float
    violations: int
    admissible_count: int
    grid_shape: tuple

    @property
    def passed(self):
        return self.violations == 0


def _rho_cap(g, slack=1.25):
    # radial bound for admissible samples, probed a bit beyond
    return slack * math.acosh(math.sqrt((4.0 - 3.0 * g.a ** 2) / g.a ** 2))


def _admissible_sweep(g, quantity, name, bound, n_rho, n_phi):
    cap = _rho_cap(g)
    rho = (np.arange(n_rho) + 1.0) * cap / n_rho
    phi = (np.arange(n_phi) + 0.5) * TWO_PI / n_phi
    R, P = np.meshgrid(rho, phi, indexing="ij")
    adm = is_admissible(g, R, P)
    q = quantity(R, P)
    violations = int(np.count_nonzero(adm & (q > bound)))
    extremal = float(np.max(q[adm])) if np.any(adm) else math.nan
    return SweepReport(name=name, bound=float(bound), extremal=extremal,
                       margin=float(bound - extremal),
                       violations=violations,
                       admissible_count=int(np.count_nonzero(adm)),
                       grid_shape=(n_rho, n_phi))


def admissible_cos_bound_report(g, n_rho=512, n_phi=512):
    """Sweep check: every admissible sample has |cos(phi)| <= b."""
    return _admissible_sweep(g, lambda r, p: np.abs(np.cos(p)),
                             "admissible_cos_bound", g.b, n_rho, n_phi)


def admissible_cosh_bound_report(g, n_rho=512, n_phi=512):
    """Sweep check: every admissible sample has cosh(rho)^2 <= (4-3a^2)/a^2."""
    bound = (4.0 - 3.0 * g.a ** 2) / g.a ** 2
    return _admissible_sweep(g, lambda r, p: np.cosh(r) ** 2,
                             "admissible_cosh_bound", bound, n_rho, n_phi)


@dataclass(frozen=True)
class WideAngleReport:
    """Positivity route for wide half-separations (alpha > 0.8).

    The admissible radial bound caps ``k = sinh(rho)``; the decreasing
    map ``f(k) = (1 + k^2)/(1 + 2 k^2)`` then bottoms out at
    ``(4 - 3a^2)/(8 - 7a^2)``, and the route closes when ``b^2``
    (the cosine-bound square) stays strictly below that value.
    """

    alpha: float
    applicable: bool
    lhs: float
    rhs: float
    margin: float
    k_min: float
    f_identity_error: float

    @property
    def holds(self):
        return self.margin > 0.0

    @property
    def passed(self):
        return self.holds if self.applicable else True


def positivity_wide_angle(alpha):
    g = make_geometry(alpha)
    a2 = g.a ** 2
    lhs = 1.0 - a2
    rhs = (4.0 - 3.0 * a2) / (8.0 - 7.0 * a2)
    k_min = 2.0 * math.sqrt(1.0 - a2) / g.a
    f_kmin = (1.0 + k_min ** 2) / (1.0 + 2.0 * k_min ** 2)
    return WideAngleReport(alpha=float(alpha), applicable=alpha > 0.8,
                           lhs=lhs, rhs=rhs, margin=rhs - lhs, k_min=k_min,
                           f_identity_error=abs(f_kmin - rhs))


@dataclass(frozen=True)
class NarrowAngleReport:
    """Positivity route for narrow half-separations (alpha < 1.2).

    With ``x = sinh(rho)`` the route reduces to the quadratic
    ``b x^2 - x + 2b`` having no real root, i.e. a negative discriminant
    ``1 - 8 b^2``, which holds exactly for ``b > 1/(2 sqrt 2)``
    (``alpha < arccos(1/(2 sqrt 2)) ~= 1.2094``).
    """

    alpha: float
    applicable: bool
    b: float
    b_threshold: float
    alpha_threshold: float
    discriminant: float
    min_bound_ratio: float

    @property
    def holds(self):
        return self.discriminant < 0.0 and self.min_bound_ratio > 1.0

    @property
    def passed(self):
        return self.holds if self.applicable else True


def positivity_narrow_angle(alpha, n_rho=512):
    g = make_geometry(alpha)
    b = g.b
    cap = _rho_cap(g, slack=1.0)
    rho = (np.arange(n_rho) + 1.0) * cap / n_rho
    sh = np.sinh(rho)
    ch2 = np.cosh(rho) ** 2
    ratio = (b * sh + 1.0) * ch2 / (ch2 + sh * sh - b * sh)
    return NarrowAngleReport(alpha=float(alpha), applicable=alpha < 1.2,
                             b=b, b_threshold=1.0 / (2.0 * math.sqrt(2.0)),
                             alpha_threshold=math.acos(1.0 / (2.0 * math.sqrt(2.0))),
                             discriminant=1.0 - 8.0 * b * b,
                             min_bound_ratio=float(np.min(ratio)))


# ---------------------------------------------------------------------------
# the certificate


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float = math.nan
    location: dict = None
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "margin": None if math.isnan(self.margin) else self.margin,
                "location": self.location, "detail": self.detail}


@dataclass(frozen=True)
class Certificate:
    alpha: float
    grid: int
    fio_order: float
    disclaimer: str
    checks: tuple = field(default_factory=tuple)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"alpha": self.alpha, "grid": self.grid,
                "fio_order": self.fio_order, "disclaimer": self.disclaimer,
                "all_passed": bool(self.all_passed),
                "checks": [c.to_dict() for c in self.checks]}

    def to_text(self):
        lines = [f"certificate for alpha = {self.alpha:.12g} "
                 f"(grid {self.grid}x{self.grid})",
                 f"note: {self.disclaimer}",
                 f"transform order constant: {self.fio_order}"]
        for c in self.checks:
            state = "pass" if c.passed else "FAIL"
            margin = "" if math.isnan(c.margin) else f"  margin={c.margin:.6g}"
            where = f"  at {c.location}" if c.location else ""
            extra = f"  ({c.detail})" if c.detail else ""
            lines.append(f"  [{state}] {c.name}{margin}{where}{extra}")
        lines.append("all checks passed" if self.all_passed
                     else "CERTIFICATION FAILED")
        return "\n".join(lines) + "\n"


def _certificate_mesh(g, grid):
    lo, hi = g.diameter_min, g.diameter_max
    L = lo + (np.arange(grid) + 0.5) * (hi - lo) / grid
    wlo, whi, empty = phi_window_arrays(g, L)
    keep = ~empty
    L, wlo, whi = L[keep], wlo[keep], whi[keep]
    width = whi - wlo
    frac = (np.arange(grid) + 0.5) / grid
    phi = wlo[:, None] + width[:, None] * frac[None, :]
    rho = np.arccosh(L / g.diameter_min)
    return L, rho, phi


def _fd_phi_derivative(g, rho, phi, h):
    """Richardson-extrapolated central difference of the elliptic form."""
    def d(step):
        return (ds_coefficient_elliptic(g, rho, phi + step)
                - ds_coefficient_elliptic(g, rho, phi - step)) / (2.0 * step)
    return (4.0 * d(0.5 * h) - d(h)) / 3.0


def bolker_certificate(alpha, grid=512, fd_step=1e-5, refine=32):
    """Certify the injective-immersion conditions on a dense admissible grid.

    For each diameter the angular window inside the disc is sampled at
    ``grid`` interior points; the sweep verifies (i) the finite-difference
    angular derivative of the coefficient never vanishes (with a local
    refinement pass around the smallest margin), (ii) the coefficient is
    strictly monotone along every window with no ties at 1e-12, and
    (iii) the derivative-sign numerator is positive on all admissible
    samples.  The admissible-bound sweeps and both positivity routes are
    appended so one report covers the full argument.
    """
    g = make_geometry(alpha)
    L, rho, phi = _certificate_mesh(g, grid)
    rho_col = rho[:, None]

    checks = []

    # (i) angular derivative bounded away from zero
    dmag = np.abs(_fd_phi_derivative(g, rho_col, phi, fd_step))
    k_star, m_star = np.unravel_index(np.argmin(dmag), dmag.shape)
    global_min = float(dmag[k_star, m_star])
    # local refinement around the weakest cell
    lo_l = max(0, k_star - 1)
    hi_l = min(L.size - 1, k_star + 1)
    Lr = np.linspace(L[lo_l], L[hi_l], refine)
    wlo_r, whi_r, empty_r = phi_window_arrays(g, Lr)
    keep = ~empty_r
    Lr, wlo_r, whi_r = Lr[keep], wlo_r[keep], whi_r[keep]
    rho_r = np.arccosh(Lr / g.diameter_min)
    frac0 = max(0.0, (m_star - 1.0) / grid)
    frac1 = min(1.0, (m_star + 2.0) / grid)
    frac_r = np.linspace(frac0, frac1, refine)
    phi_r = wlo_r[:, None] + (whi_r - wlo_r)[:, None] * frac_r[None, :]
    dmag_r = np.abs(_fd_phi_derivative(g, rho_r[:, None], phi_r, fd_step))
    refined_min = float(np.min(dmag_r))
    margin = min(global_min, refined_min)
    checks.append(CheckResult(
        name="angular_derivative_nonvanishing", passed=margin > 0.0,
        margin=margin,
        location={"L": float(L[k_star]), "phi": float(phi[k_star, m_star])},
        detail=f"central differences, step {fd_step:g}, one Richardson "
               f"refinement; local refinement {refine}x{refine}"))

    # (ii) strict monotonicity of the coefficient along every window
    svals = ds_coefficient_reference(g, L[:, None], phi)
    diffs = np.diff(svals, axis=1)
    row_dir = np.sign(diffs[:, :1])
    monotone = bool(np.all(diffs * row_dir > 0.0))
    gap = float(np.min(np.abs(diffs)))
    k_gap = int(np.argmin(np.min(np.abs(diffs), axis=1)))
    checks.append(CheckResult(
        name="coefficient_strictly_monotone",
        passed=monotone and gap > 1e-12, margin=gap,
        location={"L": float(L[k_gap])},
        detail="per-diameter sorted without ties at 1e-12"))

    # (iii) positive derivative-sign numerator on the admissible grid
    nvals = profile_numerator(g, rho_col, np.cos(phi))
    k_n, m_n = np.unravel_index(np.argmin(nvals), nvals.shape)
    nmin = float(nvals[k_n, m_n])
    checks.append(CheckResult(
        name="numerator_positive", passed=nmin > 0.0, margin=nmin,
        location={"L": float(L[k_n]), "phi": float(phi[k_n, m_n])}))

    # admissible-region bounds
    for rep in (admissible_cos_bound_report(g, grid, grid),
                admissible_cosh_bound_report(g, grid, grid)):
        checks.append(CheckResult(
            name=rep.name, passed=rep.passed, margin=rep.margin,
            detail=f"{rep.violations} violations among "
                   f"{rep.admissible_count} admissible samples"))

    # the two positivity routes and their joint coverage
    wide = positivity_wide_angle(alpha)
    checks.append(CheckResult(
        name="positivity_wide_angle", passed=wide.passed,
        margin=wide.margin,
        detail=("applicable" if wide.applicable else
                "hypothesis alpha > 0.8 not met; vacuous")))
    narrow = positivity_narrow_angle(alpha)
    checks.append(CheckResult(
        name="positivity_narrow_angle", passed=narrow.passed,
        margin=-narrow.discriminant,
        detail=("applicable" if narrow.applicable else
                "hypothesis alpha < 1.2 not met; vacuous")))
    covered = (wide.applicable and wide.holds) or \
        (narrow.applicable and narrow.holds)
    checks.append(CheckResult(
        name="positivity_coverage", passed=covered,
        detail="at least one positivity route applies and holds"))

    # closed-form identity for the largest admissible diameter
    ident = abs(g.diameter_max - 2.0 * math.sqrt(1.0 + 3.0 * g.b ** 2))
    checks.append(CheckResult(
        name="diameter_bound_identity", passed=ident <= 1e-12, margin=ident,
        detail="2 sqrt(a^2 + 4 b^2) == 2 sqrt(1 + 3 b^2)"))

    return Certificate(alpha=float(alpha), grid=int(grid),
                       fio_order=FIO_ORDER, disclaimer=DISCLAIMER,
                       checks=tuple(checks))


# ---------------------------------------------------------------------------
# conormal direction search


def _direction_mismatch(g, x, s, theta):
    vec, _ = gradient_weight(g, x, s)
    psi = np.arctan2(vec[..., 1], vec[..., 0])
    return np.mod(psi - theta + math.pi, TWO_PI) - math.pi


def conormal_search(g, x, theta, scan=2048, iters=60):
    """Find the scan angle whose curve is conormal to ``x`` along ``theta``.

    Scans the signed angle between the level-set gradient direction at
    ``x`` and the target direction over a dense scan-angle grid, brackets
    a zero away from the anti-parallel jump, and bisects.  Returns
    ``(s0, L0, omega_sign)`` with ``L0`` the diameter of the curve through
    ``x`` at ``s0``; the match is to the gradient direction itself, so the
    omega sign is +1.

    Raises
    ------
    BracketingError
        If no bracket is found; the exception carries the sampled
        mismatch curve for diagnosis.
    """
    x = np.asarray(x, float)
    if math.hypot(float(x[0]), float(x[1])) >= g.b:
        raise DomainError("x must lie strictly inside the supported disc")
    s_grid = np.linspace(0.0, TWO_PI, scan, endpoint=False)
    m = _direction_mismatch(g, x, s_grid, theta)

    m_next = np.roll(m, -1)
    safe = (np.abs(m) < 0.5 * math.pi) & (np.abs(m_next) < 0.5 * math.pi)
    hits = np.flatnonzero(safe & (m == 0.0))
    if hits.size:
        s0 = float(s_grid[hits[0]])
        return s0, float(level(g, x, s0)), 1.0
    brackets = np.flatnonzero(safe & (m * m_next < 0.0))
    if not brackets.size:
        raise BracketingError(
            "no sign change of the conormal mismatch was bracketed",
            s_samples=s_grid, mismatch=m)

    i = int(brackets[0])
    lo = float(s_grid[i])
    hi = lo + TWO_PI / scan
    m_lo = float(m[i])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        m_mid = float(_direction_mismatch(g, x, mid, theta))
        if m_mid == 0.0:
            lo = hi = mid
            break
        if (m_mid > 0.0) == (m_lo > 0.0):
            lo = mid
            m_lo = m_mid
        else:
            hi = mid
    s0 = float(reduce_angle(0.5 * (lo + hi)))
    return s0, float(level(g, x, s0)), 1.0


def conormal_residual(g, x, theta, s0):
    """Absolute angular mismatch of the found conormal solution."""
    return float(abs(_direction_mismatch(g, np.asarray(x, float), s0, theta)))
