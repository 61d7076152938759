"""Analytic reflectivity phantoms on the supported disc, and image grids.

A phantom is a finite sum of shapes: closed indicator sets (disk,
axis-aligned ellipse, rotated rectangle) and smooth gaussian bumps.
Every shape must fit inside the supported disc with a small margin; for
a gaussian the declared support is its 4-sigma disc.

File formats
------------
* phantom: JSON, either ``{"shapes": [...]}`` or a bare list of shape
  objects ``{"kind", "center", <size params>, "amplitude"}``;
* grid: CSV with a literal ``n,extent`` header line, the two values on
  the next line, then ``n`` rows of ``n`` comma-separated samples
  (``values[i][j]`` is the sample at x-index ``i``, y-index ``j``);
* grid: 16-bit binary PGM (big-endian, maxval 65535), values mapped
  affinely onto [0, 65535] with the original min/max recorded in a
  ``<file>.range.txt`` sidecar.

Floats in the text formats are written with 17 significant digits so
round trips are exact.
"""

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, SupportViolationError

# Required clearance between a shape's support and the disc boundary.
SUPPORT_MARGIN = 1e-6

KIND_DISK, KIND_ELLIPSE, KIND_RECT, KIND_GAUSS = 0, 1, 2, 3


def format_float(x):
    """Render a float with 17 significant digits (exact round trip)."""
    return format(float(x), ".17g")


def _rotated_point(theta, p):
    c, s = math.cos(theta), math.sin(theta)
    return (c * p[0] - s * p[1], s * p[0] + c * p[1])


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float
    amplitude: float = 1.0

    indicator = True
    kind = "disk"

    def contains_xy(self, x, y):
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius

    def value_xy(self, x, y):
        return np.where(self.contains_xy(x, y), self.amplitude, 0.0)

    def boundary_gap_xy(self, x, y):
        """Signed boundary function: negative inside, positive outside."""
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        return dx * dx + dy * dy - self.radius * self.radius

    def support_max_norm(self):
        return math.hypot(*self.center) + self.radius

    def rotated(self, theta):
        return replace(self, center=_rotated_point(theta, self.center))

    def table_row(self):
        r = self.radius
        return [KIND_DISK, self.center[0], self.center[1], r, r * r, 0.0, 0.0,
                self.amplitude]

    def to_dict(self):
        return {"kind": "disk", "center": list(self.center),
                "radius": self.radius, "amplitude": self.amplitude}


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned filled ellipse with semi-axes ``radii = (rx, ry)``."""

    center: tuple
    radii: tuple
    amplitude: float = 1.0

    indicator = True
    kind = "ellipse"

    def _inv_sq(self):
        rx, ry = self.radii
        return 1.0 / (rx * rx), 1.0 / (ry * ry)

    def contains_xy(self, x, y):
        ix, iy = self._inv_sq()
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        return dx * dx * ix + dy * dy * iy <= 1.0

    def value_xy(self, x, y):
        return np.where(self.contains_xy(x, y), self.amplitude, 0.0)

    def boundary_gap_xy(self, x, y):
        ix, iy = self._inv_sq()
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        return dx * dx * ix + dy * dy * iy - 1.0

    def support_max_norm(self):
        # numeric max of |x| over the boundary; dense sampling is plenty
        # accurate against the 1e-6 support margin
        t = np.linspace(0.0, 2.0 * math.pi, 1 << 16, endpoint=False)
        px = self.center[0] + self.radii[0] * np.cos(t)
        py = self.center[1] + self.radii[1] * np.sin(t)
        return float(np.max(np.hypot(px, py)))

    def rotated(self, theta):
        raise ConfigurationError(
            "axis-aligned ellipse cannot represent a rotated copy")

    def table_row(self):
        rx, ry = self.radii
        return [KIND_ELLIPSE, self.center[0], self.center[1], rx, ry,
                1.0 / (rx * rx), 1.0 / (ry * ry), self.amplitude]

    def to_dict(self):
        return {"kind": "ellipse", "center": list(self.center),
                "radii": list(self.radii), "amplitude": self.amplitude}


@dataclass(frozen=True)
class Rect:
    """Filled rectangle with half-widths (hx, hy), rotated by ``angle``."""

    center: tuple
    half_widths: tuple
    angle: float = 0.0
    amplitude: float = 1.0

    indicator = True
    kind = "rect"

    def _local(self, x, y):
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        return c * dx + s * dy, -s * dx + c * dy

    def contains_xy(self, x, y):
        u, v = self._local(x, y)
        hx, hy = self.half_widths
        return (np.abs(u) <= hx) & (np.abs(v) <= hy)

    def value_xy(self, x, y):
        return np.where(self.contains_xy(x, y), self.amplitude, 0.0)

    def boundary_gap_xy(self, x, y):
        u, v = self._local(x, y)
        hx, hy = self.half_widths
        return np.maximum(np.abs(u) / hx, np.abs(v) / hy) - 1.0

    def support_max_norm(self):
        hx, hy = self.half_widths
        corners = [(sx * hx, sy * hy) for sx in (-1, 1) for sy in (-1, 1)]
        norms = [math.hypot(self.center[0] + p[0], self.center[1] + p[1])
                 for p in (_rotated_point(self.angle, c) for c in corners)]
        return max(norms)

    def rotated(self, theta):
        return replace(self, center=_rotated_point(theta, self.center),
                       angle=self.angle + theta)

    def table_row(self):
        hx, hy = self.half_widths
        return [KIND_RECT, self.center[0], self.center[1], hx, hy,
                math.cos(self.angle), math.sin(self.angle), self.amplitude]

    def to_dict(self):
        return {"kind": "rect", "center": list(self.center),
                "half_widths": list(self.half_widths), "angle": self.angle,
                "amplitude": self.amplitude}


@dataclass(frozen=True)
class GaussianBump:
    """Smooth bump ``amplitude * exp(-|x - center|^2 / (2 sigma^2))``.

    The declared support for validation purposes is the 4-sigma disc.
    """

    center: tuple
    sigma: float
    amplitude: float = 1.0

    indicator = False
    kind = "gauss"

    def value_xy(self, x, y):
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        # same factored form as the kernel backends, so evaluations agree
        # bitwise across code paths
        return self.amplitude * np.exp(
            (dx * dx + dy * dy) * (-1.0 / (2.0 * self.sigma * self.sigma)))

    def support_max_norm(self):
        return math.hypot(*self.center) + 4.0 * self.sigma

    def rotated(self, theta):
        return replace(self, center=_rotated_point(theta, self.center))

    def table_row(self):
        s = self.sigma
        return [KIND_GAUSS, self.center[0], self.center[1], s,
                -1.0 / (2.0 * s * s), 0.0, 0.0, self.amplitude]

    def to_dict(self):
        return {"kind": "gauss", "center": list(self.center),
                "sigma": self.sigma, "amplitude": self.amplitude}


_SHAPE_KINDS = {"disk": Disk, "ellipse": Ellipse, "rect": Rect,
                "gauss": GaussianBump}


def shape_from_dict(d):
    try:
        kind = d["kind"]
    except (TypeError, KeyError):
        raise ConfigurationError(f"shape entry without a 'kind': {d!r}")
    if kind not in _SHAPE_KINDS:
        raise ConfigurationError(
            f"unknown shape kind {kind!r}; expected one of {sorted(_SHAPE_KINDS)}")
    d = dict(d)
    d.pop("kind")
    try:
        center = tuple(float(c) for c in d.pop("center"))
        if kind == "disk":
            return Disk(center, float(d.pop("radius")),
                        float(d.pop("amplitude", 1.0)))
        if kind == "ellipse":
            return Ellipse(center, tuple(float(r) for r in d.pop("radii")),
                           float(d.pop("amplitude", 1.0)))
        if kind == "rect":
            return Rect(center, tuple(float(h) for h in d.pop("half_widths")),
                        float(d.pop("angle", 0.0)),
                        float(d.pop("amplitude", 1.0)))
        return GaussianBump(center, float(d.pop("sigma")),
                            float(d.pop("amplitude", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed {kind} shape: {exc}") from exc


@dataclass(frozen=True)
class Phantom:
    """A reflectivity function given as a sum of analytic shapes."""

    shapes: tuple = ()

    def rotated(self, theta):
        """The phantom rotated counterclockwise by ``theta``."""
        return Phantom(tuple(sh.rotated(theta) for sh in self.shapes))

    def to_dict(self):
        return {"shapes": [sh.to_dict() for sh in self.shapes]}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, dict):
            entries = d.get("shapes", [])
        else:
            entries = d
        return cls(tuple(shape_from_dict(e) for e in entries))


def evaluate_xy(p, x, y):
    """Phantom value at coordinate arrays ``x``, ``y`` (sum over shapes)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    out = np.zeros(np.broadcast(x, y).shape)
    for sh in p.shapes:
        out += sh.value_xy(x, y)
    return out


def evaluate(p, x):
    """Phantom value at a point or array of points of shape (..., 2)."""
    x = np.asarray(x, float)
    res = evaluate_xy(p, x[..., 0], x[..., 1])
    return float(res) if res.ndim == 0 else res


def shape_table(p):
    """Flat (n_shapes, 8) float encoding consumed by the kernel backends."""
    if not p.shapes:
        return np.zeros((0, 8))
    return np.asarray([sh.table_row() for sh in p.shapes], dtype=float)


@dataclass(frozen=True)
class SupportEntry:
    index: int
    kind: str
    max_norm: float
    bound: float

    @property
    def margin(self):
        return self.bound - self.max_norm

    @property
    def ok(self):
        return self.margin >= SUPPORT_MARGIN


@dataclass(frozen=True)
class SupportReport:
    bound: float
    entries: tuple

    @property
    def passed(self):
        return all(e.ok for e in self.entries)

    def failing_indices(self):
        return [e.index for e in self.entries if not e.ok]


def validate_support(p, g):
    """Report each shape's maximum |x| over its support against the disc.

    ``g`` may be a ScanGeometry (bound ``g.b``) or a plain radius.
    """
    bound = float(getattr(g, "b", g))
    entries = tuple(
        SupportEntry(i, sh.kind, sh.support_max_norm(), bound)
        for i, sh in enumerate(p.shapes))
    return SupportReport(bound, entries)


@dataclass
class ImageGrid:
    """Samples of a function on the square [-extent, extent]^2.

    ``values[i, j]`` is the sample at the pixel center ``(x_i, y_j)`` with
    ``x_i = -extent + (i + 0.5) * pixel_size``.  When paired with a scan
    geometry the extent equals the disc radius ``b``.
    """

    n: int
    extent: float
    values: np.ndarray

    @property
    def pixel_size(self):
        return 2.0 * self.extent / self.n

    def centers(self):
        h = self.pixel_size
        return -self.extent + (np.arange(self.n) + 0.5) * h

    def meshgrid(self):
        c = self.centers()
        return np.meshgrid(c, c, indexing="ij")

    def center_of(self, i, j):
        c = self.centers()
        return float(c[i]), float(c[j])

    def index_of(self, x, y):
        h = self.pixel_size
        i = int(round((x + self.extent) / h - 0.5))
        j = int(round((y + self.extent) / h - 0.5))
        return i, j


def rasterize(p, n, extent, supersample=False):
    """Sample the phantom at pixel centers of an n-by-n grid.

    With ``supersample`` set, pixels straddling an indicator boundary are
    resolved by a 4x4 subsample average instead of the center value;
    smooth (gaussian) contributions always use the center sample, so the
    two modes differ only on boundary-adjacent pixels.

    Raises
    ------
    SupportViolationError
        If a shape escapes the disc of radius ``extent``, naming the
        first offending shape index.
    """
    report = validate_support(p, extent)
    if not report.passed:
        bad = report.failing_indices()
        raise SupportViolationError(
            f"shape {bad[0]} escapes the supported disc "
            f"(max |x| = {report.entries[bad[0]].max_norm:.6g}, "
            f"bound {report.bound:.6g})", shape_index=bad[0])

    n = int(n)
    grid = ImageGrid(n, float(extent), np.zeros((n, n)))
    X, Y = grid.meshgrid()
    h = grid.pixel_size
    vals = np.zeros((n, n))

    for sh in p.shapes:
        if not sh.indicator:
            vals += sh.value_xy(X, Y)
            continue
        inside = sh.contains_xy(X, Y)
        coverage = inside.astype(float)
        if supersample:
            # corner membership vote marks pixels that straddle the boundary
            edges = -extent + np.arange(n + 1) * h
            CX, CY = np.meshgrid(edges, edges, indexing="ij")
            corner = sh.contains_xy(CX, CY)
            votes = (corner[:-1, :-1].astype(int) + corner[1:, :-1] +
                     corner[:-1, 1:] + corner[1:, 1:] + inside)
            boundary = (votes > 0) & (votes < 5)
            bi, bj = np.nonzero(boundary)
            if bi.size:
                offs = (np.arange(4) + 0.5) / 4.0 * h
                sub = np.zeros(bi.size)
                for ox in offs:
                    for oy in offs:
                        sub += sh.contains_xy(X[bi, bj] - 0.5 * h + ox,
                                              Y[bi, bj] - 0.5 * h + oy)
                coverage[bi, bj] = sub / 16.0
        vals += sh.amplitude * coverage

    grid.values = vals
    return grid


def canonical_phantoms(g):
    """The fixed phantom set used across the test and acceptance suites.

    Sizes scale with the disc radius ``b`` so the same set works for any
    scan half-separation.
    """
    b = g.b
    return {
        "centered_disk": Phantom((Disk((0.0, 0.0), 0.45 * b, 1.0),)),
        "offset_disk": Phantom((Disk((0.25 * b, -0.15 * b), 0.30 * b, 1.0),)),
        "two_disks": Phantom((
            Disk((-0.35 * b, 0.10 * b), 0.28 * b, 1.0),
            Disk((0.40 * b, -0.20 * b), 0.20 * b, 0.6),
        )),
        "gaussian_bump": Phantom((GaussianBump((0.0, 0.0), b / 8.0, 1.0),)),
    }


# ---------------------------------------------------------------------------
# file formats


def save_phantom(p, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(p.to_dict(), fh, indent=2)
        fh.write("\n")


def load_phantom(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid phantom JSON: {exc}") from exc
    return Phantom.from_dict(data)


def write_grid_csv(grid, path):
    lines = ["n,extent", f"{grid.n},{format_float(grid.extent)}"]
    for i in range(grid.n):
        lines.append(",".join(format_float(v) for v in grid.values[i]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "n,extent":
        raise ConfigurationError(
            f"{path}: expected a literal 'n,extent' header line")
    try:
        n_str, ext_str = lines[1].split(",")
        n = int(n_str)
        extent = float(ext_str)
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"{path}: malformed size line") from exc
    if len(lines) != n + 2:
        raise ConfigurationError(
            f"{path}: expected {n} data rows, found {len(lines) - 2}")
    values = np.asarray([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    if values.shape != (n, n):
        raise ConfigurationError(f"{path}: data is not {n}x{n}")
    return ImageGrid(n, extent, values)


def write_grid_pgm(grid, path):
    """Write a 16-bit PGM plus a ``<path>.range.txt`` min/max sidecar.

    PGM rasters run top row first, so image rows are y slices in
    decreasing y and columns are increasing x.
    """
    vmin = float(np.min(grid.values))
    vmax = float(np.max(grid.values))
    span = vmax - vmin
    if span <= 0.0:
        scaled = np.zeros_like(grid.values)
    else:
        scaled = (grid.values - vmin) / span * 65535.0
    raster = np.rint(scaled.T[::-1, :]).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.n} {grid.n}\n65535\n".encode("ascii"))
        fh.write(raster.tobytes())
    with open(f"{path}.range.txt", "w", encoding="utf-8") as fh:
        fh.write(f"min={format_float(vmin)}\nmax={format_float(vmax)}\n")
