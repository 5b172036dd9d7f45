"""Planar geometry on the image pixel grid.

All coordinates are pixels in the image frame they were captured in; the
canonical persisted frame is the full camera resolution. Overlap between
regions is always measured on the pixel grid: a pixel (i, j) belongs to a
polygon iff its center (i+0.5, j+0.5) lies inside by the even-odd rule,
with centers exactly on an edge counting as inside. Exact convex clipping
exists alongside as a cross-check for the rasterized IoU.

Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import GeometryError

# distance (px) under which a pixel center counts as lying on an edge
_ON_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class Point2:
    """A point in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class AxisAlignedBox:
    """Axis-aligned bounding box, corners in pixels."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(
                f"degenerate box [{self.x_min},{self.x_max}]x[{self.y_min},{self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


def _as_coord_array(vertices) -> np.ndarray:
    arr = np.asarray(
        [(v.x, v.y) if isinstance(v, Point2) else tuple(v) for v in vertices],
        dtype=np.float64,
    )
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError("vertices must be a sequence of (x, y) pairs")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("vertex coordinates must be finite")
    return arr


def _signed_area(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _is_simple(coords: np.ndarray) -> bool:
    """True iff no two edges intersect except adjacent edges at their shared vertex."""
    n = len(coords)
    a = coords
    b = np.roll(coords, -1, axis=0)

    # adjacent edges: reject a collinear fold-back (spike retracing the previous edge)
    for i in range(n):
        j = (i + 1) % n
        cr = _cross(a[i, 0], a[i, 1], b[i, 0], b[i, 1], b[j, 0], b[j, 1])
        if cr == 0.0:
            back = (b[i] - a[i]) @ (b[j] - b[i])
            if back < 0.0:
                return False

    if n < 4:
        return True

    ax, ay = a[:, 0], a[:, 1]
    bx, by = b[:, 0], b[:, 1]
    d1 = _cross(ax[:, None], ay[:, None], bx[:, None], by[:, None], ax[None, :], ay[None, :])
    d2 = _cross(ax[:, None], ay[:, None], bx[:, None], by[:, None], bx[None, :], by[None, :])
    d3 = d1.T
    d4 = d2.T
    crossing = (d1 * d2 <= 0) & (d3 * d4 <= 0)

    # fully collinear pairs intersect only if their 1-D spans overlap
    collinear = (d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0)
    if collinear.any():
        lox = np.minimum(ax, bx)
        hix = np.maximum(ax, bx)
        loy = np.minimum(ay, by)
        hiy = np.maximum(ay, by)
        span = (
            (lox[:, None] <= hix[None, :])
            & (lox[None, :] <= hix[:, None])
            & (loy[:, None] <= hiy[None, :])
            & (loy[None, :] <= hiy[:, None])
        )
        crossing = np.where(collinear, span, crossing)

    idx = np.arange(n)
    nonadjacent = np.abs(idx[:, None] - idx[None, :]) >= 2
    nonadjacent &= np.abs(idx[:, None] - idx[None, :]) != n - 1
    return not bool(np.any(crossing & nonadjacent & (idx[:, None] < idx[None, :])))


class Polygon:
    """Simple polygon with positive area, canonicalized to counter-clockwise order.

    Construction rejects self-intersection and consecutive duplicate vertices
    rather than repairing them; the original starting vertex is preserved.
    """

    __slots__ = ("_coords",)

    def __init__(self, vertices, *, _trusted: bool = False):
        coords = vertices if isinstance(vertices, np.ndarray) else _as_coord_array(vertices)
        coords = np.array(coords, dtype=np.float64, copy=True)
        if len(coords) < 3:
            raise GeometryError(f"polygon needs at least 3 vertices, got {len(coords)}")
        if not _trusted:
            if not np.all(np.isfinite(coords)):
                raise GeometryError("vertex coordinates must be finite")
            dup = np.all(coords == np.roll(coords, -1, axis=0), axis=1)
            if dup.any():
                raise GeometryError("consecutive duplicate vertices are not allowed")
        signed = _signed_area(coords)
        if signed == 0.0:
            raise GeometryError("polygon area must be positive")
        if signed < 0.0:
            coords = coords[::-1].copy()
        if not _trusted and not _is_simple(coords):
            raise GeometryError("polygon must be simple (no self-intersection)")
        coords.setflags(write=False)
        self._coords = coords

    @property
    def coords(self) -> np.ndarray:
        """(n, 2) float64 array of vertices, counter-clockwise. Read-only."""
        return self._coords

    @property
    def vertices(self) -> tuple[Point2, ...]:
        return tuple(Point2(float(x), float(y)) for x, y in self._coords)

    def __len__(self) -> int:
        return len(self._coords)

    def __repr__(self) -> str:
        return f"Polygon({self._coords.tolist()!r})"

    def to_flat(self) -> list[float]:
        """Serialize as the wire form [x0, y0, x1, y1, ...]."""
        return [float(v) for v in self._coords.reshape(-1)]

    @classmethod
    def from_flat(cls, values) -> "Polygon":
        flat = np.asarray(list(values), dtype=np.float64)
        if flat.size < 6 or flat.size % 2 != 0:
            raise GeometryError(f"flat coordinate list needs an even count >= 6, got {flat.size}")
        return cls(flat.reshape(-1, 2))


class RotatedRect:
    """Rectangle at arbitrary orientation, stored as 4 corners in CCW order.

    Corners are canonicalized to start at the lexicographically smallest
    (x, y) corner. width runs along `angle_deg` (in [0, 90)), height along
    the perpendicular.
    """

    __slots__ = ("_corners",)

    _REL_TOL = 1e-9

    def __init__(self, corners):
        arr = corners if isinstance(corners, np.ndarray) else _as_coord_array(corners)
        arr = np.array(arr, dtype=np.float64, copy=True)
        if arr.shape != (4, 2):
            raise GeometryError(f"a rotated rectangle needs exactly 4 corners, got {arr.shape}")
        if _signed_area(arr) < 0:
            arr = arr[::-1].copy()
        sides = np.roll(arr, -1, axis=0) - arr
        lengths = np.hypot(sides[:, 0], sides[:, 1])
        scale = float(lengths.max())
        if scale == 0.0 or float(lengths.min()) == 0.0:
            raise GeometryError("rectangle has a zero-length side")
        tol = self._REL_TOL * scale
        if abs(lengths[0] - lengths[2]) > tol or abs(lengths[1] - lengths[3]) > tol:
            raise GeometryError("opposite rectangle sides must be equal length")
        for i in range(2):
            c = abs(
                float(sides[i, 0] * sides[i + 2, 1] - sides[i, 1] * sides[i + 2, 0])
            ) / (lengths[i] * lengths[i + 2])
            if c > self._REL_TOL:
                raise GeometryError("opposite rectangle sides must be parallel")
        d = abs(float(sides[0] @ sides[1])) / (lengths[0] * lengths[1])
        if d > 1e-7:
            raise GeometryError("adjacent rectangle sides must be perpendicular")
        start = int(np.lexsort((arr[:, 1], arr[:, 0]))[0])
        arr = np.roll(arr, -start, axis=0)
        arr.setflags(write=False)
        self._corners = arr

    @property
    def corners(self) -> np.ndarray:
        """(4, 2) float64 corner array, CCW, canonical start. Read-only."""
        return self._corners

    @property
    def corner_points(self) -> tuple[Point2, ...]:
        return tuple(Point2(float(x), float(y)) for x, y in self._corners)

    @property
    def center(self) -> Point2:
        cx, cy = self._corners.mean(axis=0)
        return Point2(float(cx), float(cy))

    def _oriented(self) -> tuple[float, float, float]:
        s0 = self._corners[1] - self._corners[0]
        s1 = self._corners[2] - self._corners[1]
        l0 = float(np.hypot(*s0))
        l1 = float(np.hypot(*s1))
        theta = math.degrees(math.atan2(s0[1], s0[0])) % 180.0
        if theta < 90.0:
            return theta, l0, l1
        return theta - 90.0, l1, l0

    @property
    def angle_deg(self) -> float:
        """Orientation of the width side, degrees in [0, 90)."""
        return self._oriented()[0]

    @property
    def width(self) -> float:
        return self._oriented()[1]

    @property
    def height(self) -> float:
        return self._oriented()[2]

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_polygon(self) -> Polygon:
        return Polygon(self._corners)

    def to_flat(self) -> list[float]:
        return [float(v) for v in self._corners.reshape(-1)]

    @classmethod
    def from_flat(cls, values) -> "RotatedRect":
        flat = np.asarray(list(values), dtype=np.float64)
        if flat.size != 8:
            raise GeometryError(f"rectangle wire form needs 8 values, got {flat.size}")
        return cls(flat.reshape(4, 2))

    def contains_points(self, points, tol: float = 1e-6) -> bool:
        """True iff every point lies inside or on the rectangle within tol px."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        c0 = self._corners[0]
        u = self._corners[1] - c0
        v = self._corners[3] - c0
        lu = float(np.hypot(*u))
        lv = float(np.hypot(*v))
        pu = (pts - c0) @ (u / lu)
        pv = (pts - c0) @ (v / lv)
        return bool(
            np.all((pu >= -tol) & (pu <= lu + tol) & (pv >= -tol) & (pv <= lv + tol))
        )

    def __repr__(self) -> str:
        return f"RotatedRect({self._corners.tolist()!r})"


@dataclass
class BitMask:
    """Binary mask over a width x height pixel grid, row-major."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"mask dimensions must be >= 1, got {self.width}x{self.height}")
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise GeometryError(
                f"bit grid shape {bits.shape} does not match {self.width}x{self.height}"
            )
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )

    __hash__ = None


def area(p: Polygon) -> float:
    """Unsigned polygon area in px^2 (shoelace)."""
    return abs(_signed_area(p.coords))


def aabb(p: Polygon) -> AxisAlignedBox:
    """Smallest axis-aligned box containing all vertices."""
    x_min, y_min = p.coords.min(axis=0)
    x_max, y_max = p.coords.max(axis=0)
    return AxisAlignedBox(float(x_min), float(y_min), float(x_max), float(y_max))


def convex_hull(points) -> Polygon:
    """Convex hull of >= 3 non-collinear points (monotone chain), CCW.

    Collinear points interior to hull edges are dropped, so hull vertices
    are in strictly convex position.
    """
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
            raise GeometryError("points must be a finite (n, 2) array")
    else:
        arr = _as_coord_array(points)
    pts = np.unique(arr, axis=0)
    if len(pts) < 3:
        raise GeometryError("convex hull needs at least 3 distinct points")

    def half(seq):
        out = []
        for px, py in seq:
            while len(out) >= 2 and _cross(out[-2][0], out[-2][1], out[-1][0], out[-1][1], px, py) <= 0:
                out.pop()
            out.append((px, py))
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise GeometryError("all points are collinear; no 2-D hull exists")
    return Polygon(np.asarray(hull, dtype=np.float64), _trusted=True)


def min_area_rect(p: Polygon) -> RotatedRect:
    """Minimum-area enclosing rectangle via rotating calipers over the hull.

    One rectangle side is collinear with a hull edge; on ties the first such
    edge in hull order wins, making the result deterministic.
    """
    hull = convex_hull(p.coords)
    v = hull.coords
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    u = edges / lengths[:, None]
    w = np.column_stack((-u[:, 1], u[:, 0]))

    proj_u = v @ u.T  # (points, edges)
    proj_w = v @ w.T
    umin, umax = proj_u.min(axis=0), proj_u.max(axis=0)
    wmin, wmax = proj_w.min(axis=0), proj_w.max(axis=0)
    areas = (umax - umin) * (wmax - wmin)
    k = int(np.argmin(areas))

    uk, wk = u[k], w[k]
    corners = np.array(
        [
            umin[k] * uk + wmin[k] * wk,
            umax[k] * uk + wmin[k] * wk,
            umax[k] * uk + wmax[k] * wk,
            umin[k] * uk + wmax[k] * wk,
        ]
    )
    return RotatedRect(corners)


def _centers_inside(coords: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd test of pixel centers (xs x ys grid) against a polygon.

    Returns a (len(ys), len(xs)) boolean array. Centers within _ON_EDGE_TOL
    of an edge count as inside regardless of parity.
    """
    xc = xs[None, :]
    yc = ys[:, None]
    crossings = np.zeros((len(ys), len(xs)), dtype=np.int32)
    on_edge = np.zeros((len(ys), len(xs)), dtype=bool)
    nxt = np.roll(coords, -1, axis=0)
    for (x1, y1), (x2, y2) in zip(coords, nxt):
        spans = (y1 > yc) != (y2 > yc)
        if spans.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (yc - y1) * (x2 - x1) / (y2 - y1)
            crossings += spans & (xc < xint)
        ex, ey = x2 - x1, y2 - y1
        seg2 = ex * ex + ey * ey
        seg = math.sqrt(seg2)
        t = (xc - x1) * ex + (yc - y1) * ey
        d = (xc - x1) * ey - (yc - y1) * ex
        on_edge |= (
            (d * d <= (_ON_EDGE_TOL * _ON_EDGE_TOL) * seg2)
            & (t >= -_ON_EDGE_TOL * seg)
            & (t <= seg2 + _ON_EDGE_TOL * seg)
        )
    return (crossings % 2 == 1) | on_edge


def _raster_window(coords: np.ndarray, width: int, height: int):
    """Rasterize into the polygon's bounding window only.

    Returns (i0, j0, bits) where bits[j - j0, i - i0] is pixel (i, j). The
    grid is absolute: centers are evaluated at (i+0.5, j+0.5) so windowed
    and full-frame rasterization agree bit for bit.
    """
    x_min, y_min = coords.min(axis=0)
    x_max, y_max = coords.max(axis=0)
    i0 = max(0, int(math.floor(x_min - 0.5)) - 1)
    i1 = min(width - 1, int(math.ceil(x_max)) + 1)
    j0 = max(0, int(math.floor(y_min - 0.5)) - 1)
    j1 = min(height - 1, int(math.ceil(y_max)) + 1)
    if i1 < i0 or j1 < j0:
        return 0, 0, np.zeros((0, 0), dtype=bool)
    xs = np.arange(i0, i1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(j0, j1 + 1, dtype=np.float64) + 0.5
    return i0, j0, _centers_inside(coords, xs, ys)


def _check_in_frame(p: Polygon, width: int, height: int):
    box = aabb(p)
    if box.x_min < 0 or box.y_min < 0 or box.x_max > width or box.y_max > height:
        raise GeometryError(
            f"polygon bounds [{box.x_min},{box.x_max}]x[{box.y_min},{box.y_max}] "
            f"exceed the {width}x{height} frame"
        )


def rasterize(p: Polygon, width: int, height: int) -> BitMask:
    """Rasterize a polygon onto a width x height grid.

    Pixel (i, j) is set iff its center (i+0.5, j+0.5) is inside by the
    even-odd rule; centers exactly on an edge are inside. Deterministic:
    equal inputs give bit-identical masks.
    """
    if int(width) != width or int(height) != height or width < 1 or height < 1:
        raise GeometryError(f"frame dimensions must be positive integers, got {width}x{height}")
    _check_in_frame(p, width, height)
    bits = np.zeros((height, width), dtype=bool)
    i0, j0, win = _raster_window(p.coords, width, height)
    if win.size:
        bits[j0 : j0 + win.shape[0], i0 : i0 + win.shape[1]] = win
    return BitMask(int(width), int(height), bits)


def iou(a: Polygon, b: Polygon, frame: tuple[int, int]) -> float:
    """Pixel-grid IoU of two polygons within a (width, height) frame.

    Equals |rasterize(a) AND rasterize(b)| / |rasterize(a) OR rasterize(b)|;
    0.0 when the union covers no pixel centers. Symmetric.
    """
    width, height = frame
    _check_in_frame(a, width, height)
    _check_in_frame(b, width, height)
    ia, ja, wa = _raster_window(a.coords, width, height)
    ib, jb, wb = _raster_window(b.coords, width, height)
    ca, cb = int(wa.sum()), int(wb.sum())
    if ca + cb == 0:
        return 0.0
    # intersection only exists where the two windows overlap
    i_lo, i_hi = max(ia, ib), min(ia + wa.shape[1], ib + wb.shape[1])
    j_lo, j_hi = max(ja, jb), min(ja + wa.shape[0], jb + wb.shape[0])
    inter = 0
    if i_lo < i_hi and j_lo < j_hi:
        sub_a = wa[j_lo - ja : j_hi - ja, i_lo - ia : i_hi - ia]
        sub_b = wb[j_lo - jb : j_hi - jb, i_lo - ib : i_hi - ib]
        inter = int((sub_a & sub_b).sum())
    union = ca + cb - inter
    if union == 0:
        return 0.0
    return inter / union


def _is_convex(coords: np.ndarray) -> bool:
    edges = np.roll(coords, -1, axis=0) - coords
    nxt = np.roll(edges, -1, axis=0)
    crosses = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    scale = float(np.abs(edges).max())
    return bool(np.all(crosses >= -1e-9 * scale * scale))


def convex_intersection_area(a: Polygon, b: Polygon) -> float:
    """Exact area of the intersection of two convex polygons (half-plane clipping)."""
    for name, p in (("first", a), ("second", b)):
        if not _is_convex(p.coords):
            raise GeometryError(f"{name} polygon is not convex")
    output = [tuple(v) for v in a.coords]
    clip = b.coords
    n = len(clip)
    for k in range(n):
        if not output:
            return 0.0
        cx1, cy1 = clip[k]
        cx2, cy2 = clip[(k + 1) % n]
        inp = output
        output = []
        sx, sy = inp[-1]
        s_in = _cross(cx1, cy1, cx2, cy2, sx, sy) >= 0
        for ex, ey in inp:
            e_in = _cross(cx1, cy1, cx2, cy2, ex, ey) >= 0
            if e_in != s_in:
                dcx, dcy = cx1 - cx2, cy1 - cy2
                dpx, dpy = sx - ex, sy - ey
                n1 = cx1 * cy2 - cy1 * cx2
                n2 = sx * ey - sy * ex
                den = dcx * dpy - dcy * dpx
                output.append(((n1 * dpx - n2 * dcx) / den, (n1 * dpy - n2 * dcy) / den))
            if e_in:
                output.append((ex, ey))
            sx, sy, s_in = ex, ey, e_in
    if len(output) < 3:
        return 0.0
    arr = np.asarray(output, dtype=np.float64)
    return abs(_signed_area(arr))
