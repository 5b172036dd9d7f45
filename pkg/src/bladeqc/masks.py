"""Binary mask codec and raster analysis for model-predicted masks.

Run-length encoding is row-major with the first run counting background
pixels; width and height travel with the runs so masks are self-describing.
Components are 8-connected (thin diagonal cracks are common in blade
damage). Interior holes are irrelevant downstream — every consumer wraps a
component in an enclosing shape — so contour tracing fills them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import NotFoundError, ValidationError
from .geometry import BitMask, Point2, Polygon

_EIGHT = np.ones((3, 3), dtype=bool)

# offset nudging the duplicate pass through a pinched corner; far below the
# 0.5 px center-to-lattice distance, so rasterization is unaffected
_PINCH_EPS = 1e-6


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask.

    runs alternate background/foreground counts, background first; the run
    list is canonical (no zero-length run except possibly the first, no
    trailing zero) and must sum to width*height.
    """

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"mask dimensions must be >= 1, got {self.width}x{self.height}")
        try:
            runs = tuple(int(r) for r in self.runs)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"run lengths must be integers: {self.runs!r}") from exc
        if any(int(r) != r for r in self.runs) or any(r < 0 for r in runs):
            raise ValidationError("run lengths must be non-negative integers")
        if any(r == 0 for r in runs[1:]):
            raise ValidationError("only the first run may be zero-length")
        total = sum(runs)
        if total != self.width * self.height:
            raise ValidationError(
                f"runs sum to {total}, expected width*height = {self.width * self.height}"
            )
        object.__setattr__(self, "runs", runs)

    def to_wire(self) -> dict:
        return {"width": self.width, "height": self.height, "counts": list(self.runs)}

    @classmethod
    def from_wire(cls, obj: dict) -> "RleMask":
        try:
            return cls(int(obj["width"]), int(obj["height"]), tuple(obj["counts"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed RLE wire form: {obj!r}") from exc

    def foreground_count(self) -> int:
        return sum(self.runs[1::2])

    def foreground_pixels(self) -> np.ndarray:
        """(n, 2) int array of (x, y) foreground pixel coordinates, row-major order.

        Works straight off the runs; the full grid is never materialized.
        """
        bounds = np.cumsum((0,) + self.runs)
        spans = [np.arange(bounds[i], bounds[i + 1]) for i in range(1, len(self.runs), 2)]
        if not spans:
            return np.zeros((0, 2), dtype=np.int64)
        flat = np.concatenate(spans)
        return np.column_stack((flat % self.width, flat // self.width))


def rle_encode(m: BitMask) -> RleMask:
    """Canonical run-length encoding of a mask (unique output per mask)."""
    flat = m.bits.reshape(-1)
    if not flat.any():
        return RleMask(m.width, m.height, (flat.size,))
    changes = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(edges)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return RleMask(m.width, m.height, tuple(int(r) for r in runs))


def rle_decode(r: RleMask) -> BitMask:
    """Expand runs back to a mask; inverse of rle_encode."""
    values = np.zeros(len(r.runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, r.runs)
    return BitMask(r.width, r.height, flat.reshape(r.height, r.width))


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Dense 8-connected component labels; 0 is background."""

    labels: np.ndarray
    component_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def pixels_of(self, label: int) -> np.ndarray:
        """(n, 2) int array of (x, y) pixels carrying the given label."""
        self._check(label)
        ys, xs = np.nonzero(self.labels == label)
        return np.column_stack((xs, ys))

    def _check(self, label: int):
        if not (1 <= label <= self.component_count):
            raise NotFoundError(
                f"label {label} not in 1..{self.component_count}"
            )


def connected_components(m: BitMask) -> ComponentLabeling:
    """Label 8-connected foreground components 1..k in raster-scan order."""
    labels, count = ndimage.label(m.bits, structure=_EIGHT)
    return ComponentLabeling(labels.astype(np.int32), int(count))


def component_corner_points(labeling: ComponentLabeling, label: int) -> list[Point2]:
    """The four lattice corners of every pixel in the component, deduplicated.

    These feed the enclosing-rectangle computation, so rectangles contain
    whole pixels rather than just their centers.
    """
    pixels = labeling.pixels_of(label)
    offs = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=np.int64)
    corners = (pixels[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    corners = np.unique(corners, axis=0)
    return [Point2(float(x), float(y)) for x, y in corners]


def _boundary_loops(region: np.ndarray) -> list[list[tuple[int, int]]]:
    """Closed lattice loops around a filled region, region kept on the left.

    Directed boundary edges are stitched by always taking the sharpest left
    turn, which keeps each loop individually simple; loops may still touch
    at pinched corners (diagonal adjacency).
    """
    h, w = region.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = region
    cells = padded[1:-1, 1:-1]
    up = padded[0:-2, 1:-1]  # neighbor at y-1
    down = padded[2:, 1:-1]  # neighbor at y+1
    left = padded[1:-1, 0:-2]
    right = padded[1:-1, 2:]

    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        edges.setdefault(a, []).append(b)

    ys, xs = np.nonzero(cells & ~up)
    for x, y in zip(xs, ys):  # bottom side, heading +x
        add((x, y), (x + 1, y))
    ys, xs = np.nonzero(cells & ~right)
    for x, y in zip(xs, ys):  # right side, heading +y
        add((x + 1, y), (x + 1, y + 1))
    ys, xs = np.nonzero(cells & ~down)
    for x, y in zip(xs, ys):  # top side, heading -x
        add((x + 1, y + 1), (x, y + 1))
    ys, xs = np.nonzero(cells & ~left)
    for x, y in zip(xs, ys):  # left side, heading -y
        add((x, y + 1), (x, y))

    # left-turn preference relative to incoming direction (dx, dy)
    def pick(prev, cur, options):
        if len(options) == 1:
            return options[0]
        dx, dy = cur[0] - prev[0], cur[1] - prev[1]
        order = [(-dy, dx), (dx, dy), (dy, -dx)]  # left, straight, right

        def rank(nxt):
            step = (nxt[0] - cur[0], nxt[1] - cur[1])
            return order.index(step)

        return min(options, key=rank)

    loops = []
    while edges:
        start = min(edges)
        loop = [start]
        prev = None
        cur = start
        while True:
            options = edges[cur]
            nxt = options[0] if prev is None else pick(prev, cur, options)
            options.remove(nxt)
            if not options:
                del edges[cur]
            if nxt == start:
                break
            loop.append(nxt)
            prev, cur = cur, nxt
        loops.append(loop)
    return loops


def _drop_collinear(loop: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    n = len(loop)
    for i, v in enumerate(loop):
        a = loop[i - 1]
        b = loop[(i + 1) % n]
        if (v[0] - a[0]) * (b[1] - v[1]) != (v[1] - a[1]) * (b[0] - v[0]):
            out.append(v)
    return out


def _splice_loops(loops: list[list]) -> list:
    """Merge loops that touch at shared lattice corners into one simple loop.

    The second pass through a shared corner is offset by _PINCH_EPS along
    the bisector of its adjacent edges, so the merged polygon never visits
    the same point twice.
    """
    loops = [list(lp) for lp in loops]
    main = loops.pop(0)
    while loops:
        merged = False
        for idx, other in enumerate(loops):
            shared = set(main) & set(other)
            if not shared:
                continue
            v = shared.pop()
            i = main.index(v)
            j = other.index(v)
            rotated = other[j:] + other[:j]  # starts at v
            b_next = rotated[1]
            b_prev = rotated[-1]
            ux, uy = b_prev[0] - v[0], b_prev[1] - v[1]
            lu = (ux * ux + uy * uy) ** 0.5
            a_next = main[(i + 1) % len(main)]
            wx, wy = a_next[0] - v[0], a_next[1] - v[1]
            lw = (wx * wx + wy * wy) ** 0.5
            v_off = (
                v[0] + _PINCH_EPS * (ux / lu + wx / lw) / 2,
                v[1] + _PINCH_EPS * (uy / lu + wy / lw) / 2,
            )
            main = main[: i + 1] + rotated[1:] + [v_off] + main[i + 1 :]
            loops.pop(idx)
            merged = True
            break
        if not merged:
            raise ValidationError("component boundary loops do not connect")
    return main


def trace_contour(labeling: ComponentLabeling, label: int) -> Polygon:
    """Closed CCW polygon along the outer pixel boundary of a component.

    Holes are filled first; the re-rasterized contour therefore equals the
    component's filled outer region and is a superset of its pixels.
    """
    labeling._check(label)
    region = ndimage.binary_fill_holes(labeling.labels == label)
    loops = _boundary_loops(region)
    loops = [_drop_collinear(lp) for lp in loops]
    merged = _splice_loops(loops)
    return Polygon(np.asarray(merged, dtype=np.float64))
