"""Binary-image geometry: closing, components, contours, hulls, defects.

Contours are traced with the foreground on the walker's left, which in
``(row, col)`` coordinates gives a positive shoelace area; with
``cross(u, v) = u_r * v_c - u_c * v_r`` a left turn is a positive cross
product. The convex hull uses the same convention, so hull order and
contour order agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np


def make_ellipse_kernel(m: int) -> np.ndarray:
    """Boolean ``m x m`` disc stencil ``(r-h)**2 + (c-h)**2 <= (h + 1/4)**2``
    with ``h = (m-1)/2``.

    m=1 is a single pixel and m=3 the 3x3 cross. A radius of exactly ``h``
    leaves one-pixel spikes at the four extremes (m=5 becomes a diamond);
    the extra quarter pixel rounds them off without admitting the corners
    of the 3x3 case. The stencil is invariant under 90 degree rotations and
    reflections, which keeps closing rotation-equivariant.
    """
    if not isinstance(m, (int, np.integer)) or m < 1 or m % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {m!r}")
    h = (m - 1) // 2
    rr, cc = np.mgrid[:m, :m]
    return 16 * ((rr - h) ** 2 + (cc - h) ** 2) <= (4 * h + 1) ** 2


def close(mask: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Morphological closing (dilate, then erode) with the image embedded in
    an infinite background plane.

    The mask is padded by the kernel radius so the dilation is never cut
    off at the border; the result is therefore extensive and idempotent.
    """
    mask = np.asarray(mask, dtype=bool)
    kernel = np.asarray(kernel, dtype=bool)
    h = kernel.shape[0] // 2
    if h == 0 or not mask.any():
        return mask.copy()
    k8 = kernel.view(np.uint8)
    padded = np.pad(mask.view(np.uint8), h)
    grown = cv2.dilate(padded, k8)
    shrunk = cv2.erode(grown, k8)
    return shrunk[h:-h, h:-h].astype(bool)


@dataclass(frozen=True)
class Component:
    """One 8-connected foreground blob.

    ``mask`` is the blob cropped to its bounding box; ``pixels`` lists its
    ``(row, col)`` coordinates in raster order.
    """

    label: int
    bbox: tuple[int, int, int, int]  # min_row, min_col, max_row, max_col
    mask: np.ndarray = field(repr=False)

    @property
    def origin(self) -> tuple[int, int]:
        return self.bbox[0], self.bbox[1]

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def pixels(self) -> np.ndarray:
        rr, cc = np.nonzero(self.mask)
        return np.column_stack((rr + self.bbox[0], cc + self.bbox[1]))


def connected_components(mask: np.ndarray, min_area: int = 32) -> list[Component]:
    """8-connected components with at least ``min_area`` pixels.

    Output order is by bounding-box ``(min_row, min_col)`` and then by the
    column of the first pixel in raster order, so it does not depend on
    labeling internals. ``label`` is the position in that order.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return []
    n, labels, stats, _ = cv2.connectedComponentsWithStatsWithAlgorithm(
        mask.view(np.uint8), 8, cv2.CV_32S, cv2.CCL_GRANA
    )
    found = []
    for lab in range(1, n):
        x, y, w, h, area = (int(v) for v in stats[lab])
        if area < min_area:
            continue
        local = labels[y:y + h, x:x + w] == lab
        first_col = x + int(np.argmax(local[0]))
        found.append(((y, x, first_col), (y, x, y + h - 1, x + w - 1), local))
    found.sort(key=lambda item: item[0])
    return [Component(i, bbox, local) for i, (_, bbox, local) in enumerate(found)]


@dataclass(frozen=True)
class Contour:
    """Closed outer boundary as an ``(n, 2)`` int array of ``(row, col)``.

    A pixel on a one-pixel-wide part is listed once per passage of the
    boundary walk, so consecutive points are always 8-adjacent.
    """

    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def distinct(self) -> np.ndarray:
        """Points with repeat visits removed, keeping first-visit order."""
        _, first = np.unique(self.points, axis=0, return_index=True)
        return self.points[np.sort(first)]


# Crack-following tables for directions S, E, N, W (a left turn is d + 1).
# Offsets are relative to the current lattice corner, expressed as flat
# indices into the padded pixel grid of row stride W.
def _tables(stride: int):
    step = (stride, 1, -stride, -1)
    front_left = (0, -stride, -stride - 1, -1)
    front_right = (-1, 0, -stride, -stride - 1)
    return step, front_left, front_right


def trace_contour(component: Component, mask_dims: tuple[int, int] | None = None) -> Contour:
    """Outer boundary of ``component``, counter-clockwise on screen, starting
    at its first pixel in raster order. Holes are ignored.

    The walk follows pixel edges with the foreground kept on the left and
    8-connectivity for the foreground; each step's left pixel is emitted
    and immediate repeats are collapsed.
    """
    local = component.mask
    if mask_dims is not None:
        r1, c1 = component.bbox[2], component.bbox[3]
        if r1 >= mask_dims[0] or c1 >= mask_dims[1]:
            raise ValueError("component lies outside the given mask dimensions")
    h, w = local.shape
    stride = w + 2
    grid = np.zeros((h + 2, stride), dtype=np.uint8)
    grid[1:-1, 1:-1] = local
    flat = grid.ravel().tolist()
    step, fl, fr = _tables(stride)

    start = stride + 1 + int(np.argmax(local[0]))
    v, d = start, 0
    out = []
    last = -1
    while True:
        p = v + fl[d]
        if p != last:
            out.append(p)
            last = p
        v += step[d]
        if flat[v + fr[d]]:
            d = (d - 1) & 3
        elif not flat[v + fl[d]]:
            d = (d + 1) & 3
        if v == start and d == 0:
            break
    if len(out) > 1 and out[-1] == out[0]:
        out.pop()
    idx = np.asarray(out, dtype=np.int64)
    rows = idx // stride - 1 + component.bbox[0]
    cols = idx % stride - 1 + component.bbox[1]
    return Contour(np.column_stack((rows, cols)))


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _half_chain(pl):
    out: list[tuple[int, int]] = []
    for p in pl:
        while len(out) >= 2:
            (orr, oc), (ar, ac) = out[-2], out[-1]
            if (ar - orr) * (p[1] - oc) - (ac - oc) * (p[0] - orr) > 0:
                break
            out.pop()
        out.append(p)
    return out


def _drop_interior(pts: np.ndarray) -> np.ndarray:
    """Remove points strictly inside the octagon spanned by the extreme
    points in eight directions; none of them can be a hull vertex."""
    r, c = pts[:, 0], pts[:, 1]
    picks = {int(np.argmin(v)) for v in (r, c, r + c, r - c)}
    picks |= {int(np.argmax(v)) for v in (r, c, r + c, r - c)}
    ring = _chain(sorted(tuple(pts[i].tolist()) for i in picks))
    if len(ring) < 3:
        return pts
    inside = np.ones(len(pts), dtype=bool)
    for (ar, ac), (br, bc) in zip(ring, ring[1:] + ring[:1]):
        inside &= (br - ar) * (c - ac) - (bc - ac) * (r - ar) > 0
    return pts[~inside]


def _chain(pl: list[tuple[int, int]]) -> list[tuple[int, int]]:
    if len(pl) <= 2:
        return pl
    lower = _half_chain(pl)
    upper = _half_chain(pl[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # all points collinear: keep both ends
        return [pl[0], pl[-1]]
    return hull


def _hull_points(points: np.ndarray) -> list[tuple[int, int]]:
    """Andrew's monotone chain; strict turns only, counter-clockwise."""
    points = np.asarray(points)
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    if len(pts) > 1:
        fresh = np.ones(len(pts), dtype=bool)
        fresh[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[fresh]
    if len(pts) > 2:
        # only the extreme columns of each row can be strict hull vertices
        rows = pts[:, 0]
        keep = np.ones(len(pts), dtype=bool)
        keep[1:-1] = (rows[1:-1] != rows[:-2]) | (rows[1:-1] != rows[2:])
        pts = _drop_interior(pts[keep])
    return _chain(list(map(tuple, pts.tolist())))


def convex_hull(contour: Contour) -> list[int]:
    """Contour indices of the hull vertices, ascending (= counter-clockwise).

    When a vertex pixel occurs more than once in the contour, the occurrence
    is chosen so that hull vertices appear in the same cyclic order along
    the contour as around the hull.
    """
    pts = contour.points
    n = len(pts)
    if n == 0:
        raise ValueError("empty contour")
    hull_pts = _hull_points(pts)
    keys = pts[:, 0] * (1 << 32) + pts[:, 1]
    occurrences = [np.flatnonzero(keys == (r * (1 << 32) + c)) for r, c in hull_pts]
    if len(hull_pts) == 1:
        return [int(occurrences[0][0])]
    single = [i for i, occ in enumerate(occurrences) if len(occ) == 1]
    anchor = single[0] if single else 0
    base = int(occurrences[anchor][0])
    chosen = [base]
    prev = 0
    k = len(hull_pts)
    for j in range(1, k):
        occ = occurrences[(anchor + j) % k]
        offs = (occ - base) % n
        ahead = offs[offs > prev]
        off = int(ahead.min()) if len(ahead) else int(offs.min())
        chosen.append((base + off) % n)
        prev = off
    return sorted(chosen)


@dataclass(frozen=True)
class ConvexityDefect:
    hull_start: int
    hull_end: int
    farthest: int
    depth: float


def convexity_defects(contour: Contour, hull: list[int]) -> list[ConvexityDefect]:
    """Deepest contour point behind each hull edge.

    For cyclically consecutive hull indices ``(a, b)`` the contour points
    strictly between them are scanned for the largest distance to line
    ``ab``; ties go to the point met first after ``a``. Edges whose interior
    points all lie on the edge (depth 0) produce no defect.
    """
    pts = contour.points
    n = len(pts)
    if not hull:
        raise ValueError("empty hull")
    if any(not 0 <= i < n for i in hull):
        raise ValueError("hull index out of range")
    if len(hull) < 2:
        return []
    order = sorted(hull)
    ring = np.concatenate((pts, pts))
    defects = []
    for a, b in zip(order, order[1:] + [order[0] + n]):
        if b - a < 2:
            continue
        ar, ac = (int(v) for v in pts[a])
        br, bc = (int(v) for v in ring[b])
        seg = ring[a + 1:b]
        dr, dc = br - ar, bc - ac
        cross = np.abs(dr * (seg[:, 1] - ac) - dc * (seg[:, 0] - ar))
        j = int(np.argmax(cross))
        top = int(cross[j])
        if top == 0:
            continue
        defects.append(ConvexityDefect(a, b % n, (a + 1 + j) % n, top / math.sqrt(dr * dr + dc * dc)))
    return defects
