"""Leaf extraction from convexity defects and stem regression.

Leaf and stem geometry is evaluated in exact integer/rational arithmetic:
contour points are integers, so leaf centroids, roots and line
intersections are rationals. Stem positions are rounded half-to-even onto
a 2**-16 px grid, which makes results bit-identical under integer
translations and 90 degree rotations of the input mask.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bingeo import (
    Component,
    Contour,
    ConvexityDefect,
    close,
    connected_components,
    convex_hull,
    convexity_defects,
    make_ellipse_kernel,
    trace_contour,
)

Point = tuple[Fraction, Fraction]

GRID = 1 << 16


class StemMethod(enum.Enum):
    LEAF_INTERSECTION = "intersection"
    CENTROID_FALLBACK = "centroid"


@dataclass(frozen=True)
class DetectorConfig:
    """Detector hyper-parameters.

    d_min: minimum defect depth in pixels for a cut-off point.
    min_leaves: fewer leaves than this fall back to the centroid.
    beta: the mean intersection must lie in the bounding box scaled by beta.
    angle_min: leaf-direction pairs closer than this (degrees) are skipped.
    force_centroid: always report the centroid (baseline mode).
    """

    d_min: float = 5.0
    min_leaves: int = 2
    beta: float = 1.2
    angle_min: float = 5.0
    force_centroid: bool = False

    def __post_init__(self):
        if not self.d_min > 0:
            raise ValueError("d_min must be positive")
        if self.min_leaves < 2:
            raise ValueError("min_leaves must be at least 2")
        if not self.beta >= 1:
            raise ValueError("beta must be >= 1")
        if not 0 < self.angle_min < 90:
            raise ValueError("angle_min must lie in (0, 90) degrees")


@dataclass(frozen=True)
class PlantObject:
    component: Component
    contour: Contour
    hull: list[int]
    defects: list[ConvexityDefect]


@dataclass(frozen=True)
class Leaf:
    """A contour span between two cut-off points.

    ``span`` holds the contour indices of the two cut-off points; the span
    runs forward from the first and wraps past the end when ``span[1] <=
    span[0]``. ``center`` and ``root`` are exact rationals.
    """

    cutoff_a: tuple[int, int]
    cutoff_b: tuple[int, int]
    span: tuple[int, int]
    center: Point
    root: Point

    @property
    def direction(self) -> tuple[Point, Point]:
        return self.root, self.center


@dataclass(frozen=True)
class StemDetection:
    position: tuple[float, float]
    method: StemMethod
    num_leaves: int
    object_ref: int


def build_object(component: Component, d_min: float) -> PlantObject:
    """Contour, hull and the defects at least ``d_min`` deep."""
    contour = trace_contour(component)
    hull = convex_hull(contour)
    defects = [d for d in convexity_defects(contour, hull) if d.depth >= d_min]
    defects.sort(key=lambda d: d.farthest)
    return PlantObject(component, contour, hull, defects)


def _in_bbox(p: Point, bbox) -> bool:
    return bbox[0] <= p[0] <= bbox[2] and bbox[1] <= p[1] <= bbox[3]


def extract_leaves(obj: PlantObject) -> list[Leaf]:
    """One leaf per pair of cyclically neighbouring cut-off points.

    The leaf center is the area centroid of the span closed by its cut-off
    segment; the root is the midpoint of the cut-off points. Leaves with
    zero area, a center within 0.5 px of the root, or a center outside the
    component's bounding box are dropped.
    """
    cuts = sorted(d.farthest for d in obj.defects)
    if len(cuts) < 2:
        return []
    pts = obj.contour.points
    n = len(pts)
    r0, c0 = obj.component.origin
    local = pts - np.array([r0, c0])
    ring = np.concatenate((local, local))
    leaves = []
    for a, b in zip(cuts, cuts[1:] + [cuts[0] + n]):
        poly = ring[a:b + 1]
        x, y = poly[:, 0], poly[:, 1]
        xn, yn = np.append(x[1:], x[0]), np.append(y[1:], y[0])
        cr = x * yn - xn * y
        area2 = int(cr.sum())
        if area2 == 0:
            continue
        cx = Fraction(int(((x + xn) * cr).sum()), 3 * area2) + r0
        cy = Fraction(int(((y + yn) * cr).sum()), 3 * area2) + c0
        pa, pb = pts[a], pts[b % n]
        root = (Fraction(int(pa[0]) + int(pb[0]), 2), Fraction(int(pa[1]) + int(pb[1]), 2))
        center = (cx, cy)
        if (cx - root[0]) ** 2 + (cy - root[1]) ** 2 < Fraction(1, 4):
            continue
        if not _in_bbox(center, obj.component.bbox):
            continue
        leaves.append(Leaf(
            cutoff_a=(int(pa[0]), int(pa[1])),
            cutoff_b=(int(pb[0]), int(pb[1])),
            span=(a, b % n),
            center=center,
            root=root,
        ))
    return leaves


def _round_div(num: int, den: int) -> int:
    """``num / den`` rounded half-to-even (``den > 0``)."""
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


def _as_line(root, center) -> tuple[int, int, int, int, int]:
    """Integer form ``(k*root_r, k*root_c, dir_r, dir_c, k/2)`` of the line
    through ``root`` and ``center``, with ``k`` the smallest even multiplier
    that clears all denominators."""
    rr, rc = Fraction(root[0]), Fraction(root[1])
    cr, cc = Fraction(center[0]), Fraction(center[1])
    scale = math.lcm(rr.denominator, rc.denominator, cr.denominator, cc.denominator)
    r2 = (int(2 * rr * scale), int(2 * rc * scale))
    c2 = (int(2 * cr * scale), int(2 * cc * scale))
    return r2[0], r2[1], c2[0] - r2[0], c2[1] - r2[1], scale


def _sin2_bound(angle_min: float) -> tuple[int, int]:
    f = Fraction(math.sin(math.radians(angle_min)) ** 2)
    return f.numerator, f.denominator


def _intersect(l1, l2, sin2) -> tuple[int, int, int] | None:
    """Intersection of integer lines as ``(num_r, num_c, den)``, den > 0."""
    ar, ac, ur, uc, sa = l1
    br, bc, vr, vc, sb = l2
    den = ur * vc - uc * vr
    if den == 0 or den * den * sin2[1] < sin2[0] * (ur * ur + uc * uc) * (vr * vr + vc * vc):
        return None
    # bring both anchors to the common denominator 2 * sa * sb
    ar, ac, br, bc = ar * sb, ac * sb, br * sa, bc * sa
    num = (br - ar) * vc - (bc - ac) * vr
    pr, pc, q = ar * den + num * ur, ac * den + num * uc, 2 * sa * sb * den
    if q < 0:
        pr, pc, q = -pr, -pc, -q
    return pr, pc, q


def intersect_directions(l1, l2, angle_min: float = 5.0) -> Point | None:
    """Intersection of two infinite lines, each given by two points.

    Returns None when the lines meet at less than ``angle_min`` degrees.
    Inputs may be ints, floats or Fractions; the result is exact.
    """
    la, lb = _as_line(*l1), _as_line(*l2)
    if (la[2], la[3]) == (0, 0) or (lb[2], lb[3]) == (0, 0):
        raise ValueError("a line needs two distinct points")
    hit = _intersect(la, lb, _sin2_bound(angle_min))
    if hit is None:
        return None
    return Fraction(hit[0], hit[2]), Fraction(hit[1], hit[2])


def centroid(component: Component) -> tuple[float, float]:
    """Mean pixel coordinate of the component."""
    rr, cc = np.nonzero(component.mask)
    n = len(rr)
    return (
        _round_div((int(rr.sum()) + component.bbox[0] * n) * GRID, n) / GRID,
        _round_div((int(cc.sum()) + component.bbox[1] * n) * GRID, n) / GRID,
    )


def _inside_inflated(grid_pos: tuple[int, int], bbox, beta: float) -> bool:
    b = Fraction(beta)
    for g, lo, hi in ((grid_pos[0], bbox[0], bbox[2]), (grid_pos[1], bbox[1], bbox[3])):
        if b.denominator * abs(2 * g - (lo + hi) * GRID) > b.numerator * (hi - lo + 1) * GRID:
            return False
    return True


# intersections are snapped to 2**-40 px before averaging; every rounding
# step is half-to-even so integer shifts and sign flips commute with it
_FINE = 1 << 40


def estimate_stem(obj: PlantObject, leaves: list[Leaf], config: DetectorConfig) -> StemDetection:
    """Mean of pairwise leaf-direction intersections, or the centroid.

    The centroid is used when there are fewer than ``min_leaves`` leaves,
    no pair intersects at ``angle_min`` or more, or the mean lies outside
    the bounding box inflated by ``beta``.
    """
    comp = obj.component
    if not config.force_centroid and len(leaves) >= config.min_leaves:
        lines = [_as_line(leaf.root, leaf.center) for leaf in leaves]
        sin2 = _sin2_bound(config.angle_min)
        sr = sc = hits = 0
        for l1, l2 in itertools.combinations(lines, 2):
            x = _intersect(l1, l2, sin2)
            if x is None:
                continue
            sr += _round_div(x[0] * _FINE, x[2])
            sc += _round_div(x[1] * _FINE, x[2])
            hits += 1
        if hits:
            shrink = hits * (_FINE // GRID)
            g = (_round_div(sr, shrink), _round_div(sc, shrink))
            if _inside_inflated(g, comp.bbox, config.beta):
                return StemDetection(
                    (g[0] / GRID, g[1] / GRID), StemMethod.LEAF_INTERSECTION, len(leaves), comp.label
                )
    return StemDetection(centroid(comp), StemMethod.CENTROID_FALLBACK, len(leaves), comp.label)


def find_objects(
    mask: np.ndarray,
    config: DetectorConfig = DetectorConfig(),
    m: int = 9,
    min_area: int = 32,
) -> list[PlantObject]:
    closed = close(mask, make_ellipse_kernel(m))
    return [build_object(comp, config.d_min) for comp in connected_components(closed, min_area)]


def detect_objects(
    mask: np.ndarray,
    config: DetectorConfig = DetectorConfig(),
    m: int = 9,
    min_area: int = 32,
) -> list[tuple[PlantObject, StemDetection]]:
    """Like :func:`detect_all` but keeps each detection's plant object."""
    out = []
    for obj in find_objects(mask, config, m, min_area):
        out.append((obj, estimate_stem(obj, extract_leaves(obj), config)))
    return out


def detect_all(
    mask: np.ndarray,
    config: DetectorConfig = DetectorConfig(),
    m: int = 9,
    min_area: int = 32,
) -> list[StemDetection]:
    """Close the mask, split it into components and locate one stem each."""
    return [det for _, det in detect_objects(mask, config, m, min_area)]
