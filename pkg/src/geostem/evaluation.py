"""Detection-vs-truth matching, precision/recall, and synthetic rosettes.

The generator draws plants as k leaves radiating from a stem point plus a
small stem disc. A leaf of length L and width W is the set of points at
axial fraction ``t`` in [0, 1] and lateral offset
``|s| <= W/2 * sin(pi * t)``: a wedge of half-angle ``atan(pi*W / (2*L))``
at the base, widest half way out, closed at the tip. Neighbouring leaves
therefore meet only at the stem and leave V-shaped notches between them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .detection import StemDetection


@dataclass(frozen=True)
class GroundTruthStem:
    image_id: str
    position: tuple[float, float]


@dataclass(frozen=True)
class MatchReport:
    tp: int
    fp: int
    fn: int
    radius_px: float

    @property
    def precision(self) -> float:
        den = self.tp + self.fp
        return self.tp / den if den else 0.0

    @property
    def recall(self) -> float:
        den = self.tp + self.fn
        return self.tp / den if den else 0.0

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "radius_px": self.radius_px,
        }

    def summary(self) -> str:
        return (
            f"tp={self.tp} fp={self.fp} fn={self.fn} "
            f"precision={self.precision:.4f} recall={self.recall:.4f} "
            f"radius_px={self.radius_px:g}"
        )


def _position(item) -> tuple[float, float]:
    pos = getattr(item, "position", item)
    return float(pos[0]), float(pos[1])


def match(detections: Sequence, truth: Sequence, radius_px: float) -> MatchReport:
    """Greedy one-to-one matching by globally smallest distance.

    Pairs farther apart than ``radius_px`` never match. Items may be
    :class:`StemDetection` / :class:`GroundTruthStem` or bare points.
    """
    if not radius_px > 0:
        raise ValueError("radius_px must be positive")
    det = np.array([_position(d) for d in detections], dtype=float).reshape(-1, 2)
    gt = np.array([_position(t) for t in truth], dtype=float).reshape(-1, 2)
    tp = 0
    if len(det) and len(gt):
        dist = np.hypot(det[:, None, 0] - gt[None, :, 0], det[:, None, 1] - gt[None, :, 1])
        di, gi = np.nonzero(dist <= radius_px)
        order = np.lexsort((gi, di, dist[di, gi]))
        used_d, used_g = set(), set()
        for k in order:
            i, j = int(di[k]), int(gi[k])
            if i in used_d or j in used_g:
                continue
            used_d.add(i)
            used_g.add(j)
            tp += 1
    return MatchReport(tp, len(det) - tp, len(gt) - tp, float(radius_px))


def cm_to_px(radius_cm: float, px_per_cm: float) -> float:
    if not (radius_cm > 0 and px_per_cm > 0):
        raise ValueError("radius and pixel scale must be positive")
    return radius_cm * px_per_cm


def aggregate(reports: Iterable[MatchReport]) -> MatchReport:
    """Micro-average: sum the counts, then recompute the ratios."""
    reports = list(reports)
    if not reports:
        return MatchReport(0, 0, 0, 0.0)
    radii = {r.radius_px for r in reports}
    if len(radii) > 1:
        raise ValueError(f"cannot aggregate reports with different radii: {sorted(radii)}")
    return MatchReport(
        sum(r.tp for r in reports),
        sum(r.fp for r in reports),
        sum(r.fn for r in reports),
        radii.pop(),
    )


def read_ground_truth(path: str | Path) -> dict[str, list[GroundTruthStem]]:
    """Read ``image_id,stem_row,stem_col`` rows grouped by image id."""
    out: dict[str, list[GroundTruthStem]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"image_id", "stem_row", "stem_col"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header image_id,stem_row,stem_col")
        for line, row in enumerate(reader, start=2):
            try:
                pos = (float(row["stem_row"]), float(row["stem_col"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: malformed coordinates") from exc
            out.setdefault(row["image_id"], []).append(GroundTruthStem(row["image_id"], pos))
    return out


def write_ground_truth(truth: Iterable[GroundTruthStem], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "stem_row", "stem_col"])
        for t in truth:
            writer.writerow([t.image_id, f"{t.position[0]:.4f}", f"{t.position[1]:.4f}"])


# --------------------------------------------------------------------------
# synthetic plants


def base_half_angle(length: float, width: float) -> float:
    """Widest angular half-extent of a leaf seen from the stem, radians."""
    return math.atan(math.pi * width / (2 * length))


def width_for_span(length: float, leaf_count: int, span: float) -> float:
    """Leaf width whose base wedge fills ``span`` of the angular spacing."""
    return 2 * length * math.tan(span * math.pi / leaf_count) / math.pi


@dataclass(frozen=True)
class SynthPlantSpec:
    """One synthetic rosette.

    ``asymmetry`` multiplies individual leaf lengths (defaults to all 1).
    ``phase`` is the angle of leaf 0 in degrees, measured from the +row
    axis towards +col; None draws it from the seed.
    """

    stem: tuple[float, float]
    leaf_count: int
    leaf_length: float
    leaf_width: float
    angle_jitter: float = 0.0
    length_jitter: float = 0.0
    asymmetry: tuple[float, ...] | None = None
    phase: float | None = None
    stem_radius: float | None = None

    def __post_init__(self):
        if self.leaf_count < 2:
            raise ValueError("a rosette needs at least two leaves")
        if self.leaf_length <= 0 or self.leaf_width <= 0:
            raise ValueError("leaf size must be positive")
        if self.asymmetry is not None and len(self.asymmetry) != self.leaf_count:
            raise ValueError("asymmetry needs one multiplier per leaf")
        if not 0 <= self.length_jitter < 1:
            raise ValueError("length_jitter must lie in [0, 1)")

    @property
    def multipliers(self) -> tuple[float, ...]:
        return self.asymmetry or (1.0,) * self.leaf_count

    @property
    def reach(self) -> float:
        """Upper bound on the distance from the stem to any plant pixel."""
        return self.leaf_length * max(self.multipliers) * (1 + self.length_jitter) + 1.0

    @property
    def is_asymmetric(self) -> bool:
        return len(set(self.multipliers)) > 1


class PlantSpecError(ValueError):
    pass


def _check_spacing(spec: SynthPlantSpec) -> None:
    mult = spec.multipliers
    k = spec.leaf_count
    gap = 2 * math.pi / k - 2 * math.radians(spec.angle_jitter)
    half = [
        base_half_angle(spec.leaf_length * m * (1 - spec.length_jitter), spec.leaf_width)
        for m in mult
    ]
    for i in range(k):
        if half[i] + half[(i + 1) % k] >= gap:
            raise PlantSpecError(
                f"leaves {i} and {(i + 1) % k} would overlap: "
                f"{math.degrees(half[i] + half[(i + 1) % k]):.1f} deg needed, "
                f"{math.degrees(gap):.1f} deg available"
            )


def _draw_plant(canvas: np.ndarray, spec: SynthPlantSpec, rng: np.random.Generator) -> None:
    k = spec.leaf_count
    phase = math.radians(spec.phase) if spec.phase is not None else rng.uniform(0, 2 * math.pi / k)
    jit_a = rng.uniform(-1, 1, k) * math.radians(spec.angle_jitter)
    jit_l = 1 + rng.uniform(-1, 1, k) * spec.length_jitter
    sr, sc = spec.stem
    reach = spec.reach
    h, w = canvas.shape
    r0, r1 = max(0, int(math.floor(sr - reach))), min(h, int(math.ceil(sr + reach)) + 1)
    c0, c1 = max(0, int(math.floor(sc - reach))), min(w, int(math.ceil(sc + reach)) + 1)
    if r0 >= r1 or c0 >= c1:
        return
    dr = np.arange(r0, r1, dtype=float)[:, None] - sr
    dc = np.arange(c0, c1, dtype=float)[None, :] - sc
    region = canvas[r0:r1, c0:c1]
    radius = spec.stem_radius if spec.stem_radius is not None else max(2.0, 0.06 * spec.leaf_length)
    region |= dr * dr + dc * dc <= radius * radius
    for i, mult in enumerate(spec.multipliers):
        theta = phase + 2 * math.pi * i / k + jit_a[i]
        ur, uc = math.cos(theta), math.sin(theta)
        length = spec.leaf_length * mult * jit_l[i]
        t = (dr * ur + dc * uc) / length
        s = dc * ur - dr * uc
        half = spec.leaf_width / 2 * np.sin(np.pi * np.clip(t, 0.0, 1.0))
        region |= (t >= 0) & (t <= 1) & (np.abs(s) <= half)


def generate_plant(
    spec: SynthPlantSpec, seed: int, shape: tuple[int, int] | None = None
) -> tuple[np.ndarray, GroundTruthStem]:
    """Rasterize one rosette; pixel ``(i, j)`` is filled when its center is
    inside a leaf or the stem disc. Without ``shape`` the canvas is sized to
    hold the plant with a margin."""
    _check_spacing(spec)
    if shape is None:
        pad = math.ceil(spec.reach) + 2
        shape = (int(math.ceil(spec.stem[0])) + pad + 1, int(math.ceil(spec.stem[1])) + pad + 1)
    canvas = np.zeros(shape, dtype=bool)
    _draw_plant(canvas, spec, np.random.default_rng(seed))
    return canvas, GroundTruthStem("", tuple(map(float, spec.stem)))


@dataclass(frozen=True)
class PlantDistribution:
    """Ranges from which field plants are drawn.

    ``leaf_span`` is the fraction of the angular spacing ``2*pi/k`` that
    each leaf's base wedge covers. A fraction ``asymmetric_fraction`` of
    plants get one leaf (chosen at random) lengthened by
    ``asymmetry_factor``.
    """

    leaf_count: tuple[int, int] = (3, 6)
    leaf_length: tuple[float, float] = (25.0, 40.0)
    leaf_span: tuple[float, float] = (0.3, 0.45)
    angle_jitter: float = 4.0
    length_jitter: float = 0.1
    asymmetric_fraction: float = 0.3
    asymmetry_factor: float = 2.0
    spacing: float = 14.0

    def sample(self, rng: np.random.Generator, stem=(0.0, 0.0)) -> SynthPlantSpec:
        for _ in range(100):
            k = int(rng.integers(self.leaf_count[0], self.leaf_count[1] + 1))
            length = float(rng.uniform(*self.leaf_length))
            width = width_for_span(length, k, float(rng.uniform(*self.leaf_span)))
            asym = None
            if rng.random() < self.asymmetric_fraction:
                mult = [1.0] * k
                mult[int(rng.integers(k))] = self.asymmetry_factor
                asym = tuple(mult)
            spec = SynthPlantSpec(
                stem=stem, leaf_count=k, leaf_length=length, leaf_width=width,
                angle_jitter=self.angle_jitter, length_jitter=self.length_jitter,
                asymmetry=asym, phase=float(rng.uniform(0, 360.0 / k)),
            )
            try:
                _check_spacing(spec)
            except PlantSpecError:
                continue
            return spec
        raise PlantSpecError("distribution keeps producing overlapping leaves")


def sample_field(
    n_plants: int,
    image_dims: tuple[int, int],
    distribution: PlantDistribution = PlantDistribution(),
    seed: int = 0,
    max_tries: int = 2000,
) -> list[SynthPlantSpec]:
    """Place ``n_plants`` plants whose reach discs (plus spacing) do not
    overlap and stay inside the image."""
    rng = np.random.default_rng(seed)
    h, w = image_dims
    placed: list[SynthPlantSpec] = []
    for _ in range(n_plants):
        spec = distribution.sample(rng)
        rad = spec.reach + 1.0
        if h - 1 <= 2 * rad or w - 1 <= 2 * rad:
            raise PlantSpecError(f"image {image_dims} too small for a plant of reach {rad:.1f}")
        for _ in range(max_tries):
            r = float(rng.uniform(rad, h - 1 - rad))
            c = float(rng.uniform(rad, w - 1 - rad))
            if all(
                math.hypot(r - o.stem[0], c - o.stem[1]) >= rad + o.reach + 1.0 + distribution.spacing
                for o in placed
            ):
                placed.append(replace(spec, stem=(r, c)))
                break
        else:
            raise PlantSpecError(f"could not place plant {len(placed) + 1} of {n_plants}")
    return placed


def render_field(
    specs: Sequence[SynthPlantSpec], image_dims: tuple[int, int], seed: int = 0
) -> np.ndarray:
    canvas = np.zeros(image_dims, dtype=bool)
    rng = np.random.default_rng(seed)
    for spec in specs:
        _draw_plant(canvas, spec, rng)
    return canvas


def generate_field(
    n_plants: int,
    image_dims: tuple[int, int],
    distribution: PlantDistribution = PlantDistribution(),
    seed: int = 0,
    image_id: str = "",
) -> tuple[np.ndarray, list[GroundTruthStem]]:
    """Mask with ``n_plants`` separated rosettes, and their stems in
    placement order."""
    specs = sample_field(n_plants, image_dims, distribution, seed)
    mask = render_field(specs, image_dims, seed + 1)
    return mask, [GroundTruthStem(image_id, tuple(map(float, s.stem))) for s in specs]


def render_rgb(mask: np.ndarray, seed: int = 0) -> np.ndarray:
    """Paint a mask as a field photo: green foliage on brown soil, with noise."""
    rng = np.random.default_rng(seed)
    h, w = mask.shape
    soil = np.array([120, 95, 70], dtype=np.int16)
    leaf = np.array([60, 150, 50], dtype=np.int16)
    img = np.where(mask[:, :, None], leaf, soil) + rng.integers(-8, 9, (h, w, 3))
    return np.clip(img, 0, 255).astype(np.uint8)
