"""Vegetation index maps and automatic histogram thresholding."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .raster import Channels, GrayMap, Image

NBINS = 256
EXG_RANGE = (-510, 510)
NDVI_RANGE = (-1.0, 1.0)


class VegetationIndex(enum.Enum):
    EXG = "exg"
    NDVI = "ndvi"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Thresholder:
    """``kind`` is 'otsu', 'triangle' or 'fixed' (then ``value`` is the bin)."""

    kind: str = "otsu"
    value: int | None = None

    def __post_init__(self):
        if self.kind not in ("otsu", "triangle", "fixed"):
            raise ValueError(f"unknown thresholder {self.kind!r}")
        if self.kind == "fixed" and (self.value is None or not 0 <= self.value <= 255):
            raise ValueError("fixed thresholder needs a bin in [0, 255]")

    @classmethod
    def parse(cls, text: str) -> "Thresholder":
        """Parse 'otsu', 'triangle' or 'fixed:<t>'."""
        text = text.strip().lower()
        if text.startswith("fixed:"):
            return cls("fixed", int(text.split(":", 1)[1]))
        return cls(text)

    def __call__(self, hist: np.ndarray) -> int:
        if self.kind == "otsu":
            return otsu_threshold(hist)
        if self.kind == "triangle":
            return triangle_threshold(hist)
        return int(self.value)


@dataclass(frozen=True)
class SegmentationConfig:
    index: VegetationIndex = VegetationIndex.EXG
    thresholder: Thresholder = Thresholder()


def exg(image: Image) -> GrayMap:
    """Excess green, ``2G - R - B``, as int32 in [-510, 510]."""
    if image.channels is Channels.GRAY:
        raise ValueError("excess green needs R, G and B channels")
    r = image.channel("R").astype(np.int32)
    g = image.channel("G").astype(np.int32)
    b = image.channel("B").astype(np.int32)
    return GrayMap(2 * g - r - b, *EXG_RANGE)


def ndvi(image: Image) -> GrayMap:
    """``(NIR - R) / (NIR + R)``; pixels with a zero denominator map to 0."""
    if image.channels is not Channels.RGBN:
        raise ValueError("NDVI needs an image with a NIR channel")
    nir = image.channel("N").astype(np.float64)
    red = image.channel("R").astype(np.float64)
    den = nir + red
    out = np.zeros_like(den)
    np.divide(nir - red, den, out=out, where=den > 0)
    return GrayMap(out, *NDVI_RANGE)


def quantize_bins(gmap: GrayMap) -> np.ndarray:
    """Map each value onto 256 equal-width bins of the map's domain (uint8)."""
    scaled = np.floor((np.asarray(gmap.values, dtype=np.float64) - gmap.lo) * NBINS / (gmap.hi - gmap.lo))
    return np.clip(scaled, 0, NBINS - 1).astype(np.uint8)


def quantize(gmap: GrayMap) -> np.ndarray:
    """256-bin histogram (int64 counts) of the quantized map."""
    return np.bincount(quantize_bins(gmap).ravel(), minlength=NBINS).astype(np.int64)


def _check_histogram(hist) -> list[int]:
    counts = [int(c) for c in np.asarray(hist).ravel()]
    if len(counts) != NBINS:
        raise ValueError(f"histogram must have {NBINS} bins")
    if any(c < 0 for c in counts):
        raise ValueError("histogram counts must be non-negative")
    if sum(1 for c in counts if c) < 2:
        raise ValueError("no threshold exists: fewer than two occupied bins")
    return counts


def otsu_threshold(hist) -> int:
    """Bin ``t`` maximizing the between-class variance of {<= t} vs {> t}.

    Uses the integer identity
    ``w0 * w1 * (mu0 - mu1)**2 * N**2 = (s0*w1 - s1*w0)**2 / (w0*w1)``
    so candidates are compared exactly; ties go to the smaller ``t``.
    """
    counts = _check_histogram(hist)
    n = sum(counts)
    s = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = -1, 0, 1
    w0 = s0 = 0
    for t in range(NBINS - 1):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = n - w0
        if w0 == 0 or w1 == 0:
            continue
        num = (s0 * w1 - (s - s0) * w0) ** 2
        den = w0 * w1
        if best_t < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def triangle_threshold(hist) -> int:
    """Zack's triangle threshold.

    A line joins ``(peak, h[peak])`` to the occupied end bin farther from the
    peak (the upper end on a tie). Among bins between the two, inclusive, the
    one lying farthest *below* that line is returned; ties go to the smaller
    bin. The peak is the first bin holding the maximum count.
    """
    counts = _check_histogram(hist)
    occupied = [i for i, c in enumerate(counts) if c]
    first, last = occupied[0], occupied[-1]
    peak = counts.index(max(counts))
    end = last if last - peak >= peak - first else first
    hp, he = counts[peak], counts[end]
    dx, dy = end - peak, he - hp
    sign = 1 if dx > 0 else -1
    best_b, best_depth = None, None
    for b in range(min(peak, end), max(peak, end) + 1):
        # -cross * sign(dx) is proportional to the distance below the line
        depth = -(dx * (counts[b] - hp) - dy * (b - peak)) * sign
        if best_depth is None or depth > best_depth:
            best_b, best_depth = b, depth
    return best_b


def binarize(gmap: GrayMap, threshold: int) -> np.ndarray:
    """Vegetation mask: true where the quantized bin exceeds ``threshold``."""
    return quantize_bins(gmap) > threshold


def vegetation_index(image: Image, index: VegetationIndex) -> GrayMap:
    if index is VegetationIndex.EXG:
        return exg(image)
    if index is VegetationIndex.NDVI:
        return ndvi(image)
    raise ValueError("external masks are read from disk, not computed")


def segment(image: Image, config: SegmentationConfig = SegmentationConfig()) -> np.ndarray:
    """Index map -> histogram -> threshold -> boolean vegetation mask."""
    gmap = vegetation_index(image, config.index)
    bins = quantize_bins(gmap)
    hist = np.bincount(bins.ravel(), minlength=NBINS)
    return bins > config.thresholder(hist)
