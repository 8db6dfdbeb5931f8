"""Raster containers and image/mask file I/O.

All coordinates are ``(row, col)`` with the origin at the top-left pixel.
Masks are plain boolean numpy arrays of shape ``(height, width)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

if TYPE_CHECKING:  # pragma: no cover
    from .detection import PlantObject, StemDetection


class ImageFormatError(ValueError):
    """Raised for files that cannot be decoded into an 8-bit raster."""


class Channels(enum.Enum):
    GRAY = 1
    RGB = 3
    RGBN = 4

    @property
    def count(self) -> int:
        return self.value


@dataclass(frozen=True)
class Image:
    """8-bit raster with one, three (R,G,B) or four (R,G,B,NIR) channels.

    ``data`` always has shape ``(height, width, channels)`` and is made
    read-only on construction.
    """

    data: np.ndarray
    channels: Channels

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.dtype != np.uint8:
            raise ImageFormatError(f"expected uint8 samples, got {data.dtype}")
        if data.ndim != 3 or data.shape[2] != self.channels.count:
            raise ImageFormatError(
                f"shape {data.shape} does not match {self.channels.name} layout"
            )
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise ImageFormatError("image has a zero dimension")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def channel(self, name: str) -> np.ndarray:
        """Return one channel ('R', 'G', 'B', 'N' or 'GRAY') as a 2-D view."""
        index = {
            Channels.GRAY: {"GRAY": 0},
            Channels.RGB: {"R": 0, "G": 1, "B": 2},
            Channels.RGBN: {"R": 0, "G": 1, "B": 2, "N": 3},
        }[self.channels]
        if name not in index:
            raise ValueError(f"{self.channels.name} image has no {name!r} channel")
        return self.data[:, :, index[name]]

    def to_rgb(self) -> np.ndarray:
        """Displayable ``(H, W, 3)`` uint8 copy (gray replicated, NIR dropped)."""
        if self.channels is Channels.GRAY:
            return np.repeat(self.data, 3, axis=2)
        return self.data[:, :, :3].copy()


@dataclass(frozen=True)
class GrayMap:
    """Signed per-pixel index values with their theoretical value domain."""

    values: np.ndarray
    lo: float
    hi: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


_MODE_CHANNELS = {"L": Channels.GRAY, "RGB": Channels.RGB}
_WIDE_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


def load_image(path: str | Path, nir_in_alpha: bool = False) -> Image:
    """Decode a PNG or binary PPM/PGM file into an :class:`Image`.

    A four-channel PNG is read as RGB with its alpha plane discarded, unless
    ``nir_in_alpha`` is set, in which case the alpha plane becomes the NIR
    channel.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            pil.load()
            fmt = pil.format
            mode = pil.mode
            if fmt not in ("PNG", "PPM"):
                raise ImageFormatError(f"{path}: unsupported format {fmt}")
            if mode in _WIDE_MODES:
                raise ImageFormatError(f"{path}: unsupported bit depth (mode {mode})")
            if mode == "RGBA":
                if nir_in_alpha:
                    return Image(np.array(pil), Channels.RGBN)
                pil = pil.convert("RGB")
            elif mode in ("1", "LA"):
                pil = pil.convert("L")
            elif mode not in _MODE_CHANNELS:
                pil = pil.convert("RGB")
            return Image(np.array(pil), _MODE_CHANNELS[pil.mode])
    except ImageFormatError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageFormatError(f"{path}: cannot decode image ({exc})") from exc


def mask_from_image(image: Image, level: int = 128) -> np.ndarray:
    """Binarize a stored mask: true where the sample is ``>= level``.

    Multi-channel images are reduced with the per-pixel maximum.
    """
    data = image.data if image.channels is Channels.GRAY else image.data[:, :, :3]
    return data.max(axis=2) >= level


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a boolean mask as an 8-bit grayscale PNG or PGM (true -> 255)."""
    mask = np.asarray(mask, dtype=bool)
    pil = PILImage.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".ppm", ".pnm") else "PNG"
    pil.save(path, format=fmt)


def save_image(image: Image, path: str | Path) -> None:
    """Write an image as PNG; RGBN is stored with NIR in the alpha plane."""
    mode = {Channels.GRAY: "L", Channels.RGB: "RGB", Channels.RGBN: "RGBA"}[image.channels]
    data = image.data[:, :, 0] if image.channels is Channels.GRAY else image.data
    PILImage.fromarray(data, mode=mode).save(Path(path), format="PNG")


CONTOUR_COLOR = (0, 255, 0)
HULL_COLOR = (255, 0, 0)
CUTOFF_COLOR = (255, 255, 0)
STEM_COLOR = (255, 0, 255)


def save_annotated(
    image: Image,
    objects: Sequence["PlantObject"],
    stems: Sequence["StemDetection"],
    path: str | Path,
) -> None:
    """Render contours, hulls, cut-off points and stem markers over ``image``."""
    rgb = image.to_rgb()
    h, w = rgb.shape[:2]
    for obj in objects:
        pts = obj.contour.points
        rgb[pts[:, 0], pts[:, 1]] = CONTOUR_COLOR
    pil = PILImage.fromarray(rgb, mode="RGB")
    draw = ImageDraw.Draw(pil)
    for obj in objects:
        pts = obj.contour.points
        if len(obj.hull) >= 2:
            ring = [(int(pts[i, 1]), int(pts[i, 0])) for i in obj.hull]
            draw.line(ring + ring[:1], fill=HULL_COLOR, width=1)
        for d in obj.defects:
            r, c = pts[d.farthest]
            draw.ellipse((c - 2, r - 2, c + 2, r + 2), outline=CUTOFF_COLOR)
    for stem in stems:
        r = min(max(int(round(stem.position[0])), 0), h - 1)
        c = min(max(int(round(stem.position[1])), 0), w - 1)
        draw.line((c - 4, r, c + 4, r), fill=STEM_COLOR, width=1)
        draw.line((c, r - 4, c, r + 4), fill=STEM_COLOR, width=1)
        pil.putpixel((c, r), STEM_COLOR)
    pil.save(Path(path), format="PNG")
