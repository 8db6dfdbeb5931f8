"""Batch front end: detect stems over a directory, evaluate, benchmark,
and materialize synthetic corpora.

Usage::

    geostem synth out/ --n-images 5 --rgb
    geostem detect out/ -o results/ --index external --annotate
    geostem eval out/ -o results/ --index external --gt out/gt.csv
    geostem bench out/ -o results/ --index external
"""

from __future__ import annotations

import argparse
import csv
import enum
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .detection import DetectorConfig, PlantObject, StemDetection, detect_objects
from .evaluation import (
    GroundTruthStem,
    MatchReport,
    PlantDistribution,
    aggregate,
    cm_to_px,
    generate_field,
    match,
    read_ground_truth,
    render_rgb,
    write_ground_truth,
)
from .raster import (
    Channels,
    Image,
    ImageFormatError,
    load_image,
    mask_from_image,
    save_annotated,
    save_image,
    save_mask,
)
from .segmentation import SegmentationConfig, Thresholder, VegetationIndex, segment

log = logging.getLogger("geostem")

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm")
MASK_TAG = "_mask"
DETECTION_HEADER = ["image_id", "object_id", "stem_row", "stem_col", "method", "num_leaves"]
STAGES = ("mask", "stem", "io")


class Mode(enum.Enum):
    FROM_IMAGES = "images"
    FROM_MASKS = "masks"


@dataclass(frozen=True)
class RunConfig:
    input_dir: Path
    output_dir: Path
    mode: Mode = Mode.FROM_MASKS
    segmentation: SegmentationConfig | None = None
    detector: DetectorConfig = DetectorConfig()
    kernel: int = 9
    min_area: int = 32
    gt_path: Path | None = None
    px_per_cm: float | None = 20.0
    radius_cm: float = 0.5
    annotate: bool = False
    benchmark: bool = False
    threads: int = 1
    nir_in_alpha: bool = False

    def __post_init__(self):
        if self.mode is Mode.FROM_IMAGES and self.segmentation is None:
            raise ValueError("image mode needs a segmentation config")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"--kernel must be a positive odd size, got {self.kernel}")
        if self.min_area < 1:
            raise ValueError("--min-area must be at least 1")
        if self.threads < 1:
            raise ValueError("--threads must be at least 1")
        if self.gt_path is not None and not (self.px_per_cm and self.px_per_cm > 0):
            raise ValueError("evaluation needs a positive --px-per-cm")

    @property
    def radius_px(self) -> float:
        return cm_to_px(self.radius_cm, self.px_per_cm)


@dataclass
class ImageResult:
    image_id: str
    source: Path
    detections: list[StemDetection] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    error: str | None = None


@dataclass(frozen=True)
class TimingReport:
    """Per-stage wall-clock statistics in milliseconds."""

    n_images: int
    stages: dict[str, tuple[float, float]]  # name -> (mean, std)

    @classmethod
    def from_results(cls, results: Sequence[ImageResult]) -> "TimingReport":
        ok = [r for r in results if r.error is None]
        stages = {}
        for name in STAGES + ("total",):
            if name == "total":
                values = [sum(r.timings[s] for s in STAGES) for r in ok]
            else:
                values = [r.timings[name] for r in ok]
            ms = [v * 1e3 for v in values]
            mean = statistics.fmean(ms) if ms else 0.0
            std = statistics.pstdev(ms) if len(ms) > 1 else 0.0
            stages[name] = (mean, std)
        return cls(len(ok), stages)

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "stages": {k: {"mean_ms": m, "std_ms": s} for k, (m, s) in self.stages.items()},
        }

    def table(self) -> str:
        lines = [f"{'stage':<6} {'mean [ms]':>10} {'std [ms]':>10}"]
        for name, (mean, std) in self.stages.items():
            lines.append(f"{name:<6} {mean:>10.2f} {std:>10.2f}")
        lines.append(f"({self.n_images} images; io excluded from mask and stem)")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# input discovery


def image_id_for(path: Path) -> str:
    stem = path.stem
    return stem[: -len(MASK_TAG)] if stem.endswith(MASK_TAG) else stem


def discover(input_dir: Path, mode: Mode) -> list[Path]:
    """Input files in name order.

    In image mode files named ``*_mask.*`` are skipped. In mask mode those
    files are the masks if any exist; otherwise every image file is one.
    """
    if not input_dir.is_dir():
        raise FileNotFoundError(f"{input_dir}: not a directory")
    files = sorted(p for p in input_dir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    tagged = [p for p in files if p.stem.endswith(MASK_TAG)]
    if mode is Mode.FROM_IMAGES:
        return [p for p in files if p not in tagged]
    return tagged or files


def _backdrop(path: Path, mask: np.ndarray, nir_in_alpha: bool) -> Image:
    """Image to draw overlays on: the photo next to a ``*_mask`` file if
    present, otherwise the mask itself."""
    if path.stem.endswith(MASK_TAG):
        for suffix in IMAGE_SUFFIXES:
            twin = path.with_name(image_id_for(path) + suffix)
            if twin.exists():
                try:
                    img = load_image(twin, nir_in_alpha)
                except ImageFormatError:
                    break
                if img.shape == mask.shape:
                    return img
    return Image(np.where(mask, 255, 0).astype(np.uint8), Channels.GRAY)


# --------------------------------------------------------------------------
# pipeline


def process_image(path: Path, config: RunConfig) -> ImageResult:
    """Run one file through the pipeline; failures are captured, not raised."""
    res = ImageResult(image_id_for(path), path)
    t = {s: 0.0 for s in STAGES}
    try:
        t0 = time.perf_counter()
        image = load_image(path, config.nir_in_alpha)
        t1 = time.perf_counter()
        if config.mode is Mode.FROM_IMAGES:
            mask = segment(image, config.segmentation)
        else:
            mask = mask_from_image(image)
        t2 = time.perf_counter()
        pairs = detect_objects(mask, config.detector, config.kernel, config.min_area)
        t3 = time.perf_counter()
        t["io"], t["mask"], t["stem"] = t1 - t0, t2 - t1, t3 - t2
        res.detections = [det for _, det in pairs]
        if config.annotate:
            t4 = time.perf_counter()
            backdrop = image if config.mode is Mode.FROM_IMAGES else _backdrop(path, mask, config.nir_in_alpha)
            objects: list[PlantObject] = [obj for obj, _ in pairs]
            save_annotated(backdrop, objects, res.detections, config.output_dir / f"{res.image_id}_annotated.png")
            t["io"] += time.perf_counter() - t4
    except (ImageFormatError, ValueError, OSError) as exc:
        res.error = f"{path.name}: {exc}"
    res.timings = t
    return res


def write_detections(results: Sequence[ImageResult], path: Path) -> None:
    """Detections CSV, rows ordered by image then component."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DETECTION_HEADER)
        for res in results:
            for det in res.detections:
                writer.writerow([
                    res.image_id,
                    det.object_ref,
                    f"{det.position[0]:.2f}",
                    f"{det.position[1]:.2f}",
                    det.method.value,
                    det.num_leaves,
                ])


def read_detections(path: Path) -> dict[str, list[tuple[float, float]]]:
    out: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["image_id"], []).append((float(row["stem_row"]), float(row["stem_col"])))
    return out


def evaluate(results: Sequence[ImageResult], truth: dict[str, list[GroundTruthStem]], radius_px: float) -> MatchReport:
    """Micro-averaged report over the successfully processed images."""
    reports = [match(r.detections, truth.get(r.image_id, []), radius_px) for r in results if r.error is None]
    if not reports:
        return MatchReport(0, 0, 0, radius_px)
    return aggregate(reports)


def process_batch(paths: Sequence[Path], config: RunConfig) -> list[ImageResult]:
    # parallelism is across images only; each image runs single-threaded
    cv2.setNumThreads(1)
    if config.threads == 1:
        return [process_image(p, config) for p in paths]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(lambda p: process_image(p, config), paths))


def run(config: RunConfig) -> int:
    """Full batch; returns the process exit status."""
    try:
        paths = discover(config.input_dir, config.mode)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2
    if not paths:
        log.error("no input images in %s", config.input_dir)
        return 2
    truth = None
    if config.gt_path is not None:
        try:
            truth = read_ground_truth(config.gt_path)
        except (OSError, ValueError) as exc:
            log.error("ground truth: %s", exc)
            return 2
    config.output_dir.mkdir(parents=True, exist_ok=True)

    results = process_batch(paths, config)
    failures = [r for r in results if r.error is not None]
    for r in failures:
        log.error("skipped %s", r.error)

    write_detections(results, config.output_dir / "detections.csv")
    n_det = sum(len(r.detections) for r in results)
    print(f"{len(results) - len(failures)}/{len(results)} images, {n_det} stems -> {config.output_dir / 'detections.csv'}")

    if truth is not None:
        report = evaluate(results, truth, config.radius_px)
        (config.output_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        (config.output_dir / "report.txt").write_text(report.summary() + "\n")
        print(report.summary())
    if config.benchmark:
        timing = TimingReport.from_results(results)
        (config.output_dir / "timing.json").write_text(json.dumps(timing.to_dict(), indent=2) + "\n")
        (config.output_dir / "timing.txt").write_text(timing.table() + "\n")
        print(timing.table())
    return 1 if failures else 0


def bench(config: RunConfig) -> TimingReport:
    """Per-stage timing over the batch (no files written)."""
    paths = discover(config.input_dir, config.mode)
    if not paths:
        raise ValueError("no input images")
    return TimingReport.from_results(process_batch(paths, config))


# --------------------------------------------------------------------------
# synthetic corpus


def synth(
    output_dir: Path,
    n_images: int,
    n_plants: int,
    dims: tuple[int, int],
    seed: int = 0,
    rgb: bool = False,
    distribution: PlantDistribution = PlantDistribution(),
) -> list[GroundTruthStem]:
    """Write ``field_NNN_mask.png`` (and ``field_NNN.png`` photos when
    ``rgb``) plus ``gt.csv``."""
    output_dir.mkdir(parents=True, exist_ok=True)
    truth: list[GroundTruthStem] = []
    for i in range(n_images):
        image_id = f"field_{i:03d}"
        mask, gt = generate_field(n_plants, dims, distribution, seed=seed + 1000 * i, image_id=image_id)
        save_mask(mask, output_dir / f"{image_id}{MASK_TAG}.png")
        if rgb:
            save_image(Image(render_rgb(mask, seed + 1000 * i), Channels.RGB), output_dir / f"{image_id}.png")
        truth.extend(gt)
    write_ground_truth(truth, output_dir / "gt.csv")
    return truth


# --------------------------------------------------------------------------
# argument parsing


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input_dir", type=Path)
    p.add_argument("-o", "--output", type=Path, default=Path("geostem_out"), help="output directory")
    p.add_argument("--index", choices=[v.value for v in VegetationIndex], default="exg",
                   help="vegetation index, or 'external' to read binary masks")
    p.add_argument("--thresh", default="otsu", help="otsu, triangle or fixed:<bin>")
    p.add_argument("--kernel", type=int, default=9, help="closing kernel size (odd)")
    p.add_argument("--min-defect", type=float, default=5.0, help="minimum defect depth [px]")
    p.add_argument("--min-leaves", type=int, default=2)
    p.add_argument("--min-area", type=int, default=32, help="smallest component kept [px]")
    p.add_argument("--beta", type=float, default=1.2, help="bounding-box inflation for the stem check")
    p.add_argument("--angle-min", type=float, default=5.0, help="smallest leaf-pair angle [deg]")
    p.add_argument("--centroid-only", action="store_true", help="always report the object centroid")
    p.add_argument("--px-per-cm", type=float, default=20.0)
    p.add_argument("--radius-cm", type=float, default=0.5, help="true-positive radius [cm]")
    p.add_argument("--gt", type=Path, help="ground-truth CSV")
    p.add_argument("--annotate", action="store_true", help="write an overlay PNG per image")
    p.add_argument("--bench", action="store_true", help="report per-stage timings")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--nir-in-alpha", action="store_true", help="read a 4-channel PNG's alpha as NIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geostem", description="Stem detection for top-down plant images.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("detect", "detect stems and write detections.csv"),
        ("eval", "detect and score against ground truth (--gt required)"),
        ("bench", "detect and report per-stage timings"),
    ):
        _add_pipeline_args(sub.add_parser(name, help=text))
    s = sub.add_parser("synth", help="generate a synthetic field corpus")
    s.add_argument("output_dir", type=Path)
    s.add_argument("--n-images", type=int, default=10)
    s.add_argument("--n-plants", type=int, default=20)
    s.add_argument("--width", type=int, default=1280)
    s.add_argument("--height", type=int, default=960)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rgb", action="store_true", help="also write rendered photos")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    index = VegetationIndex(args.index)
    external = index is VegetationIndex.EXTERNAL
    if args.command == "eval" and args.gt is None:
        raise ValueError("eval needs --gt")
    return RunConfig(
        input_dir=args.input_dir,
        output_dir=args.output,
        mode=Mode.FROM_MASKS if external else Mode.FROM_IMAGES,
        segmentation=None if external else SegmentationConfig(index, Thresholder.parse(args.thresh)),
        detector=DetectorConfig(
            d_min=args.min_defect,
            min_leaves=args.min_leaves,
            beta=args.beta,
            angle_min=args.angle_min,
            force_centroid=args.centroid_only,
        ),
        kernel=args.kernel,
        min_area=args.min_area,
        gt_path=args.gt,
        px_per_cm=args.px_per_cm,
        radius_cm=args.radius_cm,
        annotate=args.annotate,
        benchmark=args.bench or args.command == "bench",
        threads=args.threads,
        nir_in_alpha=args.nir_in_alpha,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s")
    if args.command == "synth":
        try:
            truth = synth(args.output_dir, args.n_images, args.n_plants, (args.height, args.width), args.seed, args.rgb)
        except ValueError as exc:
            log.error("%s", exc)
            return 2
        print(f"wrote {args.n_images} masks, {len(truth)} stems -> {args.output_dir}")
        return 0
    try:
        config = config_from_args(args)
    except ValueError as exc:
        log.error("%s", exc)
        return 2
    return run(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
