"""Stem detection for top-down images of young plants.

A vegetation mask is closed and split into plant components; leaves are
cut at the deepest convexity defects of each component's contour, and the
stem is taken as the mean intersection of the leaf directions, with the
component centroid as fallback.
"""

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
from .detection import (
    DetectorConfig,
    Leaf,
    PlantObject,
    StemDetection,
    StemMethod,
    build_object,
    centroid,
    detect_all,
    detect_objects,
    estimate_stem,
    extract_leaves,
    intersect_directions,
)
from .evaluation import (
    GroundTruthStem,
    MatchReport,
    PlantDistribution,
    SynthPlantSpec,
    aggregate,
    generate_field,
    generate_plant,
    match,
)
from .raster import Channels, GrayMap, Image, ImageFormatError, load_image
from .segmentation import (
    SegmentationConfig,
    Thresholder,
    VegetationIndex,
    exg,
    ndvi,
    otsu_threshold,
    quantize,
    segment,
    triangle_threshold,
)

__version__ = "0.1.0"
