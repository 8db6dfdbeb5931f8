"""Field-scale evaluation and timing.

Generates a small corpus of 1280x960 field masks, runs the detector and the
centroid-only baseline, and scores both at several true-positive radii.
Stage timings follow the batch CLI's split (mask vs stem).

    python3 demos/04_field_evaluation.py [n_images]
"""
import sys
import time

import cv2
import numpy as np

from geostem.detection import DetectorConfig, detect_all
from geostem.evaluation import aggregate, cm_to_px, generate_field, match

n_images = int(sys.argv[1]) if len(sys.argv) > 1 else 10
cv2.setNumThreads(1)

fields = [generate_field(20, (960, 1280), seed=1000 * i, image_id=str(i)) for i in range(n_images)]
print(f"{n_images} images x 20 plants")

runs = {}
for name, cfg in (("intersection", DetectorConfig()), ("centroid only", DetectorConfig(force_centroid=True))):
    times, dets = [], []
    for mask, _ in fields:
        t0 = time.perf_counter()
        dets.append(detect_all(mask, cfg))
        times.append((time.perf_counter() - t0) * 1e3)
    runs[name] = dets
    print(f"{name:>13}: stem stage {np.mean(times):5.1f} ms +/- {np.std(times):4.1f} ms per image")

print(f"\n{'radius':>10} {'method':>14} {'precision':>10} {'recall':>8}")
for radius_cm in (0.25, 0.5, 1.0):
    radius = cm_to_px(radius_cm, 20.0)
    for name, dets in runs.items():
        rep = aggregate(match(d, gt, radius) for d, (_, gt) in zip(dets, fields))
        print(f"{radius_cm:7.2f} cm {name:>14} {rep.precision:10.3f} {rep.recall:8.3f}")
