"""Why not just take the center of mass?

One leaf of each rosette is stretched by a growing factor. The centroid
drifts toward the long leaf while the intersection of leaf directions stays
near the stem.

    python3 demos/03_stem_vs_centroid.py
"""
import numpy as np

from geostem.detection import StemMethod, centroid, detect_objects
from geostem.evaluation import SynthPlantSpec, generate_plant, width_for_span

L = 35.0
print(f"{'factor':>6} {'intersection [px]':>18} {'centroid [px]':>14} {'wins':>6} {'fallbacks':>9}")
for factor in (1.0, 1.25, 1.5, 2.0, 2.5):
    e_li, e_ce, fallbacks = [], [], 0
    for seed in range(60):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 7))
        mult = [1.0] * k
        mult[int(rng.integers(k))] = factor
        spec = SynthPlantSpec(stem=(110 + rng.random(), 110 + rng.random()), leaf_count=k,
                              leaf_length=L, leaf_width=width_for_span(L, k, 0.4),
                              angle_jitter=3, length_jitter=0.05, asymmetry=tuple(mult))
        mask, gt = generate_plant(spec, seed, (221, 221))
        ((obj, det),) = detect_objects(mask)
        fallbacks += det.method is StemMethod.CENTROID_FALLBACK
        e_li.append(np.hypot(*np.subtract(det.position, gt.position)))
        e_ce.append(np.hypot(*np.subtract(centroid(obj.component), gt.position)))
    wins = np.mean(np.array(e_li) < np.array(e_ce))
    print(f"{factor:6.2f} {np.mean(e_li):18.2f} {np.mean(e_ce):14.2f} {wins:6.0%} {fallbacks:9d}")
