import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geostem.bingeo import close, connected_components, make_ellipse_kernel
from geostem.detection import centroid
from geostem.evaluation import (
    GroundTruthStem,
    MatchReport,
    PlantDistribution,
    PlantSpecError,
    SynthPlantSpec,
    aggregate,
    cm_to_px,
    generate_field,
    generate_plant,
    match,
    read_ground_truth,
    render_rgb,
    sample_field,
    width_for_span,
    write_ground_truth,
)


def test_match_examples():
    r = 10.0
    assert match([(3.0, 0.0)], [(0.0, 0.0)], r) == MatchReport(1, 0, 0, r)
    assert match([(11.0, 0.0)], [(0.0, 0.0)], r) == MatchReport(0, 1, 1, r)
    assert match([(2.0, 0.0), (0.0, 3.0)], [(0.0, 0.0)], r) == MatchReport(1, 1, 0, r)
    with pytest.raises(ValueError):
        match([], [], 0)


def test_match_is_globally_greedy():
    # d0 is nearest to t0 but t0's nearest is d1; greedy-by-distance pairs
    # d1-t0 first and then d0-t1
    dets = [(0.0, 0.0), (0.0, 5.0)]
    truth = [(0.0, 6.0), (0.0, -4.0)]
    assert match(dets, truth, 10).tp == 2


def test_match_empty_sides():
    assert match([], [(1, 1)], 5) == MatchReport(0, 0, 1, 5.0)
    assert match([(1, 1)], [], 5) == MatchReport(0, 1, 0, 5.0)
    rep = match([], [], 5)
    assert rep.precision == 0.0 and rep.recall == 0.0


points = st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), max_size=8)


@settings(max_examples=100, deadline=None)
@given(points, points, st.floats(0.5, 30), st.floats(0.25, 8))
def test_match_counts_and_scale(dets, truth, radius, s):
    rep = match(dets, truth, radius)
    assert rep.tp + rep.fp == len(dets) and rep.tp + rep.fn == len(truth)
    scaled = match([(a * s, b * s) for a, b in dets], [(a * s, b * s) for a, b in truth], radius * s)
    # pairs sitting exactly on the radius can flip under float scaling
    if not any(abs(math.dist(d, t) - radius) < 1e-9 * radius for d in dets for t in truth):
        assert (scaled.tp, scaled.fp, scaled.fn) == (rep.tp, rep.fp, rep.fn)


def test_cm_to_px():
    assert cm_to_px(0.5, 20) == 10
    assert cm_to_px(0.5, 1) == 0.5
    with pytest.raises(ValueError):
        cm_to_px(0, 20)


def test_aggregate():
    rep = aggregate([MatchReport(7, 3, 3, 10.0)])
    assert rep.precision == pytest.approx(0.7) and rep.recall == pytest.approx(0.7)
    rep = aggregate([MatchReport(1, 0, 1, 10.0), MatchReport(1, 2, 0, 10.0)])
    assert (rep.tp, rep.fp, rep.fn) == (2, 2, 1)
    assert rep.precision == 0.5 and rep.recall == pytest.approx(2 / 3)
    assert aggregate([]) == MatchReport(0, 0, 0, 0.0)
    with pytest.raises(ValueError):
        aggregate([MatchReport(1, 0, 0, 10.0), MatchReport(1, 0, 0, 5.0)])
    assert set(rep.to_dict()) == {"tp", "fp", "fn", "precision", "recall", "radius_px"}


def test_ground_truth_csv(tmp_path):
    truth = [GroundTruthStem("a", (1.25, 2.5)), GroundTruthStem("b", (3.0, 4.0)), GroundTruthStem("a", (9.0, 9.5))]
    path = tmp_path / "gt.csv"
    write_ground_truth(truth, path)
    raw = path.read_bytes()
    assert raw.startswith(b"image_id,stem_row,stem_col\n") and b"\r" not in raw
    back = read_ground_truth(path)
    assert [t.position for t in back["a"]] == [(1.25, 2.5), (9.0, 9.5)]
    bad = tmp_path / "bad.csv"
    bad.write_text("id,row,col\na,1,2\n")
    with pytest.raises(ValueError):
        read_ground_truth(bad)
    bad.write_text("image_id,stem_row,stem_col\na,1,x\n")
    with pytest.raises(ValueError):
        read_ground_truth(bad)


def _spec(k=4, **kw):
    base = dict(stem=(60.0, 60.0), leaf_count=k, leaf_length=40, leaf_width=width_for_span(40, k, 0.4), phase=0.0)
    base.update(kw)
    return SynthPlantSpec(**base)


def test_generate_plant_deterministic():
    spec = _spec(angle_jitter=3, length_jitter=0.1, phase=None)
    a, ga = generate_plant(spec, 5, (121, 121))
    b, gb = generate_plant(spec, 5, (121, 121))
    assert np.array_equal(a, b) and ga == gb
    assert ga.position == (60.0, 60.0)
    assert not np.array_equal(a, generate_plant(spec, 6, (121, 121))[0])


def test_generate_plant_fourfold_symmetry():
    mask, _ = generate_plant(_spec(), 0, (121, 121))
    # rasterized with floating point trig, so allow a handful of edge pixels
    assert np.count_nonzero(mask ^ np.rot90(mask)) <= 0.01 * mask.sum()
    assert len(connected_components(mask, 1)) == 1


def test_generate_plant_asymmetric_centroid_shift():
    spec = _spec(k=3, asymmetry=(2.0, 1.0, 1.0), leaf_width=width_for_span(40, 3, 0.3))
    mask, gt = generate_plant(spec, 0, (181, 181))
    (comp,) = connected_components(mask, 1)
    assert math.dist(centroid(comp), gt.position) > spec.leaf_length / 6


def test_generate_plant_rejects_overlap():
    with pytest.raises(PlantSpecError):
        generate_plant(_spec(k=6, leaf_width=40), 0)
    with pytest.raises(ValueError):
        SynthPlantSpec((0, 0), 1, 10, 5)


def test_generate_field():
    mask, truth = generate_field(0, (100, 120), seed=3)
    assert not mask.any() and truth == []
    mask, truth = generate_field(20, (960, 1280), seed=3, image_id="x")
    assert len(truth) == 20 and {t.image_id for t in truth} == {"x"}
    closed = close(mask, make_ellipse_kernel(9))
    assert len(connected_components(closed)) == 20
    again, truth2 = generate_field(20, (960, 1280), seed=3, image_id="x")
    assert np.array_equal(mask, again) and truth == truth2
    for t in truth:
        assert 0 <= t.position[0] < 960 and 0 <= t.position[1] < 1280


def test_sample_field_errors():
    with pytest.raises(PlantSpecError):
        sample_field(1, (40, 40))
    with pytest.raises(PlantSpecError):
        sample_field(200, (300, 300), max_tries=50)


def test_distribution_asymmetric_fraction():
    rng = np.random.default_rng(0)
    specs = [PlantDistribution().sample(rng) for _ in range(400)]
    frac = np.mean([s.is_asymmetric for s in specs])
    assert 0.2 < frac < 0.4
    assert all(3 <= s.leaf_count <= 6 for s in specs)


def test_render_rgb_is_green_on_soil():
    mask = np.zeros((20, 20), bool)
    mask[5:10, 5:10] = True
    img = render_rgb(mask, 0).astype(int)
    exg = 2 * img[..., 1] - img[..., 0] - img[..., 2]
    assert exg[mask].min() > exg[~mask].max()
