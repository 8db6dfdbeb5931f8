import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from geostem.detection import detect_objects
from geostem.raster import (
    CONTOUR_COLOR,
    STEM_COLOR,
    Channels,
    Image,
    ImageFormatError,
    load_image,
    mask_from_image,
    save_annotated,
    save_image,
    save_mask,
)


def test_image_validates_layout():
    with pytest.raises(ImageFormatError):
        Image(np.zeros((2, 2, 3), np.uint8), Channels.GRAY)
    with pytest.raises(ImageFormatError):
        Image(np.zeros((2, 2), np.int16), Channels.GRAY)
    with pytest.raises(ImageFormatError):
        Image(np.zeros((0, 4), np.uint8), Channels.GRAY)
    img = Image(np.zeros((2, 3), np.uint8), Channels.GRAY)
    assert img.data.shape == (2, 3, 1)
    assert not img.data.flags.writeable
    assert (img.height, img.width) == (2, 3)


def test_channel_lookup():
    data = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    img = Image(data, Channels.RGBN)
    assert np.array_equal(img.channel("N"), data[:, :, 3])
    with pytest.raises(ValueError):
        Image(data[:, :, :3], Channels.RGB).channel("N")


def test_load_pgm_gray(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 0, 255]))
    img = load_image(path)
    assert img.channels is Channels.GRAY
    assert (img.width, img.height) == (2, 2)
    assert img.data[:, :, 0].tolist() == [[0, 255], [0, 255]]


def test_load_rgb_png(tmp_path):
    path = tmp_path / "g.png"
    data = np.zeros((10, 10, 3), np.uint8)
    data[..., 1] = 255
    PILImage.fromarray(data).save(path)
    img = load_image(path)
    assert img.channels is Channels.RGB
    assert (img.data == (0, 255, 0)).all()


def test_16bit_png_rejected(tmp_path):
    path = tmp_path / "deep.png"
    PILImage.fromarray(np.full((4, 4), 4000, np.uint16)).save(path)
    with pytest.raises(ImageFormatError, match="unsupported bit depth"):
        load_image(path)


def test_rgba_alpha_as_nir(tmp_path):
    path = tmp_path / "rgbn.png"
    data = np.random.default_rng(0).integers(0, 256, (5, 6, 4), dtype=np.uint8)
    PILImage.fromarray(data, mode="RGBA").save(path)
    assert load_image(path).channels is Channels.RGB
    img = load_image(path, nir_in_alpha=True)
    assert img.channels is Channels.RGBN
    assert np.array_equal(img.channel("N"), data[:, :, 3])


def test_unreadable_and_truncated(tmp_path):
    missing = tmp_path / "nope.png"
    with pytest.raises(ImageFormatError):
        load_image(missing)
    good = tmp_path / "ok.png"
    PILImage.fromarray(np.zeros((40, 40, 3), np.uint8)).save(good)
    blob = good.read_bytes()
    for cut in (8, 30, len(blob) // 2):
        bad = tmp_path / f"cut{cut}.png"
        bad.write_bytes(blob[:cut])
        with pytest.raises(ImageFormatError):
            load_image(bad)
    other = tmp_path / "x.bmp"
    PILImage.fromarray(np.zeros((4, 4), np.uint8)).save(other, format="BMP")
    with pytest.raises(ImageFormatError, match="unsupported format"):
        load_image(other)


@pytest.mark.parametrize("value", [False, True])
def test_save_mask_pgm_payload(tmp_path, value):
    path = tmp_path / "m.pgm"
    save_mask(np.full((3, 3), value), path)
    assert path.read_bytes()[-9:] == bytes([255 if value else 0] * 9)


@settings(max_examples=40, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))), st.sampled_from([".png", ".pgm"]))
def test_mask_roundtrip(tmp_path_factory, mask, suffix):
    path = tmp_path_factory.mktemp("rt") / f"m{suffix}"
    save_mask(mask, path)
    assert np.array_equal(mask_from_image(load_image(path)), mask)


def test_save_image_rgbn_roundtrip(tmp_path):
    data = np.random.default_rng(1).integers(0, 256, (4, 5, 4), dtype=np.uint8)
    save_image(Image(data, Channels.RGBN), tmp_path / "i.png")
    back = load_image(tmp_path / "i.png", nir_in_alpha=True)
    assert np.array_equal(back.data, data)


def _cross_mask():
    m = np.zeros((41, 41), bool)
    m[18:23, 4:37] = True
    m[4:37, 18:23] = True
    return m


def test_annotated_no_objects_is_identity(tmp_path):
    data = np.random.default_rng(2).integers(0, 256, (12, 9, 3), dtype=np.uint8)
    save_annotated(Image(data, Channels.RGB), [], [], tmp_path / "a.png")
    assert np.array_equal(np.array(PILImage.open(tmp_path / "a.png")), data)


def test_annotated_marks_contour_and_stem(tmp_path):
    mask = _cross_mask()
    pairs = detect_objects(mask, m=1)
    img = Image(np.where(mask, 200, 0).astype(np.uint8), Channels.GRAY)
    save_annotated(img, [o for o, _ in pairs], [d for _, d in pairs], tmp_path / "a.png")
    out = np.array(PILImage.open(tmp_path / "a.png"))
    r, c = (int(round(v)) for v in pairs[0][1].position)
    assert tuple(out[r, c]) == STEM_COLOR
    # contour pixels not covered by the hull or markers keep the contour color
    pts = pairs[0][0].contour.points
    colors = {tuple(out[p[0], p[1]]) for p in pts}
    assert CONTOUR_COLOR in colors


def test_annotated_clamps_stem(tmp_path):
    from geostem.detection import StemDetection, StemMethod

    img = Image(np.zeros((5, 5), np.uint8), Channels.GRAY)
    stem = StemDetection((-3.0, 9.0), StemMethod.CENTROID_FALLBACK, 0, 0)
    save_annotated(img, [], [stem], tmp_path / "a.png")
    out = np.array(PILImage.open(tmp_path / "a.png"))
    assert tuple(out[0, 4]) == STEM_COLOR
