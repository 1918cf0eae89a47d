import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ocular.imagecore import (
    NoiseSpec, PGMHeaderError, PGMMaxvalError, PGMTruncatedError, add_noise, gamma_correct,
    load_pgm, read_frames, save_pgm, synth_eye, synth_grating, synth_step_edge, to_polar,
    write_frames,
)

images = hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12))


def test_p5_bytes(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    np.testing.assert_array_equal(load_pgm(p), [[0, 255], [128, 64]])


def test_p2_single_pixel(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_text("P2\n# comment\n1 1\n255\n255\n")
    assert load_pgm(p).tolist() == [[255.0]]


@pytest.mark.parametrize("binary", [True, False])
@given(img=images)
def test_roundtrip(tmp_path_factory, binary, img):
    p = tmp_path_factory.mktemp("rt") / "x.pgm"
    save_pgm(p, img, binary=binary)
    np.testing.assert_array_equal(load_pgm(p), img.astype(float))


def test_bad_files(tmp_path):
    bad = {"hdr.pgm": b"P7\n1 1\n255\n\x00", "short.pgm": b"P5\n2 2\n255\n\x00",
           "maxval.pgm": b"P2\n1 1\n100\n200\n"}
    for name, data in bad.items():
        (tmp_path / name).write_bytes(data)
    with pytest.raises(PGMHeaderError):
        load_pgm(tmp_path / "hdr.pgm")
    with pytest.raises(PGMTruncatedError):
        load_pgm(tmp_path / "short.pgm")
    with pytest.raises(PGMMaxvalError):
        load_pgm(tmp_path / "maxval.pgm")


def test_frames_are_ordered(tmp_path):
    imgs = [np.full((3, 4), v) for v in (10, 20, 30)]
    write_frames(tmp_path, imgs)
    frames = read_frames(tmp_path)
    assert [k for k, _ in frames] == [1, 2, 3]
    assert [f[0, 0] for _, f in frames] == [10, 20, 30]
    assert (tmp_path / "frame_000001.pgm").exists()


@given(st.floats(0.2, 5.0))
def test_gamma_fixed_points(g):
    out = gamma_correct(np.array([[0.0, 255.0]]), g)
    assert out[0, 0] == 0 and out[0, 1] == pytest.approx(255.0, abs=1e-12)


def test_gamma_value():
    assert gamma_correct(np.array([[64.0]]), 2.0)[0, 0] == pytest.approx(255 * np.sqrt(64 / 255), abs=1e-12)
    assert gamma_correct(np.array([[64.0]]), 2.0)[0, 0] == pytest.approx(127.75, abs=0.01)


def test_polar_constant_and_center():
    img = np.full((21, 21), 7.0)
    np.testing.assert_allclose(to_polar(img, (10, 10), 8).samples, 7.0, rtol=0, atol=1e-12)
    img[10, 10] = 99.0
    ring = to_polar(img, (10, 10), 1).samples
    assert ring.shape[0] == 1 and np.all(ring == 99.0)


def test_polar_dark_disc():
    yy, xx = np.indices((31, 31))
    img = np.where(np.hypot(xx - 15, yy - 15) <= 5, 0.0, 200.0)
    s = to_polar(img, (15, 15), 12).samples
    assert np.all(s[:5] == 0.0)
    # bilinear footprint reaches sqrt(2) px: rings from r = 7 sample only the bright field
    np.testing.assert_allclose(s[7:], 200.0, rtol=0, atol=1e-9)
    assert np.all(s[6] > 100.0)


def test_noise_properties():
    img = np.zeros((512, 512))
    assert np.array_equal(add_noise(img, NoiseSpec(0.0, 1)), img)
    out = add_noise(img, NoiseSpec(25.0, 3))
    assert abs(np.var(out - img) / 25.0 - 1) < 0.05
    np.testing.assert_array_equal(out, add_noise(img, NoiseSpec(25.0, 3)))
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


def test_step_edges():
    a = synth_step_edge(16, 8, 0, 1)
    assert (a.min(), a.max()) == (0, 1)
    b = synth_step_edge(16, 8, 254, 255)
    assert (b.min(), b.max()) == (254, 255)
    assert np.ptp(synth_step_edge(16, 8, 9, 9)) == 0


def test_grating():
    g = synth_grating(16, 4, 16, 0.0)
    assert np.all(g == g[0])  # column-constant
    assert np.count_nonzero(np.diff(g[0] > 0)) == 1  # single cycle
    d = synth_grating(20, 3, 4, 1.0, amplitude=100.0)
    x = np.arange(20)
    np.testing.assert_allclose(d[0], 100.0 * ((x % 4) < 2) / (x + 1.0), rtol=0, atol=1e-12)


def test_eye_closed_has_no_iris():
    eye = synth_eye(64, 48, (32, 24), 5, 11, 1.0, supersample=1)
    levels = eye.image
    assert not np.any(np.isin(levels, [25.0, 95.0]))


def test_eye_symmetry():
    eye = synth_eye(65, 41, (32, 20), 6, 13, 0.0)
    np.testing.assert_allclose(eye.image, eye.image[:, ::-1], atol=1e-9)


def test_eye_pupil_area():
    eye = synth_eye(64, 48, (31.5, 23.5), 5, 12, 0.0)
    # pupil level 25, iris 95: anti-aliased boundary splits at the midpoint
    area = np.sum(eye.image < 60)
    assert abs(area - np.pi * 25) / (np.pi * 25) < 0.05
