import numpy as np
import pytest
from PIL import Image

from plugnorm.core import ptns
from plugnorm.data import load_content_dir, load_grayscale, load_image_file, read_pgm, save_pgm, synthetic_texture_corpus
from plugnorm.errors import ConfigError, ImageFormatError, PlugnormIOError


def test_black_and_white_pgm(tmp_path):
    save_pgm(tmp_path / "zero.pgm", np.zeros((3, 4)))
    assert (tmp_path / "zero.pgm").read_bytes().startswith(b"P5")
    np.testing.assert_array_equal(read_pgm(tmp_path / "zero.pgm"), np.zeros((1, 3, 4)))

    save_pgm(tmp_path / "one.pgm", np.ones((1, 2, 2)))
    np.testing.assert_array_equal(read_pgm(tmp_path / "one.pgm"), np.ones((1, 2, 2)))


def test_pgm_round_trip_quantizes_to_eight_bits(tmp_path, rng):
    image = rng.uniform(size=(1, 5, 7))
    out = read_pgm(save_pgm(tmp_path / "x.pgm", image), dtype=np.float64)
    assert out.shape == image.shape
    assert np.abs(out - image).max() <= 1 / 255


def test_pgm_clamps_out_of_range_values(tmp_path):
    out = read_pgm(save_pgm(tmp_path / "x.pgm", np.array([[-1.0, 2.0]])))
    np.testing.assert_array_equal(out, [[[0.0, 1.0]]])


@pytest.mark.parametrize("raw", [b"P6\n1 1\n255\n\x00\x00\x00", b"P5\n4 4\n255\n\x00\x01", b"P5\nxx"])
def test_malformed_pgm(tmp_path, raw):
    (tmp_path / "bad.pgm").write_bytes(raw)
    with pytest.raises(ImageFormatError):
        read_pgm(tmp_path / "bad.pgm")


def test_pgm_rejects_colour_arrays(tmp_path):
    with pytest.raises(ImageFormatError):
        save_pgm(tmp_path / "x.pgm", np.zeros((3, 2, 2)))


def test_load_image_file_reads_both_formats(tmp_path, rng):
    values = rng.uniform(size=(1, 4, 4))
    ptns.save(tmp_path / "x.ptns", values)
    np.testing.assert_array_equal(load_image_file(tmp_path / "x.ptns").data, values)
    save_pgm(tmp_path / "x.pgm", values)
    assert load_image_file(tmp_path / "x.pgm").shape == (1, 4, 4)
    with pytest.raises(ImageFormatError):
        load_image_file(tmp_path / "missing.pgm")


def test_load_grayscale_converts_and_resizes(tmp_path):
    Image.new("RGB", (8, 6), (255, 255, 255)).save(tmp_path / "white.png")
    out = load_grayscale(tmp_path / "white.png", 4, 4)
    assert out.shape == (1, 4, 4)
    np.testing.assert_allclose(out, 1.0)


def test_load_grayscale_keeps_matching_ptns(tmp_path, rng):
    values = rng.uniform(size=(1, 6, 6))
    ptns.save(tmp_path / "x.ptns", values)
    np.testing.assert_array_equal(load_grayscale(tmp_path / "x.ptns", 6, 6), values)


def test_load_grayscale_rejects_garbage(tmp_path):
    (tmp_path / "x.png").write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        load_grayscale(tmp_path / "x.png", 4, 4)


def test_synthetic_corpus():
    corpus = synthetic_texture_corpus(6, 16, 12, seed=2)
    assert corpus.shape == (6, 1, 16, 12)
    assert corpus.min() >= 0.0 and corpus.max() <= 1.0
    np.testing.assert_array_equal(corpus, synthetic_texture_corpus(6, 16, 12, seed=2))
    assert synthetic_texture_corpus(0, 16, 12).shape == (0, 1, 16, 12)
    with pytest.raises(ConfigError):
        synthetic_texture_corpus(-1, 4, 4)


def test_content_directory(tmp_path):
    with pytest.raises(PlugnormIOError):
        load_content_dir(tmp_path / "missing", 8, 8)
    (tmp_path / "content").mkdir()
    with pytest.raises(PlugnormIOError):
        load_content_dir(tmp_path / "content", 8, 8)
    for index in range(3):
        Image.new("L", (10, 10), index * 100).save(tmp_path / "content" / f"{index}.png")
    images = load_content_dir(tmp_path / "content", 8, 8, limit=2)
    assert images.shape == (2, 1, 8, 8)
    np.testing.assert_allclose(images[1], 100 / 255)
