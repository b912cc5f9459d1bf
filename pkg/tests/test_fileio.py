import numpy as np
import pytest

from thermiid.errors import InvalidInputError
from thermiid.fileio import read_label_png, read_pfm, read_png, write_label_png, write_pfm, write_png


def test_pfm_roundtrip_color_and_grey(tmp_path, rng):
    for shape in ((5, 7, 3), (4, 6)):
        img = rng.random(shape).astype(np.float32).astype(np.float64)
        write_pfm(tmp_path / "a.pfm", img)
        back = read_pfm(tmp_path / "a.pfm")
        np.testing.assert_array_equal(back, img)


def test_pfm_header_and_orientation(tmp_path):
    img = np.zeros((2, 3))
    img[0, 0] = 1.0  # top-left
    write_pfm(tmp_path / "g.pfm", img)
    raw = (tmp_path / "g.pfm").read_bytes()
    assert raw.startswith(b"Pf\n3 2\n-1.0\n")
    data = np.frombuffer(raw[-24:], dtype="<f4").reshape(2, 3)
    assert data[1, 0] == 1.0  # rows stored bottom-to-top


def test_pfm_big_endian_read(tmp_path):
    img = np.arange(6, dtype=">f4").reshape(2, 3)
    (tmp_path / "b.pfm").write_bytes(b"Pf\n3 2\n1.0\n" + img[::-1].tobytes())
    np.testing.assert_array_equal(read_pfm(tmp_path / "b.pfm"), img.astype(np.float64))


def test_pfm_rejects_garbage(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(InvalidInputError):
        read_pfm(tmp_path / "x.pfm")


@pytest.mark.parametrize("bitdepth,tol", [(8, 1 / 255), (16, 1 / 65535)])
def test_png_roundtrip_gamma(tmp_path, rng, bitdepth, tol):
    img = rng.random((6, 5, 3))
    write_png(tmp_path / "p.png", img, bitdepth=bitdepth)
    back = read_png(tmp_path / "p.png")
    # compare in encoded space, where quantization is uniform
    np.testing.assert_allclose(back ** (1 / 2.2), img ** (1 / 2.2), atol=tol)


def test_png_bitdepth_checked(tmp_path):
    with pytest.raises(InvalidInputError):
        write_png(tmp_path / "p.png", np.zeros((2, 2)), bitdepth=12)


def test_label_png_codes(tmp_path):
    labels = np.array([[0, 1, 2]], dtype=np.int8)
    write_label_png(tmp_path / "l.png", labels)
    grey = read_png(tmp_path / "l.png", gamma=1.0) * 255
    np.testing.assert_allclose(grey, [[0, 255, 128]])
    np.testing.assert_array_equal(read_label_png(tmp_path / "l.png"), labels)
