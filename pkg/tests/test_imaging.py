import numpy as np
import pytest
from PIL import Image

from morsynth.imaging import (
    BinaryMask,
    DepthMap,
    RgbImage,
    ScalarMap,
    from_byte_domain,
    load_depth,
    load_image,
    load_map,
    load_mask,
    read_pfm,
    round_half_up_bytes,
    save_depth,
    save_image,
    save_map,
    save_mask,
    to_byte_domain,
    write_pfm,
)


def test_byte_round_trip_exhaustive():
    # every representable byte survives from_byte_domain -> to_byte_domain
    all_bytes = np.arange(256, dtype=np.uint8).reshape(16, 16)
    raster = np.stack([all_bytes] * 3, axis=2)
    assert np.array_equal(to_byte_domain(from_byte_domain(raster)), raster)


def test_to_byte_domain_rounding():
    img = RgbImage(np.array([[[0.0, 1.0, 0.5]]]))
    assert to_byte_domain(img).tolist() == [[[0, 255, 128]]]
    # 0.5 * 255 = 127.5 rounds half up to 128
    assert round_half_up_bytes(127.5) == 128
    assert round_half_up_bytes(127.49999) == 127
    assert round_half_up_bytes(-3.0) == 0
    assert round_half_up_bytes(300.0) == 255


def test_from_byte_domain_values():
    raster = np.full((2, 2, 3), 128, dtype=np.uint8)
    img = from_byte_domain(raster)
    assert img.data[0, 0, 0] == 128 / 255
    assert from_byte_domain(np.zeros((1, 1, 3), np.uint8)).data.max() == 0.0
    assert from_byte_domain(np.full((1, 1, 3), 255, np.uint8)).data.min() == 1.0


def test_from_byte_domain_rejects_out_of_range():
    with pytest.raises(ValueError):
        from_byte_domain(np.full((1, 1, 3), 300, dtype=np.int32))
    with pytest.raises(ValueError):
        from_byte_domain(np.full((1, 1, 3), 0.5))


def test_rgb_image_validation():
    with pytest.raises(ValueError):
        RgbImage(np.zeros((4, 4)))  # missing channel axis
    with pytest.raises(ValueError):
        RgbImage(np.full((2, 2, 3), 1.5))
    with pytest.raises(ValueError):
        RgbImage(np.full((2, 2, 3), -0.1))
    with pytest.raises(ValueError):
        RgbImage(np.full((2, 2, 3), np.nan))


def test_images_are_immutable():
    img = RgbImage(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0


def test_scalar_map_and_mask_validation():
    ScalarMap(np.linspace(0, 1, 12).reshape(3, 4))
    with pytest.raises(ValueError):
        ScalarMap(np.full((2, 2), 2.0))
    BinaryMask(np.array([[0, 1], [1, 0]], dtype=np.uint8))
    with pytest.raises(ValueError):
        BinaryMask(np.array([[0, 2]], dtype=np.uint8))
    with pytest.raises(ValueError):
        BinaryMask(np.array([[0.5, 1.0]]))


def test_depth_map_validation():
    DepthMap(np.full((2, 2), 10.0))
    with pytest.raises(ValueError):
        DepthMap(np.array([[1.0, -0.5]]))
    with pytest.raises(ValueError):
        DepthMap(np.array([[np.inf, 1.0]]))


def test_png_round_trip(tmp_path, rng):
    raster = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
    path = tmp_path / "img.png"
    save_image(from_byte_domain(raster), path)
    assert np.array_equal(to_byte_domain(load_image(path)), raster)


def test_load_image_rejects_16_bit(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.zeros((4, 4), dtype=np.uint16) + 1000).save(path)
    with pytest.raises(ValueError, match="bit depth|mode"):
        load_image(path)


def test_load_image_rejects_missing_and_truncated(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")
    bad = tmp_path / "trunc.png"
    good = tmp_path / "good.png"
    save_image(RgbImage(np.zeros((8, 8, 3))), good)
    bad.write_bytes(good.read_bytes()[:40])
    with pytest.raises(OSError):
        load_image(bad)


def test_map_and_mask_png_round_trip(tmp_path):
    values = ScalarMap(np.arange(256, dtype=np.float64).reshape(16, 16) / 255.0)
    save_map(values, tmp_path / "map.png")
    loaded = load_map(tmp_path / "map.png")
    assert np.array_equal(loaded.data, values.data)

    mask = BinaryMask((np.arange(20).reshape(4, 5) % 2).astype(np.uint8))
    save_mask(mask, tmp_path / "mask.png")
    assert np.array_equal(load_mask(tmp_path / "mask.png").data, mask.data)


def test_load_mask_rejects_gray_values(tmp_path):
    Image.fromarray(np.full((3, 3), 7, dtype=np.uint8), mode="L").save(tmp_path / "gray.png")
    with pytest.raises(ValueError):
        load_mask(tmp_path / "gray.png")


def test_pfm_round_trip(tmp_path, rng):
    depth = rng.random((6, 9)) * 80.0
    write_pfm(depth, tmp_path / "d.pfm")
    back = read_pfm(tmp_path / "d.pfm")
    assert back.shape == depth.shape
    assert np.allclose(back, depth, atol=1e-5)  # float32 storage


def test_pfm_constant(tmp_path):
    write_pfm(np.full((3, 4), 10.0), tmp_path / "d.pfm")
    depth = load_depth(tmp_path / "d.pfm")
    assert np.all(depth.data == 10.0)


def test_pfm_rejects_color_and_truncation(tmp_path):
    color = tmp_path / "color.pfm"
    color.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
    with pytest.raises(ValueError, match="Pf"):
        read_pfm(color)
    short = tmp_path / "short.pfm"
    short.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 10)
    with pytest.raises(ValueError, match="truncated"):
        read_pfm(short)


def test_load_depth_rejects_nan(tmp_path):
    path = tmp_path / "nan.pfm"
    arr = np.full((2, 2), np.nan, dtype="<f4")
    path.write_bytes(b"Pf\n2 2\n-1.0\n" + arr[::-1].tobytes())
    with pytest.raises(ValueError):
        load_depth(path)


def test_load_depth_16_bit_png_scale(tmp_path):
    path = tmp_path / "d16.png"
    Image.fromarray(np.full((4, 4), 1000, dtype=np.uint16)).save(path)
    depth = load_depth(path, png_scale=0.01)
    assert np.all(depth.data == 10.0)
    with pytest.raises(ValueError, match="scale"):
        load_depth(path)


def test_load_depth_unknown_format(tmp_path):
    path = tmp_path / "d.exr"
    path.write_bytes(b"whatever")
    with pytest.raises(ValueError, match="format"):
        load_depth(path)


def test_save_depth_round_trip(tmp_path):
    depth = DepthMap(np.linspace(0.0, 50.0, 24).reshape(4, 6))
    save_depth(depth, tmp_path / "out.pfm")
    assert np.allclose(load_depth(tmp_path / "out.pfm").data, depth.data, atol=1e-4)
