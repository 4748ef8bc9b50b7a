import numpy as np
import pytest

from pvgen import Grid, IntensityVolume, LabelVolume
from pvgen.nifti import (
    load_intensity,
    load_labels,
    read_nifti,
    read_raw,
    save_intensity,
    save_labels,
    write_nifti,
    write_raw,
)


def test_float32_roundtrip_bit_exact(tmp_path, rng):
    data = rng.normal(size=(7, 5, 3)).astype(np.float32)
    path = tmp_path / "vol.nii"
    write_nifti(path, data, (0.7, 1.0, 2.5))
    back, spacing = read_nifti(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, data)
    assert spacing == pytest.approx((0.7, 1.0, 2.5))


def test_multichannel_roundtrip(tmp_path, rng):
    data = rng.normal(size=(4, 4, 4, 3)).astype(np.float32)
    path = tmp_path / "vol.nii"
    write_nifti(path, data, (1, 1, 1))
    back, _ = read_nifti(path)
    assert back.shape == (4, 4, 4, 3)
    assert np.array_equal(back, data)


@pytest.mark.parametrize("dtype", [np.uint8, np.uint16, np.int32])
def test_integer_roundtrips(tmp_path, rng, dtype):
    info = np.iinfo(dtype)
    data = rng.integers(info.min, min(info.max, 10_000), size=(6, 2, 5)).astype(dtype)
    path = tmp_path / "labels.nii"
    write_nifti(path, data, (1, 1, 1))
    back, _ = read_nifti(path)
    assert back.dtype == dtype
    assert np.array_equal(back, data)


def test_unsupported_dtype_rejected(tmp_path):
    with pytest.raises(ValueError, match="dtype"):
        write_nifti(tmp_path / "x.nii", np.zeros((2, 2, 2), np.float64), (1, 1, 1))


def test_not_a_nifti(tmp_path):
    path = tmp_path / "junk.nii"
    path.write_bytes(b"\x00" * 400)
    with pytest.raises(ValueError, match="NIfTI"):
        read_nifti(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "short.nii"
    path.write_bytes(b"\x01" * 40)
    with pytest.raises(ValueError, match="shorter"):
        read_nifti(path)


def test_raw_fallback_roundtrip(tmp_path, rng):
    data = rng.normal(size=(3, 4, 5, 2)).astype(np.float32)
    write_raw(tmp_path / "vol.raw", data, (2.0, 2.0, 4.0))
    back, spacing = read_raw(tmp_path / "vol.raw")
    assert np.array_equal(back, data)
    assert spacing == (2.0, 2.0, 4.0)
    assert (tmp_path / "vol.json").exists()


def test_volume_helpers_roundtrip(tmp_path, rng):
    grid = Grid((5, 4, 3), (1.0, 1.0, 3.0))
    img = IntensityVolume(grid, rng.normal(size=(5, 4, 3, 2)).astype(np.float32))
    save_intensity(tmp_path / "img.nii", img)
    back = load_intensity(tmp_path / "img.nii")
    assert back.grid == grid
    assert np.array_equal(back.data, img.data)

    labels = LabelVolume(grid, rng.integers(0, 4, size=(5, 4, 3)).astype(np.int32))
    save_labels(tmp_path / "seg.nii", labels)
    lback = load_labels(tmp_path / "seg.nii")
    assert lback.grid == grid
    assert np.array_equal(lback.data, labels.data)
    assert lback.label_set == labels.label_set


def test_negative_labels_use_int32(tmp_path):
    grid = Grid((2, 2, 2))
    labels = LabelVolume(grid, np.array([-1, 0, 1, 2, 3, 4, 5, 6], np.int32).reshape(2, 2, 2))
    save_labels(tmp_path / "seg.nii", labels)
    back, _ = read_nifti(tmp_path / "seg.nii")
    assert back.dtype == np.int32
    assert np.array_equal(back, labels.data)


def test_raw_helpers_via_extension(tmp_path, rng):
    grid = Grid((4, 4, 4))
    img = IntensityVolume(grid, rng.normal(size=(4, 4, 4)).astype(np.float32))
    save_intensity(tmp_path / "img.raw", img)
    back = load_intensity(tmp_path / "img.raw")
    assert np.array_equal(back.data, img.data)
