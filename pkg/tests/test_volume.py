import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ifct.errors import DimensionMismatch, FormatError, IoError
from ifct.volume import (
    Mask, Volume, check_same_grid, linear_index, mask_from_bytes, mask_to_bytes, read_mask,
    read_volume, voxel_index, voxel_volume_mm3, volume_from_bytes, volume_to_bytes, write_mask,
    write_volume,
)


def header(magic, dims, spacing):
    return struct.pack("<4s3I3f", magic, *dims, *spacing)


def test_minimal_file_reads_single_voxel(tmp_path):
    path = tmp_path / "one.ctv"
    path.write_bytes(header(b"CTV1", (1, 1, 1), (1.0, 1.0, 1.0)) + struct.pack("<h", 0))
    vol = read_volume(path)
    assert vol.dims == (1, 1, 1)
    assert vol.voxels[0, 0, 0] == 0


def test_wrong_magic_rejected():
    data = header(b"CTM1", (1, 1, 1), (1.0, 1.0, 1.0)) + b"\0\0"
    with pytest.raises(FormatError, match="magic"):
        volume_from_bytes(data)


def test_short_payload_rejected():
    data = header(b"CTV1", (2, 2, 2), (1.0, 1.0, 1.0)) + b"\0\0" * 7
    with pytest.raises(FormatError, match="truncated"):
        volume_from_bytes(data)


def test_trailing_bytes_rejected():
    data = header(b"CTV1", (1, 1, 1), (1.0, 1.0, 1.0)) + b"\0\0\0\0"
    with pytest.raises(FormatError):
        volume_from_bytes(data)


@pytest.mark.parametrize("dims,spacing", [((0, 1, 1), (1, 1, 1)), ((1, 1, 1), (0.0, 1, 1)),
                                          ((1, 1, 1), (1, -2.0, 1)), ((1, 1, 1), (1, 1, float("nan")))])
def test_bad_header_values(dims, spacing):
    n = max(dims[0] * dims[1] * dims[2], 0)
    with pytest.raises(FormatError):
        volume_from_bytes(header(b"CTV1", dims, spacing) + b"\0\0" * n)


def test_file_length_for_3x2x1(tmp_path):
    path = tmp_path / "v.ctv"
    write_volume(Volume(np.arange(6, dtype=np.int16).reshape(3, 2, 1)), path)
    assert path.stat().st_size == 28 + 12


def test_payload_is_x_fastest_little_endian():
    arr = np.zeros((2, 2, 1), dtype=np.int16)
    arr[1, 0, 0] = 1
    arr[0, 1, 0] = 2
    arr[1, 1, 0] = -3
    payload = volume_to_bytes(Volume(arr))[28:]
    assert struct.unpack("<4h", payload) == (0, 1, 2, -3)


def test_writes_are_byte_identical(tmp_path):
    vol = Volume(np.arange(24, dtype=np.int16).reshape(2, 3, 4), (0.5, 0.5, 2.0))
    write_volume(vol, tmp_path / "a.ctv")
    write_volume(vol, tmp_path / "b.ctv")
    assert (tmp_path / "a.ctv").read_bytes() == (tmp_path / "b.ctv").read_bytes()


def test_mask_rejects_value_two():
    data = header(b"CTK1", (2, 1, 1), (1.0, 1.0, 1.0)) + bytes([1, 2])
    with pytest.raises(FormatError, match="invalid mask value"):
        mask_from_bytes(data)


def test_empty_mask_round_trip(tmp_path):
    mask = Mask(np.zeros((4, 4, 4), dtype=bool))
    write_mask(mask, tmp_path / "m.ctk")
    back = read_mask(tmp_path / "m.ctk")
    assert back.popcount == 0
    assert back == mask


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        read_volume(tmp_path / "nope.ctv")


def test_unwritable_path_is_io_error(tmp_path):
    with pytest.raises(IoError):
        write_volume(Volume(np.zeros((1, 1, 1))), tmp_path / "missing-dir" / "x.ctv")


@pytest.mark.parametrize("spacing,expected", [((1, 1, 1), 1.0), ((0.5, 0.5, 2.0), 0.5), ((0.7, 0.7, 3.0), 1.47)])
def test_voxel_volume(spacing, expected):
    # spacing is held at float32 precision, hence the tolerance
    assert voxel_volume_mm3(Volume(np.zeros((1, 1, 1)), spacing)) == pytest.approx(expected, rel=1e-6)


def test_grid_guard():
    a = Volume(np.zeros((2, 2, 2)))
    with pytest.raises(DimensionMismatch):
        check_same_grid(a, Mask(np.zeros((2, 2, 3), dtype=bool)))
    with pytest.raises(DimensionMismatch):
        check_same_grid(a, Mask(np.zeros((2, 2, 2), dtype=bool), (1, 1, 2)))


def test_volume_rejects_out_of_range_values():
    with pytest.raises(FormatError):
        Volume(np.array([[[40000]]]))


def test_volume_is_immutable():
    vol = Volume(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        vol.voxels[0, 0, 0] = 5


dims_st = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))
spacing_st = st.tuples(*[st.floats(0.01, 10.0, allow_nan=False, allow_infinity=False)] * 3)


@given(dims_st.flatmap(lambda d: hnp.arrays(np.int16, d)), spacing_st)
def test_volume_round_trip(arr, spacing):
    vol = Volume(arr, spacing)
    data = volume_to_bytes(vol)
    back = volume_from_bytes(data)
    assert back == vol
    assert volume_to_bytes(back) == data


@given(dims_st.flatmap(lambda d: hnp.arrays(np.bool_, d)), spacing_st)
def test_mask_round_trip(arr, spacing):
    mask = Mask(arr, spacing)
    data = mask_to_bytes(mask)
    assert mask_from_bytes(data) == mask
    assert len(data) == 28 + arr.size


@given(dims_st)
def test_linear_index_is_a_bijection(dims):
    nx, ny, nz = dims
    seen = set()
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                n = linear_index(i, j, k, dims)
                assert voxel_index(n, dims) == (i, j, k)
                seen.add(n)
    assert seen == set(range(nx * ny * nz))
