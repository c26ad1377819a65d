"""Voxel volumes and binary masks with physical spacing, plus the CTV1/CTK1 file formats.

Arrays are held with shape ``(nx, ny, nz)`` and indexed ``[i, j, k]``. On disk the
payload is x-fastest, i.e. the Fortran-order ravel of that array, so the linear
index of voxel ``(i, j, k)`` is ``i + nx * (j + ny * k)``.

Header layout (little-endian, 28 bytes)::

    [0, 4)    magic, b"CTV1" for volumes or b"CTK1" for masks
    [4, 16)   nx, ny, nz as uint32
    [16, 28)  sx, sy, sz as float32, millimetres per voxel
    [28, ...) int16 HU voxels (CTV1) or uint8 labels in {0, 1} (CTK1)
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, FormatError, IoError

VOLUME_MAGIC = b"CTV1"
MASK_MAGIC = b"CTK1"
HEADER = struct.Struct("<4s3I3f")
HEADER_SIZE = HEADER.size  # 28

Dims = tuple[int, int, int]
Spacing = tuple[float, float, float]


def _check_dims(dims) -> Dims:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise FormatError(f"dims must be three positive integers, got {dims}")
    if any(d >= 2**32 for d in dims):
        raise FormatError(f"dims exceed uint32 range: {dims}")
    return dims


def _check_spacing(spacing) -> Spacing:
    # spacing is stored as float32; round here so in-memory values survive a write/read
    values = tuple(float(np.float32(s)) for s in spacing)
    if len(values) != 3 or not all(math.isfinite(s) and s > 0 for s in values):
        raise FormatError(f"spacing must be three finite positive reals, got {tuple(spacing)}")
    return values


@dataclass(frozen=True, eq=False)
class Volume:
    """CT intensities in Hounsfield units on a regular grid."""

    voxels: np.ndarray
    spacing_mm: Spacing

    def __init__(self, voxels, spacing_mm=(1.0, 1.0, 1.0)):
        arr = np.asarray(voxels)
        if arr.ndim != 3:
            raise FormatError(f"volume array must be 3-D, got shape {arr.shape}")
        _check_dims(arr.shape)
        if arr.dtype != np.int16:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
                raise FormatError("volume contains non-finite values")
            if arr.size and (arr.min() < -32768 or arr.max() > 32767):
                raise FormatError("volume values outside int16 range")
            arr = arr.astype(np.int16)
        arr = np.array(arr, dtype=np.int16, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "voxels", arr)
        object.__setattr__(self, "spacing_mm", _check_spacing(spacing_mm))

    @property
    def dims(self) -> Dims:
        return tuple(int(d) for d in self.voxels.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Volume):
            return NotImplemented
        return (self.spacing_mm == other.spacing_mm
                and self.dims == other.dims
                and bool(np.array_equal(self.voxels, other.voxels)))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Volume(dims={self.dims}, spacing_mm={self.spacing_mm})"


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary label grid sharing the geometry of a volume."""

    voxels: np.ndarray
    spacing_mm: Spacing

    def __init__(self, voxels, spacing_mm=(1.0, 1.0, 1.0)):
        arr = np.asarray(voxels)
        if arr.ndim != 3:
            raise FormatError(f"mask array must be 3-D, got shape {arr.shape}")
        _check_dims(arr.shape)
        if arr.dtype != np.bool_:
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise FormatError("invalid mask value: voxels must be 0 or 1")
            arr = arr.astype(bool)
        arr = np.array(arr, dtype=bool, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "voxels", arr)
        object.__setattr__(self, "spacing_mm", _check_spacing(spacing_mm))

    @classmethod
    def empty_like(cls, grid: Union["Volume", "Mask"]) -> "Mask":
        return cls(np.zeros(grid.dims, dtype=bool), grid.spacing_mm)

    @property
    def dims(self) -> Dims:
        return tuple(int(d) for d in self.voxels.shape)

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.voxels))

    def is_empty(self) -> bool:
        return not self.voxels.any()

    def indices(self) -> np.ndarray:
        """Foreground voxel indices as an ``(n, 3)`` int array in x-fastest order."""
        idx = np.argwhere(self.voxels)
        if len(idx) == 0:
            return idx
        order = np.lexsort((idx[:, 0], idx[:, 1], idx[:, 2]))
        return idx[order]

    def points_mm(self) -> np.ndarray:
        """Foreground voxel centres in millimetres, ``(i*sx, j*sy, k*sz)``."""
        return self.indices() * np.asarray(self.spacing_mm, dtype=float)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return (self.spacing_mm == other.spacing_mm
                and self.dims == other.dims
                and bool(np.array_equal(self.voxels, other.voxels)))

    __hash__ = None

    def __repr__(self) -> str:
        return f"Mask(dims={self.dims}, spacing_mm={self.spacing_mm}, popcount={self.popcount})"


def linear_index(i: int, j: int, k: int, dims: Dims) -> int:
    nx, ny, nz = dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise IndexError(f"voxel ({i}, {j}, {k}) outside grid {dims}")
    return i + nx * (j + ny * k)


def voxel_index(n: int, dims: Dims) -> tuple[int, int, int]:
    nx, ny, nz = dims
    if not 0 <= n < nx * ny * nz:
        raise IndexError(f"linear index {n} outside grid {dims}")
    i = n % nx
    j = (n // nx) % ny
    k = n // (nx * ny)
    return i, j, k


def voxel_volume_mm3(grid: Union[Volume, Mask]) -> float:
    sx, sy, sz = grid.spacing_mm
    return sx * sy * sz


def check_same_grid(a: Union[Volume, Mask], b: Union[Volume, Mask]) -> None:
    """Raise DimensionMismatch unless both grids agree in dims and spacing."""
    if a.dims != b.dims:
        raise DimensionMismatch(f"dims differ: {a.dims} vs {b.dims}")
    if a.spacing_mm != b.spacing_mm:
        raise DimensionMismatch(f"spacing differs: {a.spacing_mm} vs {b.spacing_mm}")


# --- file I/O ---------------------------------------------------------------

def _encode(magic: bytes, dims: Dims, spacing: Spacing, payload: bytes) -> bytes:
    return HEADER.pack(magic, *dims, *spacing) + payload


def _decode(data: bytes, expected_magic: bytes, itemsize: int):
    if len(data) < 4 or data[:4] != expected_magic:
        raise FormatError(f"bad magic: expected {expected_magic!r}, got {data[:4]!r}")
    if len(data) < HEADER_SIZE:
        raise FormatError(f"truncated header: {len(data)} bytes")
    _, nx, ny, nz, sx, sy, sz = HEADER.unpack_from(data)
    dims = _check_dims((nx, ny, nz))
    spacing = _check_spacing((sx, sy, sz))
    expected = nx * ny * nz * itemsize
    payload = data[HEADER_SIZE:]
    if len(payload) != expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, got {len(payload)}")
    return dims, spacing, payload


def volume_to_bytes(vol: Volume) -> bytes:
    payload = vol.voxels.ravel(order="F").astype("<i2").tobytes()
    return _encode(VOLUME_MAGIC, vol.dims, vol.spacing_mm, payload)


def volume_from_bytes(data: bytes) -> Volume:
    dims, spacing, payload = _decode(data, VOLUME_MAGIC, 2)
    flat = np.frombuffer(payload, dtype="<i2")
    return Volume(flat.reshape(dims, order="F").astype(np.int16), spacing)


def mask_to_bytes(mask: Mask) -> bytes:
    payload = mask.voxels.ravel(order="F").astype(np.uint8).tobytes()
    return _encode(MASK_MAGIC, mask.dims, mask.spacing_mm, payload)


def mask_from_bytes(data: bytes) -> Mask:
    dims, spacing, payload = _decode(data, MASK_MAGIC, 1)
    flat = np.frombuffer(payload, dtype=np.uint8)
    if flat.size and flat.max() > 1:
        bad = int(flat[flat > 1][0])
        raise FormatError(f"invalid mask value {bad}: voxels must be 0 or 1")
    return Mask(flat.reshape(dims, order="F").astype(bool), spacing)


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {os.fspath(path)}: {exc}") from exc


def _write_bytes(path, data: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {os.fspath(path)}: {exc}") from exc


def read_volume(path) -> Volume:
    return volume_from_bytes(_read_bytes(path))


def write_volume(vol: Volume, path) -> None:
    _write_bytes(path, volume_to_bytes(vol))


def read_mask(path) -> Mask:
    return mask_from_bytes(_read_bytes(path))


def write_mask(mask: Mask, path) -> None:
    _write_bytes(path, mask_to_bytes(mask))
