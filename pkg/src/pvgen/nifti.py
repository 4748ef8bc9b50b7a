"""Minimal NIfTI-1 reader/writer for uncompressed single-file `.nii`.

Supports the subset this package produces and consumes: 3D volumes plus an
optional 4th (channel) dimension, datatypes uint8/uint16/int32/float32,
diagonal qform/sform built from the voxel spacing, voxel data at offset 352.
A raw little-endian array with a JSON sidecar header is available as a
fallback pair format for tools without NIfTI support.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .volumes import Grid, IntensityVolume, LabelVolume

__all__ = [
    "read_nifti",
    "write_nifti",
    "read_raw",
    "write_raw",
    "load_intensity",
    "load_labels",
    "save_intensity",
    "save_labels",
]

_HDR_SIZE = 348
_VOX_OFFSET = 352.0
_MAGIC = b"n+1\x00"

# NIfTI datatype codes for the supported payloads
_DTYPES = {
    2: np.dtype("<u1"),
    8: np.dtype("<i4"),
    16: np.dtype("<f4"),
    512: np.dtype("<u2"),
}
_CODES = {v.newbyteorder("="): k for k, v in _DTYPES.items()}

# (name, struct format, offset) for the fields we read and write
_STRUCT = struct.Struct(
    "<i"  # sizeof_hdr
    "35x"  # data_type/db_name/extents/session_error/regular
    "c"  # dim_info
    "8h"  # dim
    "3f"  # intent_p1..p3
    "h"  # intent_code
    "h"  # datatype
    "h"  # bitpix
    "h"  # slice_start
    "8f"  # pixdim
    "f"  # vox_offset
    "f"  # scl_slope
    "f"  # scl_inter
    "h"  # slice_end
    "c"  # slice_code
    "c"  # xyzt_units
    "2f"  # cal_max, cal_min
    "2f"  # slice_duration, toffset
    "2i"  # glmax, glmin
    "80s"  # descrip
    "24s"  # aux_file
    "2h"  # qform_code, sform_code
    "6f"  # quatern_b..d, qoffset_x..z
    "12f"  # srow_x, srow_y, srow_z
    "16s"  # intent_name
    "4s"  # magic
)
assert _STRUCT.size == _HDR_SIZE


def write_nifti(path, data: np.ndarray, spacing, dtype=None, descrip: str = "") -> None:
    """Write an uncompressed .nii file (little endian, data at offset 352)."""
    arr = np.asarray(data)
    if arr.ndim not in (3, 4):
        raise ValueError(f"expected 3D or 4D array, got shape {arr.shape}")
    if dtype is not None:
        arr = arr.astype(dtype)
    code = _CODES.get(np.dtype(arr.dtype).newbyteorder("="))
    if code is None:
        raise ValueError(f"unsupported dtype {arr.dtype}; use uint8/uint16/int32/float32")
    out_dtype = _DTYPES[code]

    dim = [arr.ndim, arr.shape[0], arr.shape[1], arr.shape[2], 1, 1, 1, 1]
    if arr.ndim == 4:
        dim[4] = arr.shape[3]
    sx, sy, sz = (float(s) for s in spacing)
    pixdim = [1.0, sx, sy, sz, 1.0, 0.0, 0.0, 0.0]
    srow_x = [sx, 0.0, 0.0, 0.0]
    srow_y = [0.0, sy, 0.0, 0.0]
    srow_z = [0.0, 0.0, sz, 0.0]

    header = _STRUCT.pack(
        _HDR_SIZE,
        b"\x00",
        *dim,
        0.0, 0.0, 0.0,
        0,
        code,
        out_dtype.itemsize * 8,
        0,
        *pixdim,
        _VOX_OFFSET,
        1.0,  # scl_slope
        0.0,  # scl_inter
        0,
        b"\x00",
        b"\x02",  # spatial units: mm
        0.0, 0.0,
        0.0, 0.0,
        0, 0,
        descrip.encode()[:79],
        b"",
        1, 1,  # qform_code, sform_code
        0.0, 0.0, 0.0,  # quaternion b, c, d (identity orientation)
        0.0, 0.0, 0.0,  # qoffset
        *srow_x, *srow_y, *srow_z,
        b"",
        _MAGIC,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(b"\x00" * int(_VOX_OFFSET - _HDR_SIZE))
        # NIfTI stores x fastest: serialize in Fortran order
        fh.write(np.ascontiguousarray(arr.astype(out_dtype)).tobytes(order="F"))


def read_nifti(path):
    """Read an uncompressed .nii written by this package or compatible tools.

    Returns (data, spacing) where data has shape (nx, ny, nz) or
    (nx, ny, nz, channels) in native byte order.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HDR_SIZE:
        raise ValueError(f"{path}: file shorter than a NIfTI-1 header")
    sizeof_hdr = struct.unpack_from("<i", raw, 0)[0]
    swapped = False
    if sizeof_hdr != _HDR_SIZE:
        if struct.unpack_from(">i", raw, 0)[0] == _HDR_SIZE:
            swapped = True
        else:
            raise ValueError(f"{path}: not a NIfTI-1 file (sizeof_hdr={sizeof_hdr})")
    endian = ">" if swapped else "<"
    fields = struct.Struct(endian + _STRUCT.format[1:]).unpack(raw[:_HDR_SIZE])
    magic = fields[-1]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise ValueError(f"{path}: bad NIfTI magic {magic!r}")
    if magic == b"ni1\x00":
        raise ValueError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")

    dim = fields[2:10]
    ndim = dim[0]
    if ndim not in (3, 4):
        raise ValueError(f"{path}: unsupported dimensionality {ndim}")
    shape = tuple(int(d) for d in dim[1 : 1 + ndim])
    datatype = fields[14]
    if datatype not in _DTYPES:
        raise ValueError(f"{path}: unsupported NIfTI datatype code {datatype}")
    dtype = _DTYPES[datatype]
    if swapped:
        dtype = dtype.newbyteorder(">")
    pixdim = fields[17:25]
    spacing = tuple(abs(float(p)) for p in pixdim[1:4])
    vox_offset = int(fields[25])
    scl_slope, scl_inter = float(fields[26]), float(fields[27])

    count = int(np.prod(shape))
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=vox_offset)
    data = data.reshape(shape, order="F")
    data = np.ascontiguousarray(data, dtype=dtype.newbyteorder("="))
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        data = data * scl_slope + scl_inter
    return data, spacing


def write_raw(path, data: np.ndarray, spacing, dtype=None) -> None:
    """Fallback pair format: little-endian raw array + JSON sidecar header."""
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype)
    arr = arr.astype(arr.dtype.newbyteorder("<"))
    base = Path(path)
    if base.suffix == ".raw":
        base = base.with_suffix("")
    header = {
        "dims": [int(d) for d in arr.shape[:3]],
        "spacing": [float(s) for s in spacing],
        "channels": int(arr.shape[3]) if arr.ndim == 4 else 1,
        "dtype": arr.dtype.newbyteorder("=").name,
    }
    with open(base.with_suffix(".raw"), "wb") as fh:
        fh.write(np.ascontiguousarray(arr).tobytes())
    with open(base.with_suffix(".json"), "w") as fh:
        json.dump(header, fh, indent=1)
        fh.write("\n")


def read_raw(path):
    """Read the raw+JSON fallback pair; returns (data, spacing)."""
    base = Path(path)
    if base.suffix in (".raw", ".json"):
        base = base.with_suffix("")
    with open(base.with_suffix(".json")) as fh:
        header = json.load(fh)
    dims = tuple(int(d) for d in header["dims"])
    channels = int(header.get("channels", 1))
    dtype = np.dtype(header["dtype"]).newbyteorder("<")
    shape = dims + (channels,) if channels > 1 else dims
    data = np.fromfile(base.with_suffix(".raw"), dtype=dtype)
    data = data.reshape(shape)
    return np.ascontiguousarray(data, dtype=dtype.newbyteorder("=")), tuple(header["spacing"])


def _read_any(path):
    if str(path).endswith((".raw", ".json")):
        return read_raw(path)
    return read_nifti(path)


def load_intensity(path) -> IntensityVolume:
    data, spacing = _read_any(path)
    grid = Grid(data.shape[:3], spacing)
    return IntensityVolume(grid, data.astype(np.float32))


def load_labels(path) -> LabelVolume:
    data, spacing = _read_any(path)
    if data.ndim == 4:
        if data.shape[3] != 1:
            raise ValueError(f"{path}: label volume has {data.shape[3]} channels")
        data = data[..., 0]
    grid = Grid(data.shape[:3], spacing)
    return LabelVolume(grid, np.rint(data).astype(np.int32) if np.issubdtype(data.dtype, np.floating) else data)


def save_intensity(path, vol: IntensityVolume) -> None:
    data = vol.data if vol.channels > 1 else vol.data[..., 0]
    if str(path).endswith(".raw"):
        write_raw(path, data, vol.grid.spacing, dtype=np.float32)
    else:
        write_nifti(path, data, vol.grid.spacing, dtype=np.float32)


def save_labels(path, vol: LabelVolume) -> None:
    labels = sorted(vol.label_set) or [0]
    if min(labels) >= 0 and max(labels) <= np.iinfo(np.uint16).max:
        dtype = np.uint16
    else:
        dtype = np.int32
    if str(path).endswith(".raw"):
        write_raw(path, vol.data, vol.grid.spacing, dtype=dtype)
    else:
        write_nifti(path, vol.data, vol.grid.spacing, dtype=dtype)
