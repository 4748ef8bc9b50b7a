"""Grid-aware volume containers and resampling primitives.

Conventions used throughout the package:

* A volume of shape (nx, ny, nz) lives on a regular grid; the center of
  voxel (i, j, k) sits at physical position (i*sx, j*sy, k*sz) mm.  Grids
  of different spacing are aligned at the voxel-(0,0,0) center.
* Continuous positions are expressed in voxel coordinates of the grid at
  hand; out-of-bounds coordinates are clamped to the volume edge.
* Volume data is stored as float32 (intensities) or integer labels;
  interpolation and reductions accumulate in float64.

Volumes are treated as immutable after construction; all operations here
return new volumes and are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

__all__ = [
    "Grid",
    "LabelVolume",
    "IntensityVolume",
    "trilinear_sample",
    "nearest_sample",
    "resample",
    "one_hot",
    "soft_dice",
]


@dataclass(frozen=True)
class Grid:
    """Regular 3D voxel grid: dimensions and per-axis spacing in mm."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or len(spacing) != 3:
            raise ValueError("Grid needs 3 dims and 3 spacings")
        if any(d < 1 for d in dims):
            raise ValueError(f"all dims must be >= 1, got {dims}")
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ValueError(f"all spacings must be > 0, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass(frozen=True)
class LabelVolume:
    """Discrete segmentation on a grid, one integer label id per voxel."""

    grid: Grid
    data: np.ndarray
    label_set: frozenset = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError(f"label data must be integer, got {data.dtype}")
        if data.shape != self.grid.dims:
            raise ValueError(f"label data shape {data.shape} != grid dims {self.grid.dims}")
        data = np.ascontiguousarray(data)
        present = np.unique(data)
        if self.label_set is None:
            labels = frozenset(int(v) for v in present)
        else:
            labels = frozenset(int(v) for v in self.label_set)
            missing = set(int(v) for v in present) - labels
            if missing:
                raise ValueError(f"labels {sorted(missing)} present in data but not in label_set")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "label_set", labels)


@dataclass(frozen=True)
class IntensityVolume:
    """Multi-channel scalar volume, stored float32 with shape (nx, ny, nz, C)."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 3:
            data = data[..., None]
        if data.ndim != 4 or data.shape[:3] != self.grid.dims:
            raise ValueError(f"intensity data shape {data.shape} incompatible with grid {self.grid.dims}")
        if not np.all(np.isfinite(data)):
            raise ValueError("intensity data contains non-finite values")
        object.__setattr__(self, "data", np.ascontiguousarray(data))

    @property
    def channels(self) -> int:
        return self.data.shape[3]


def _check_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != 3:
        raise ValueError(f"points must have a trailing axis of size 3, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite point coordinates")
    return pts


def trilinear_sample(vol: IntensityVolume, points, channel: int = 0):
    """Trilinear interpolation of one channel at continuous voxel coordinates.

    `points` is (3,) or (..., 3); out-of-bounds coordinates clamp to the
    edge.  Interpolation runs in float64 regardless of storage dtype and
    reproduces affine functions of the coordinates exactly.
    """
    pts = _check_points(points)
    scalar = pts.ndim == 1
    coords = pts.reshape(-1, 3).T
    data = vol.data[..., channel].astype(np.float64)
    out = ndi.map_coordinates(data, coords, order=1, mode="nearest")
    if scalar:
        return float(out[0])
    return out.reshape(pts.shape[:-1])


def nearest_sample(vol: LabelVolume, points):
    """Label of the voxel whose center is nearest; ties go to the lower index."""
    pts = _check_points(points)
    scalar = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    nx, ny, nz = vol.grid.dims
    # ceil(x - 0.5) rounds halves downward, implementing the tie-break
    ix = np.clip(np.ceil(pts[:, 0] - 0.5).astype(np.int64), 0, nx - 1)
    iy = np.clip(np.ceil(pts[:, 1] - 0.5).astype(np.int64), 0, ny - 1)
    iz = np.clip(np.ceil(pts[:, 2] - 0.5).astype(np.int64), 0, nz - 1)
    out = vol.data[ix, iy, iz]
    if scalar:
        return int(out[0])
    return out


def _resample_axis(data: np.ndarray, axis: int, n_tgt: int, scale: float) -> np.ndarray:
    """1D linear resample along one axis at positions i*scale (float64 math)."""
    n_src = data.shape[axis]
    x = np.clip(np.arange(n_tgt, dtype=np.float64) * scale, 0.0, n_src - 1.0)
    i0 = np.clip(np.floor(x).astype(np.int64), 0, max(n_src - 2, 0))
    f = x - i0
    lo = np.take(data, i0, axis=axis)
    hi = np.take(data, np.minimum(i0 + 1, n_src - 1), axis=axis)
    shape = [1] * data.ndim
    shape[axis] = n_tgt
    f = f.reshape(shape)
    return lo * (1.0 - f) + hi * f


def resample_array(data: np.ndarray, src_spacing, target: Grid) -> np.ndarray:
    """Separable trilinear resample of a (nx,ny,nz) or (nx,ny,nz,C) array.

    Target voxel centers are mapped into source voxel coordinates through
    the shared corner-aligned physical frame.  Mathematically identical to
    point-wise trilinear sampling (tensor-product factorization) but runs
    one axis at a time.
    """
    out = np.asarray(data, dtype=np.float64)
    for ax in range(3):
        scale = target.spacing[ax] / float(src_spacing[ax])
        out = _resample_axis(out, ax, target.dims[ax], scale)
    return out


def resample(vol: IntensityVolume, target: Grid, mode: str = "linear") -> IntensityVolume:
    """Resample a volume onto `target` (corner-aligned grids, trilinear)."""
    if mode != "linear":
        raise ValueError(f"unsupported resample mode {mode!r}")
    if target.n_voxels == 0:
        raise ValueError("empty target grid")
    if target.dims == vol.grid.dims and target.spacing == vol.grid.spacing:
        return IntensityVolume(target, vol.data)
    out = resample_array(vol.data, vol.grid.spacing, target)
    return IntensityVolume(target, out.astype(np.float32))


def one_hot(labels: LabelVolume, label_order) -> IntensityVolume:
    """Encode labels as a K-channel indicator volume (channels sum to 1)."""
    order = [int(v) for v in label_order]
    unknown = labels.label_set - set(order)
    if unknown:
        raise ValueError(f"labels {sorted(unknown)} missing from the requested label order")
    nx, ny, nz = labels.grid.dims
    out = np.zeros((nx, ny, nz, len(order)), dtype=np.float32)
    for k, lab in enumerate(order):
        out[..., k] = labels.data == lab
    return IntensityVolume(labels.grid, out)


def soft_dice(pred: IntensityVolume, target: IntensityVolume, eps: float = 1e-6) -> float:
    """Mean soft Dice overlap across channels, with smoothing eps.

    For each channel k: (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps),
    accumulated in float64; the result is averaged over channels.
    """
    if pred.grid.dims != target.grid.dims or pred.channels != target.channels:
        raise ValueError(
            f"shape mismatch: pred {pred.grid.dims}x{pred.channels} vs "
            f"target {target.grid.dims}x{target.channels}"
        )
    p = pred.data.reshape(-1, pred.channels).astype(np.float64)
    t = target.data.reshape(-1, target.channels).astype(np.float64)
    inter = np.sum(p * t, axis=0)
    denom = np.sum(p, axis=0) + np.sum(t, axis=0)
    dice = (2.0 * inter + eps) / (denom + eps)
    return float(np.mean(dice))
