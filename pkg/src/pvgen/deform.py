"""Random spatial augmentation: smooth velocity fields, diffeomorphic
integration by scaling-and-squaring, random affines, and label-map warping.

Deformations are stored as dense per-voxel displacement fields mapping
output voxel coordinates to source coordinates (backward warps): a warp
reads its value at x + disp(x).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

from .volumes import Grid, LabelVolume, resample_array

__all__ = [
    "CONTROL_SHAPE",
    "VelocityField",
    "DeformationField",
    "AffineParams",
    "sample_svf",
    "integrate_svf",
    "sample_affine",
    "affine_matrix",
    "compose_affine_with_field",
    "sample_label_map",
    "warp_labels",
]

CONTROL_SHAPE = (10, 10, 10)


@dataclass(frozen=True)
class VelocityField:
    """Stationary velocity field: 10x10x10x3 control values (HR-voxel units)
    plus the dense per-voxel form on the target grid."""

    grid: Grid
    control: np.ndarray
    dense: np.ndarray

    def __post_init__(self):
        control = np.asarray(self.control, dtype=np.float32)
        dense = np.asarray(self.dense, dtype=np.float32)
        if control.shape != CONTROL_SHAPE + (3,):
            raise ValueError(f"control grid must be {CONTROL_SHAPE + (3,)}, got {control.shape}")
        if dense.shape != self.grid.dims + (3,):
            raise ValueError(f"dense field shape {dense.shape} != grid {self.grid.dims}")
        if not (np.all(np.isfinite(control)) and np.all(np.isfinite(dense))):
            raise ValueError("velocity field contains non-finite values")
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "dense", dense)


@dataclass(frozen=True)
class DeformationField:
    """Dense backward displacement field over a grid."""

    grid: Grid
    disp: np.ndarray

    def __post_init__(self):
        disp = np.asarray(self.disp, dtype=np.float32)
        if disp.shape != self.grid.dims + (3,):
            raise ValueError(f"displacement shape {disp.shape} != grid {self.grid.dims}")
        if not np.all(np.isfinite(disp)):
            raise ValueError("displacement field contains non-finite values")
        object.__setattr__(self, "disp", disp)


@dataclass(frozen=True)
class AffineParams:
    """Random linear transform parameters (degrees / factors / voxels)."""

    rotation_deg: tuple[float, float, float]
    scaling: tuple[float, float, float]
    shearing: tuple[float, float, float]
    translation_vox: tuple[float, float, float]

    def __post_init__(self):
        for name in ("rotation_deg", "scaling", "shearing", "translation_vox"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if any(s <= 0 for s in self.scaling):
            raise ValueError(f"scalings must be > 0, got {self.scaling}")


def _upsample_control(control: np.ndarray, grid: Grid) -> np.ndarray:
    """Trilinear upsampling of an (a,b,c,3) control grid spanning the volume."""
    dims = grid.dims
    out = np.empty(dims + (3,), dtype=np.float32)
    for k in range(3):
        # control node j sits at voxel j*(n-1)/(c-1): express as a resample
        # where the control "spacing" covers the volume extent
        src_spacing = [
            (dims[ax] - 1) / (control.shape[ax] - 1) if dims[ax] > 1 else 1.0
            for ax in range(3)
        ]
        out[..., k] = resample_array(control[..., k], src_spacing, Grid(dims, (1.0, 1.0, 1.0)))
    return out


def sample_svf(rng: np.random.Generator, sigma_v: float, hr_grid: Grid) -> VelocityField:
    """Draw a 10x10x10x3 N(0, sigma_v^2) control grid and upsample it."""
    if sigma_v < 0:
        raise ValueError(f"sigma_v must be >= 0, got {sigma_v}")
    control = rng.normal(0.0, sigma_v, size=CONTROL_SHAPE + (3,))
    if sigma_v == 0:
        dense = np.zeros(hr_grid.dims + (3,), dtype=np.float32)
        return VelocityField(hr_grid, np.zeros(CONTROL_SHAPE + (3,), np.float32), dense)
    return VelocityField(hr_grid, control, _upsample_control(control.astype(np.float32), hr_grid))


def _sample_field(disp: np.ndarray, coords) -> np.ndarray:
    """Trilinear sampling of a vector field at (3, N) voxel coordinates.

    Components are sampled on a small thread pool for large grids;
    map_coordinates releases the GIL and each thread writes a disjoint
    output slice, so results do not depend on scheduling.
    """
    out = np.empty((3,) + coords.shape[1:], dtype=np.float32)

    def run(k):
        ndi.map_coordinates(disp[..., k], coords, order=1, mode="nearest", output=out[k])

    if coords.size >= 3 * 2**18:
        with ThreadPoolExecutor(3) as pool:
            list(pool.map(run, range(3)))
    else:
        for k in range(3):
            run(k)
    return np.moveaxis(out, 0, -1)


def _identity_coords(dims) -> np.ndarray:
    return np.indices(dims, dtype=np.float32)


def integrate_svf(v: VelocityField, n_steps: int = 8) -> DeformationField:
    """Group exponential of a stationary velocity field by scaling-and-squaring.

    The field is halved n_steps times, then the resulting small displacement
    is composed with itself n_steps times; composition resamples the field
    trilinearly with edge clamping.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    psi = (v.dense / np.float32(2.0**n_steps)).astype(np.float32)
    base = _identity_coords(v.grid.dims)
    for _ in range(n_steps):
        coords = base + np.moveaxis(psi, -1, 0)
        psi = psi + _sample_field(psi, coords)
    return DeformationField(v.grid, psi)


def _rot(axis: int, deg: float) -> np.ndarray:
    c, s = np.cos(np.deg2rad(deg)), np.sin(np.deg2rad(deg))
    m = np.eye(3)
    i, j = [(1, 2), (0, 2), (0, 1)][axis]
    m[i, i] = c
    m[j, j] = c
    m[i, j] = -s if axis != 1 else s
    m[j, i] = s if axis != 1 else -s
    return m


def affine_matrix(params: AffineParams, center) -> np.ndarray:
    """4x4 matrix T * Rz * Ry * Rx * Shear * Scale anchored at `center`."""
    sc = np.diag(params.scaling)
    sh = np.eye(3)
    sh[0, 1], sh[0, 2], sh[1, 2] = params.shearing
    rx, ry, rz = (_rot(a, params.rotation_deg[a]) for a in range(3))
    lin = rz @ ry @ rx @ sh @ sc
    center = np.asarray(center, dtype=np.float64)
    m = np.eye(4)
    m[:3, :3] = lin
    m[:3, 3] = center + np.asarray(params.translation_vox) - lin @ center
    return m


def sample_affine(rng: np.random.Generator, ranges: dict, center) -> tuple[AffineParams, np.ndarray]:
    """Draw uniform affine parameters and build the matrix about `center`.

    `ranges` maps 'rotation_deg' / 'scaling' / 'shearing' / 'translation_vox'
    to (low, high) bounds applied independently per axis.
    """
    bounds = {}
    for name in ("rotation_deg", "scaling", "shearing", "translation_vox"):
        lo, hi = ranges[name]
        if lo > hi:
            raise ValueError(f"{name} range has low > high: ({lo}, {hi})")
        bounds[name] = (float(lo), float(hi))
    if bounds["scaling"][0] <= 0:
        raise ValueError(f"scaling range must be positive, got {bounds['scaling']}")
    params = AffineParams(
        rotation_deg=tuple(rng.uniform(*bounds["rotation_deg"], size=3)),
        scaling=tuple(rng.uniform(*bounds["scaling"], size=3)),
        shearing=tuple(rng.uniform(*bounds["shearing"], size=3)),
        translation_vox=tuple(rng.uniform(*bounds["translation_vox"], size=3)),
    )
    return params, affine_matrix(params, center)


def compose_affine_with_field(matrix: np.ndarray, field: DeformationField) -> DeformationField:
    """Displacement of x -> A(x + field(x)), i.e. the affine applied after
    the nonlinear warp in source-lookup order."""
    matrix = np.asarray(matrix, dtype=np.float64)
    dims = field.grid.dims
    base = np.moveaxis(_identity_coords(dims), 0, -1).astype(np.float64)
    pts = base + field.disp
    warped = pts @ matrix[:3, :3].T + matrix[:3, 3]
    return DeformationField(field.grid, (warped - base).astype(np.float32))


def sample_label_map(rng: np.random.Generator, training_maps) -> LabelVolume:
    """Uniform draw from the training label maps."""
    maps = list(training_maps)
    if not maps:
        raise ValueError("no training label maps supplied")
    grid = maps[0].grid
    for m in maps[1:]:
        if m.grid != grid:
            raise ValueError("training label maps must share one grid")
    return maps[int(rng.integers(len(maps)))]


def warp_labels(label_map: LabelVolume, field: DeformationField) -> LabelVolume:
    """Backward-warp a label map with nearest-neighbor lookup."""
    if label_map.grid.dims != field.grid.dims:
        raise ValueError("label map and field grids differ")
    dims = label_map.grid.dims
    coords = _identity_coords(dims) + np.moveaxis(field.disp, -1, 0)
    for ax, n in enumerate(dims):
        # ceil(x - 0.5) implements the tie-toward-lower-index convention
        np.clip(np.ceil(coords[ax] - 0.5, out=coords[ax]), 0, n - 1, out=coords[ax])
    idx = coords.astype(np.int64)
    out = label_map.data[idx[0], idx[1], idx[2]]
    return LabelVolume(label_map.grid, out, label_set=label_map.label_set)
