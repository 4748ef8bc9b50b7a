"""Per-class Gaussian intensity synthesis with a smooth multiplicative bias.

Class means are drawn from Gaussian hyperpriors and class variances from
log-Gaussian hyperpriors, independently per channel.  The bias field is the
element-wise exponential of a smooth 4x4x4 Gaussian control field upsampled
to the volume, so the synthesized image is bias * N(mean, var) per voxel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .volumes import Grid, IntensityVolume, LabelVolume, resample_array

__all__ = [
    "GmmPriors",
    "GmmParams",
    "BiasField",
    "sample_gmm_params",
    "sample_bias_field",
    "synthesize_hr_image",
]

BIAS_CONTROL_SHAPE = (4, 4, 4)


@dataclass(frozen=True)
class GmmPriors:
    """Gaussian hyperpriors over class means and log-variances.

    mean_prior and logvar_prior have shape (K, channels, 2) holding
    (location, scale) per class and channel.
    """

    labels: tuple[int, ...]
    channels: int
    mean_prior: np.ndarray
    logvar_prior: np.ndarray

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        mean = np.asarray(self.mean_prior, dtype=np.float64)
        logvar = np.asarray(self.logvar_prior, dtype=np.float64)
        want = (len(labels), int(self.channels), 2)
        if mean.shape != want or logvar.shape != want:
            raise ValueError(f"prior arrays must have shape {want}, got {mean.shape} / {logvar.shape}")
        if np.any(mean[..., 1] < 0) or np.any(logvar[..., 1] < 0):
            raise ValueError("prior scales must be >= 0")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "channels", int(self.channels))
        object.__setattr__(self, "mean_prior", mean)
        object.__setattr__(self, "logvar_prior", logvar)

    def to_json(self) -> dict:
        def fmt(arr):
            if self.channels == 1:
                return [[float(a), float(b)] for a, b in arr[:, 0, :]]
            return arr.tolist()

        return {
            "labels": list(self.labels),
            "channels": self.channels,
            "mean_prior": fmt(self.mean_prior),
            "logvar_prior": fmt(self.logvar_prior),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GmmPriors":
        channels = int(doc.get("channels", 1))
        labels = [int(v) for v in doc["labels"]]

        def parse(entry):
            arr = np.asarray(entry, dtype=np.float64)
            if arr.ndim == 2 and channels == 1:  # flat [loc, scale] per label
                arr = arr[:, None, :]
            return arr

        return cls(tuple(labels), channels, parse(doc["mean_prior"]), parse(doc["logvar_prior"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GmmPriors":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class GmmParams:
    """Concrete per-class per-channel means and variances."""

    labels: tuple[int, ...]
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if means.shape != variances.shape or means.shape[0] != len(labels):
            raise ValueError("means/variances must be (K, channels) matching labels")
        if np.any(variances <= 0):
            raise ValueError("variances must be > 0")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def channels(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class BiasField:
    """Strictly positive multiplicative field, one channel per image channel."""

    grid: Grid
    field: np.ndarray

    def __post_init__(self):
        field = np.asarray(self.field, dtype=np.float32)
        if field.ndim == 3:
            field = field[..., None]
        if field.shape[:3] != self.grid.dims:
            raise ValueError(f"bias field shape {field.shape} != grid {self.grid.dims}")
        if not np.all(field > 0):
            raise ValueError("bias field must be strictly positive")
        object.__setattr__(self, "field", field)


def sample_gmm_params(rng: np.random.Generator, priors: GmmPriors) -> GmmParams:
    """Draw means ~ N(loc, scale^2) and variances = exp(N(loc, scale^2))."""
    means = rng.normal(priors.mean_prior[..., 0], priors.mean_prior[..., 1])
    logvars = rng.normal(priors.logvar_prior[..., 0], priors.logvar_prior[..., 1])
    return GmmParams(priors.labels, means, np.exp(logvars))


def sample_bias_field(rng: np.random.Generator, sigma_b: float, hr_grid: Grid, channels: int = 1) -> BiasField:
    """Exponential of a 4x4x4 N(0, sigma_b^2) control field upsampled per channel."""
    if sigma_b < 0:
        raise ValueError(f"sigma_b must be >= 0, got {sigma_b}")
    control = rng.normal(0.0, sigma_b, size=(channels,) + BIAS_CONTROL_SHAPE)
    if sigma_b == 0:
        return BiasField(hr_grid, np.ones(hr_grid.dims + (channels,), np.float32))
    dims = hr_grid.dims
    src_spacing = [
        (dims[ax] - 1) / (BIAS_CONTROL_SHAPE[ax] - 1) if dims[ax] > 1 else 1.0
        for ax in range(3)
    ]
    out = np.empty(dims + (channels,), dtype=np.float32)
    unit = Grid(dims, (1.0, 1.0, 1.0))
    for c in range(channels):
        out[..., c] = resample_array(control[c], src_spacing, unit)
    return BiasField(hr_grid, np.exp(out, dtype=np.float32))


def synthesize_hr_image(
    labels: LabelVolume,
    params: GmmParams,
    bias: BiasField,
    rng: np.random.Generator,
    normalize: bool = False,
) -> IntensityVolume:
    """Draw bias * N(mean_label, var_label) per voxel and channel.

    Channels are independent; negative intensities are kept.  With
    normalize=True each channel is min-max rescaled to [0, 1] afterwards.
    """
    if bias.grid.dims != labels.grid.dims:
        raise ValueError("bias field and label grids differ")
    if bias.field.shape[3] != params.channels:
        raise ValueError(f"bias has {bias.field.shape[3]} channels, params {params.channels}")
    index = {lab: i for i, lab in enumerate(params.labels)}
    missing = labels.label_set - set(index)
    if missing:
        raise ValueError(f"no GMM parameters for labels {sorted(missing)}")

    lo_id = min(index)
    lut = np.zeros(max(index) - lo_id + 1, dtype=np.int64)
    for lab, i in index.items():
        lut[lab - lo_id] = i
    rows = lut[labels.data - lo_id]
    mu = params.means.astype(np.float32)[rows]
    sd = np.sqrt(params.variances).astype(np.float32)[rows]
    z = rng.standard_normal(size=labels.grid.dims + (params.channels,), dtype=np.float32)
    img = bias.field * (mu + sd * z)
    if normalize:
        flat = img.reshape(-1, params.channels)
        lo, hi = flat.min(axis=0), flat.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        img = (img - lo) / span
    return IntensityVolume(labels.grid, img)
