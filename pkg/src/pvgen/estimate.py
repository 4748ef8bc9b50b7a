"""Hyperprior estimation from segmented scans of the target modality.

Per-class statistics use robust estimators (median, and MAD scaled by
1.4826 for Gaussian consistency).  Variances estimated on low-resolution
scans are rescaled by the LR/HR voxel-volume ratio so that, after the
acquisition blur averages that many voxels, synthesized images land back
at the observed LR variance.  Across scans, independent univariate
Gaussians are fit to the robust means and to the log robust variances,
and the fitted standard deviations are inflated (by 5 by default) to
widen the synthesis distribution.
"""

from __future__ import annotations

import numpy as np

from .synth import GmmPriors
from .volumes import IntensityVolume, LabelVolume

__all__ = [
    "MAD_SCALE",
    "estimate_class_stats",
    "rescale_variance",
    "fit_gaussian_priors",
]

MAD_SCALE = 1.4826  # 1 / Phi^-1(3/4): MAD of a Gaussian -> its sigma

VAR_FLOOR = 1e-6  # keeps log-variance finite for constant classes


def estimate_class_stats(image: IntensityVolume, seg: LabelVolume, labels=None) -> dict:
    """Robust per-class, per-channel statistics.

    Returns {label: (means, variances)} with arrays of length channels;
    means are medians, variances are (1.4826 * MAD)^2.  Classes with no
    voxels are simply absent from the result.
    """
    if image.grid.dims != seg.grid.dims:
        raise ValueError("image and segmentation grids differ")
    wanted = sorted(seg.label_set) if labels is None else [int(v) for v in labels]
    flat = image.data.reshape(-1, image.channels).astype(np.float64)
    seg_flat = seg.data.reshape(-1)
    stats = {}
    for lab in wanted:
        values = flat[seg_flat == lab]
        if values.size == 0:
            continue
        med = np.median(values, axis=0)
        mad = np.median(np.abs(values - med), axis=0)
        sigma = MAD_SCALE * mad
        stats[lab] = (med, sigma**2)
    return stats


def rescale_variance(var, hr_voxel_vol_mm3: float, lr_voxel_vol_mm3: float):
    """Inflate an LR variance estimate by the voxel-volume ratio LR/HR.

    The acquisition blur averages roughly (LR volume / HR volume) HR
    voxels, dividing the class variance by that factor; estimates made at
    LR are therefore multiplied by it to recover the HR synthesis level.
    """
    if hr_voxel_vol_mm3 <= 0 or lr_voxel_vol_mm3 <= 0:
        raise ValueError("voxel volumes must be > 0")
    return np.asarray(var, dtype=np.float64) * (lr_voxel_vol_mm3 / hr_voxel_vol_mm3)


def fit_gaussian_priors(
    per_scan_stats,
    inflation: float = 5.0,
    labels=None,
    scale_floor: float = 0.0,
) -> GmmPriors:
    """Fit univariate Gaussians across scans to robust means and log-variances.

    per_scan_stats is a list of estimate_class_stats results.  For each
    (class, channel) the hyperprior location is the across-scan sample
    mean, and the scale is inflation * across-scan sample std (ddof=1;
    0 for a single scan, with an optional pre-inflation floor).  Classes
    missing from some scans use the scans where they are present; a class
    absent everywhere raises.
    """
    scans = list(per_scan_stats)
    if not scans:
        raise ValueError("no scan statistics supplied")
    seen = set()
    for s in scans:
        seen.update(s.keys())
    wanted = sorted(seen) if labels is None else [int(v) for v in labels]
    absent = [lab for lab in wanted if lab not in seen]
    if absent:
        raise ValueError(f"classes absent from every scan: {absent}")

    channels = len(next(iter(scans[0].values()))[0])
    mean_prior = np.zeros((len(wanted), channels, 2))
    logvar_prior = np.zeros((len(wanted), channels, 2))
    for i, lab in enumerate(wanted):
        means = np.array([s[lab][0] for s in scans if lab in s])  # (n_scans, channels)
        lvars = np.log(np.maximum([s[lab][1] for s in scans if lab in s], VAR_FLOOR))
        for arr, prior in ((means, mean_prior), (lvars, logvar_prior)):
            loc = arr.mean(axis=0)
            sd = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(channels)
            prior[i, :, 0] = loc
            prior[i, :, 1] = inflation * np.maximum(sd, scale_floor)
    return GmmPriors(tuple(wanted), channels, mean_prior, logvar_prior)
