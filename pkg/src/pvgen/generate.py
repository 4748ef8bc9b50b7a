"""Training-pair generation: deform a label map, synthesize intensities,
simulate the acquisition, and stream (image, labels) pairs to disk.

Every sample is fully determined by (seed, sample index): each pipeline
stage draws from its own counter-based stream, so reruns and any number of
parallel workers produce byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from . import nifti
from .acquire import simulate_acquisition
from .config import ConfigError, GenerationConfig
from .deform import (
    compose_affine_with_field,
    integrate_svf,
    sample_affine,
    sample_label_map,
    sample_svf,
    warp_labels,
)
from .streams import stream
from .synth import GmmPriors, sample_bias_field, sample_gmm_params, synthesize_hr_image
from .volumes import Grid, IntensityVolume, LabelVolume

__all__ = ["GeneratedSample", "generate_pair", "generate_sample", "run_generate", "run_benchmark"]


@dataclass(frozen=True)
class Resources:
    label_maps: tuple[LabelVolume, ...]
    priors: GmmPriors


def load_resources(config: GenerationConfig) -> Resources:
    """Load label maps and priors, and validate them against each other.

    Raises ConfigError before any volume work if a label present in the
    training maps has no GMM prior entry.
    """
    try:
        priors = GmmPriors.load(config.priors)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad priors file {config.priors}: {exc}") from exc
    res = float(config.atlas_res_mm)
    maps = []
    for path in config.label_maps:
        vol = nifti.load_labels(path)
        # generation runs on the configured isotropic atlas grid
        grid = Grid(vol.grid.dims, (res, res, res))
        maps.append(LabelVolume(grid, vol.data))
    dims = maps[0].grid.dims
    for path, m in zip(config.label_maps, maps):
        if m.grid.dims != dims:
            raise ConfigError(f"label map {path} has dims {m.grid.dims}, expected {dims}")
    present = set()
    for m in maps:
        present |= m.label_set
    missing = sorted(present - set(priors.labels))
    if missing:
        raise ConfigError(f"labels {missing} have no entry in the priors file")
    if len(priors.labels) and priors.channels != len(config.channels):
        raise ConfigError(
            f"priors describe {priors.channels} channels, config has {len(config.channels)}"
        )
    return Resources(tuple(maps), priors)


@dataclass(frozen=True)
class GeneratedSample:
    image: IntensityVolume
    labels: LabelVolume
    record: dict


def _merge_labels(vol: LabelVolume, merge: dict) -> LabelVolume:
    lut = {lab: merge.get(lab, lab) for lab in vol.label_set}
    out = vol.data.copy()
    for old, new in lut.items():
        if old != new:
            out[vol.data == old] = new
    return LabelVolume(vol.grid, out)


def generate_sample(
    config: GenerationConfig,
    index: int,
    resources: Resources = None,
    timings: dict = None,
) -> GeneratedSample:
    """Generate one (image, labels) pair plus the record of all draws."""
    res = resources or load_resources(config)
    ranges = config.ranges

    def mark(key, t0):
        if timings is not None:
            timings[key] = timings.get(key, 0.0) + (perf_counter() - t0)

    rng_map = stream(config.seed, index, "map")
    map_index = int(rng_map.integers(len(res.label_maps)))
    label_map = res.label_maps[map_index]
    grid = label_map.grid

    t0 = perf_counter()
    rng_svf = stream(config.seed, index, "svf")
    sigma_v = float(rng_svf.uniform(*ranges.sigma_v))
    velocity = sample_svf(rng_svf, sigma_v, grid)
    flow = integrate_svf(velocity, config.svf_steps)

    rng_aff = stream(config.seed, index, "affine")
    center = (np.asarray(grid.dims, float) - 1.0) / 2.0
    affine, matrix = sample_affine(
        rng_aff,
        {
            "rotation_deg": ranges.rotation_deg,
            "scaling": ranges.scaling,
            "shearing": ranges.shearing,
            "translation_vox": ranges.translation_vox,
        },
        center,
    )
    total = compose_affine_with_field(matrix, flow)
    warped = warp_labels(label_map, total)
    mark("deform", t0)

    t0 = perf_counter()
    rng_gmm = stream(config.seed, index, "gmm")
    gmm = sample_gmm_params(rng_gmm, res.priors)

    rng_bias = stream(config.seed, index, "bias")
    sigma_b = float(rng_bias.uniform(*ranges.sigma_b))
    bias = sample_bias_field(rng_bias, sigma_b, grid, res.priors.channels)

    rng_noise = stream(config.seed, index, "noise")
    image = synthesize_hr_image(warped, gmm, bias, rng_noise, normalize=config.normalize_intensities)
    mark("synth", t0)

    rng_alpha = stream(config.seed, index, "alpha")
    alphas = [float(rng_alpha.uniform(*ch.alpha_range)) for ch in config.channels.channels]
    image = simulate_acquisition(image, config.channels, alphas=alphas, timings=timings)

    out_labels = warped if not config.label_merge else _merge_labels(warped, config.label_merge)
    digest = hashlib.sha256(gmm.means.tobytes() + gmm.variances.tobytes()).hexdigest()[:16]
    record = {
        "index": int(index),
        "map_index": map_index,
        "sigma_v": sigma_v,
        "sigma_b": sigma_b,
        "affine": {
            "rotation_deg": list(affine.rotation_deg),
            "scaling": list(affine.scaling),
            "shearing": list(affine.shearing),
            "translation_vox": list(affine.translation_vox),
        },
        "alphas": alphas,
        "gmm_digest": digest,
    }
    return GeneratedSample(image, out_labels, record)


def generate_pair(config: GenerationConfig, sample_index: int, resources: Resources = None):
    """The (image, labels) pair for one sample index."""
    sample = generate_sample(config, sample_index, resources)
    return sample.image, sample.labels


def _record_only(config: GenerationConfig, index: int, resources: Resources) -> dict:
    """Recompute a sample's manifest record without any volume work.

    Used on resume: all recorded draws come from cheap stream reads.
    """
    res = resources
    ranges = config.ranges
    rng_map = stream(config.seed, index, "map")
    map_index = int(rng_map.integers(len(res.label_maps)))
    rng_svf = stream(config.seed, index, "svf")
    sigma_v = float(rng_svf.uniform(*ranges.sigma_v))
    rng_aff = stream(config.seed, index, "affine")
    grid = res.label_maps[map_index].grid
    center = (np.asarray(grid.dims, float) - 1.0) / 2.0
    affine, _ = sample_affine(
        rng_aff,
        {
            "rotation_deg": ranges.rotation_deg,
            "scaling": ranges.scaling,
            "shearing": ranges.shearing,
            "translation_vox": ranges.translation_vox,
        },
        center,
    )
    gmm = sample_gmm_params(stream(config.seed, index, "gmm"), res.priors)
    sigma_b = float(stream(config.seed, index, "bias").uniform(*ranges.sigma_b))
    rng_alpha = stream(config.seed, index, "alpha")
    alphas = [float(rng_alpha.uniform(*ch.alpha_range)) for ch in config.channels.channels]
    digest = hashlib.sha256(gmm.means.tobytes() + gmm.variances.tobytes()).hexdigest()[:16]
    return {
        "index": int(index),
        "map_index": map_index,
        "sigma_v": sigma_v,
        "sigma_b": sigma_b,
        "affine": {
            "rotation_deg": list(affine.rotation_deg),
            "scaling": list(affine.scaling),
            "shearing": list(affine.shearing),
            "translation_vox": list(affine.translation_vox),
        },
        "alphas": alphas,
        "gmm_digest": digest,
    }


def _pair_paths(config: GenerationConfig, index: int):
    ext = ".nii" if config.format == "nii" else ".raw"
    image = os.path.join(config.out_dir, f"image_{index:06d}{ext}")
    labels = os.path.join(config.out_dir, f"labels_{index:06d}{ext}")
    return image, labels


def _write_sample(config: GenerationConfig, index: int, resources: Resources, resume: bool) -> dict:
    image_path, labels_path = _pair_paths(config, index)
    if resume and os.path.exists(image_path) and os.path.exists(labels_path):
        record = _record_only(config, index, resources)
        record["image"] = os.path.basename(image_path)
        record["labels"] = os.path.basename(labels_path)
        return record
    sample = generate_sample(config, index, resources)
    try:
        nifti.save_intensity(image_path, sample.image)
        nifti.save_labels(labels_path, sample.labels)
    except BaseException:
        for path in (image_path, labels_path):
            for p in (path, path.replace(".raw", ".json")):
                if os.path.exists(p):
                    os.remove(p)
        raise
    record = dict(sample.record)
    record["image"] = os.path.basename(image_path)
    record["labels"] = os.path.basename(labels_path)
    return record


_WORKER = {}


def _worker_init(config: GenerationConfig):
    _WORKER["config"] = config
    _WORKER["resources"] = load_resources(config)


def _worker_run(args):
    index, resume = args
    return _write_sample(_WORKER["config"], index, _WORKER["resources"], resume)


def run_generate(config: GenerationConfig, workers: int = 1, resume: bool = False) -> dict:
    """Write n_pairs (image, labels) files plus a manifest.json.

    Outputs are byte-identical across reruns and across worker counts for
    a fixed config.  With resume=True, samples whose files already exist
    are not regenerated.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    indices = list(range(config.n_pairs))
    if workers > 1 and len(indices) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(config,)) as pool:
            records = list(pool.map(_worker_run, [(i, resume) for i in indices]))
    else:
        resources = load_resources(config)
        records = [_write_sample(config, i, resources, resume) for i in indices]
    records.sort(key=lambda r: r["index"])
    manifest = {
        "seed": config.seed,
        "n_pairs": config.n_pairs,
        "format": config.format,
        "atlas_res_mm": config.atlas_res_mm,
        "ranges": config.ranges.as_dict(),
        "entries": records,
    }
    path = os.path.join(config.out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def run_benchmark(config: GenerationConfig, n: int, workers: int = None) -> dict:
    """Time pair generation per stage, single- and optionally multi-worker."""
    report = {"n": int(n), "stages": {}, "single_worker": None, "multi_worker": None}
    if n <= 0:
        return report
    resources = load_resources(config)
    timings = {}
    t0 = perf_counter()
    for i in range(n):
        sample = generate_sample(config, i, resources, timings=timings)
        t_io = perf_counter()
        image_path, labels_path = _pair_paths(config, i)
        os.makedirs(config.out_dir, exist_ok=True)
        nifti.save_intensity(image_path, sample.image)
        nifti.save_labels(labels_path, sample.labels)
        timings["io"] = timings.get("io", 0.0) + (perf_counter() - t_io)
    total = perf_counter() - t0
    report["stages"] = {k: round(v, 4) for k, v in sorted(timings.items())}
    report["single_worker"] = {"total_s": round(total, 4), "pairs_per_sec": round(n / total, 4)}
    if workers and workers > 1:
        t0 = perf_counter()
        run_generate(config.replace(n_pairs=n), workers=workers)
        total_mw = perf_counter() - t0
        report["multi_worker"] = {
            "workers": int(workers),
            "total_s": round(total_mw, 4),
            "pairs_per_sec": round(n / total_mw, 4),
        }
    return report
