"""Build training fixtures for the trainer by driving the pvgen CLI.

Creates geometric 4-label phantom label maps and a priors file, then runs
`pvgen generate` for a training set, a held-out set, and a small overfit
set.  Also dumps cross-check samples (voxel values read back in Python)
so the TypeScript readers can be verified bit for bit.
"""

import argparse
import json
import os
import subprocess
import sys

import numpy as np

from pvgen import Grid, GmmPriors, LabelVolume
from pvgen.nifti import read_nifti, save_labels


def phantom(dims, seed):
    # nested ellipsoids with guaranteed-thick shells so every class is
    # learnable at small grid sizes
    rng = np.random.default_rng(seed)
    grids = np.meshgrid(*(np.linspace(-1, 1, n) for n in dims), indexing="ij")
    center = rng.uniform(-0.1, 0.1, size=3)
    radii = np.array([0.88, 0.66, 0.45]) + rng.uniform(-0.03, 0.03, size=3)
    stretch = rng.uniform(0.92, 1.1, size=3)
    r = np.sqrt(sum(stretch[a] * (grids[a] - center[a]) ** 2 for a in range(3)))
    data = np.zeros(dims, np.int32)
    for k, radius in enumerate(radii):
        data[r < radius] = k + 1
    return LabelVolume(Grid(dims), data)


def write_maps(out_dir, dims, n_maps, seed0):
    paths = []
    for i in range(n_maps):
        path = os.path.join(out_dir, f"map_{dims[0]}_{i}.nii")
        save_labels(path, phantom(dims, seed0 + i))
        paths.append(path)
    return paths


def write_priors(path):
    means = [25.0, 85.0, 145.0, 205.0]
    priors = GmmPriors(
        (0, 1, 2, 3),
        1,
        np.array([[[m, 4.0]] for m in means]),
        np.tile(np.array([np.log(25.0), 0.15]), (4, 1, 1)),
    )
    priors.save(path)
    return path


def run_generate(config):
    config_path = os.path.join(config["out_dir"] + ".json")
    with open(config_path, "w") as fh:
        json.dump(config, fh, indent=1)
    subprocess.run([sys.executable, "-m", "pvgen.cli", "generate", "--config", config_path], check=True)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="fixtures")
    parser.add_argument("--train-n", type=int, default=12)
    parser.add_argument("--val-n", type=int, default=4)
    parser.add_argument("--overfit-n", type=int, default=5)
    parser.add_argument("--dims", type=int, default=32)
    args = parser.parse_args()
    args.out = os.path.abspath(args.out)

    os.makedirs(args.out, exist_ok=True)
    dims = (args.dims,) * 3
    maps = write_maps(args.out, dims, 3, seed0=10)
    small_maps = write_maps(args.out, (16, 16, 16), 2, seed0=50)
    priors = write_priors(os.path.join(args.out, "priors.json"))

    base = {
        "priors": priors,
        "channels": [{"thickness_mm": [1, 1, 3], "spacing_mm": [1, 1, 3]}],
        "ranges": {
            "rotation_deg": [-15, 15],
            "scaling": [0.8, 1.2],
            "shearing": [-0.01, 0.01],
            "translation_vox": [-3, 3],
            "sigma_v": [0, 1.5],
            "sigma_b": [0, 0.3],
        },
        "format": "nii",
    }
    run_generate({**base, "label_maps": maps, "seed": 1, "n_pairs": args.train_n,
                  "out_dir": os.path.join(args.out, "train")})
    run_generate({**base, "label_maps": maps, "seed": 2, "n_pairs": args.val_n,
                  "out_dir": os.path.join(args.out, "val")})
    # the overfit set is a pure capacity check: crisp volumes (tiny blur
    # factor), mild deformation, so boundary voxels stay unambiguous
    overfit = {
        **base,
        "channels": [{"thickness_mm": [1, 1, 1], "spacing_mm": [1, 1, 1], "alpha_range": [0.2, 0.3]}],
        "ranges": {
            **base["ranges"],
            "scaling": [0.95, 1.05],
            "translation_vox": [-2, 2],
            "sigma_v": [0, 0.5],
            "sigma_b": [0, 0.1],
        },
    }
    run_generate({**overfit, "label_maps": small_maps, "seed": 3, "n_pairs": args.overfit_n,
                  "out_dir": os.path.join(args.out, "overfit")})
    # one pair in the raw fallback format, same seed/index as train pair 0
    run_generate({**base, "label_maps": maps, "seed": 1, "n_pairs": 1, "format": "raw",
                  "out_dir": os.path.join(args.out, "raw_pair")})

    # cross-check samples for the TypeScript readers
    rng = np.random.default_rng(0)
    image_path = os.path.join(args.out, "train", "image_000000.nii")
    data, spacing = read_nifti(image_path)
    samples = []
    for _ in range(64):
        x, y, z = (int(rng.integers(0, n)) for n in data.shape[:3])
        samples.append([x, y, z, float(data[x, y, z])])
    labels_path = os.path.join(args.out, "train", "labels_000000.nii")
    ldata, _ = read_nifti(labels_path)
    label_samples = [[x, y, z, int(ldata[x, y, z])] for x, y, z in
                     (tuple(int(rng.integers(0, n)) for n in ldata.shape) for _ in range(64))]
    with open(os.path.join(args.out, "cross_check.json"), "w") as fh:
        json.dump(
            {
                "image": {"file": image_path, "spacing": list(spacing), "samples": samples},
                "labels": {"file": labels_path, "samples": label_samples},
            },
            fh,
            indent=1,
        )
    print(f"fixtures ready under {args.out}")


if __name__ == "__main__":
    main()
