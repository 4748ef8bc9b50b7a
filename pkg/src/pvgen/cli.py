"""pvgen command line: generate training pairs, estimate hyperpriors,
query the exact tiny-grid oracle, and benchmark throughput.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 oracle
enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import nifti
from .config import ConfigError, GenerationConfig
from .estimate import estimate_class_stats, fit_gaussian_priors, rescale_variance
from .generate import run_benchmark, run_generate
from .oracle import OracleCapExceeded, TinyPvModel, cost_estimate, exact_posterior
from .synth import GmmPriors

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ORACLE_CAP = 4


def _load_config(args) -> GenerationConfig:
    config = GenerationConfig.load(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    elif "PVGEN_SEED" in os.environ and "seed" not in json.load(open(args.config)):
        overrides["seed"] = int(os.environ["PVGEN_SEED"])
    if getattr(args, "n", None) is not None:
        overrides["n_pairs"] = args.n
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return config.replace(**overrides) if overrides else config


def _cmd_generate(args) -> int:
    config = _load_config(args)
    manifest = run_generate(config, workers=args.workers, resume=args.resume)
    print(f"wrote {len(manifest['entries'])} pairs to {config.out_dir}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    config = _load_config(args)
    report = run_benchmark(config, args.n, workers=args.workers)
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK


def _read_pair_list(path):
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}: expected 'image seg' per line, got {line!r}")
            pairs.append(parts)
    if not pairs:
        raise ConfigError(f"{path}: no image/segmentation pairs listed")
    return pairs


def _cmd_estimate(args) -> int:
    pairs = _read_pair_list(args.pairs)
    with open(args.labels) as fh:
        doc = json.load(fh)
    labels = [int(v) for v in (doc["labels"] if isinstance(doc, dict) else doc)]
    if not labels:
        raise ConfigError(f"{args.labels}: empty label list")

    factor_args = (args.hr_res, args.lr_res)
    if (factor_args[0] is None) != (factor_args[1] is None):
        raise ConfigError("--hr-res and --lr-res must be given together")
    per_scan = []
    for image_path, seg_path in pairs:
        image = nifti.load_intensity(image_path)
        seg = nifti.load_labels(seg_path)
        stats = estimate_class_stats(image, seg, labels=[l for l in labels if l in seg.label_set])
        if args.hr_res is not None:
            hr_vol = float(np.prod(args.hr_res))
            lr_vol = float(np.prod(args.lr_res))
            stats = {
                lab: (mean, rescale_variance(var, hr_vol, lr_vol)) for lab, (mean, var) in stats.items()
            }
        per_scan.append(stats)
    try:
        priors = fit_gaussian_priors(per_scan, inflation=args.inflation, labels=labels)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    priors.save(args.out)
    print(f"wrote priors for {len(priors.labels)} classes to {args.out}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    model = TinyPvModel.load(args.model)
    with open(args.obs) as fh:
        doc = json.load(fh)
    obs = np.asarray(doc["observations"] if isinstance(doc, dict) else doc, dtype=float)
    post = exact_posterior(model, obs)

    print(f"configurations: {model.n_configurations}  log-evidence: {post.log_evidence:.6f}")
    print("MAP labels:", " ".join(str(v) for v in post.map_labels))
    print("posterior marginals (rows = HR voxels):")
    for j in range(model.n_hr_voxels):
        row = " ".join(f"{p:.6f}" for p in post.marginals[j])
        print(f"  voxel {j:3d}: {row}")
    m = max(int(round(model.m_ratio)), 1)
    print("evaluation counts of the simplified scheme, K =", model.n_classes)
    print("  M   prior  likelihood")
    for mm in range(1, m + 5):
        prior_ev, lik_ev = cost_estimate(max(model.n_classes, 2), mm)
        print(f"  {mm:<3d} {prior_ev:<6d} {lik_ev}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(
                {
                    "map_labels": post.map_labels.tolist(),
                    "marginals": post.marginals.tolist(),
                    "log_evidence": post.log_evidence,
                },
                fh,
                indent=1,
            )
            fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize training pairs from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("estimate-hyperparams", help="fit GMM hyperpriors from segmented scans")
    p.add_argument("--pairs", required=True, help="text file: one 'image seg' pair per line")
    p.add_argument("--labels", required=True, help="JSON list of class labels")
    p.add_argument("--out", required=True)
    p.add_argument("--inflation", type=float, default=5.0)
    p.add_argument("--hr-res", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"))
    p.add_argument("--lr-res", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"))
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("oracle", help="exact posterior on a tiny model")
    p.add_argument("--model", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("benchmark", help="generation throughput report")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_benchmark)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_CAP
    except (ConfigError, json.JSONDecodeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
