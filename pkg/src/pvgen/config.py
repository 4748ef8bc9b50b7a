"""Generation configuration: one JSON document describing a whole run.

Parameter ranges default to the wide domain-randomization intervals used
for training-data synthesis: rotation [-15, 15] degrees, scaling
[0.8, 1.2], shearing [-0.01, 0.01], translation [-20, 20] voxels,
velocity-field std [0, 4], log-bias-field std [0, 0.5], and blur factor
alpha [0.75, 1.25] per channel.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .acquire import AcquisitionSpec, ChannelSpec, DEFAULT_ALPHA_RANGE

__all__ = ["ConfigError", "ParamRanges", "GenerationConfig", "DEFAULT_RANGES"]


class ConfigError(ValueError):
    """Invalid or inconsistent generation configuration."""


DEFAULT_RANGES = {
    "rotation_deg": (-15.0, 15.0),
    "scaling": (0.8, 1.2),
    "shearing": (-0.01, 0.01),
    "translation_vox": (-20.0, 20.0),
    "sigma_v": (0.0, 4.0),
    "sigma_b": (0.0, 0.5),
}


@dataclass(frozen=True)
class ParamRanges:
    """Uniform sampling intervals for the generative model parameters."""

    rotation_deg: tuple[float, float] = DEFAULT_RANGES["rotation_deg"]
    scaling: tuple[float, float] = DEFAULT_RANGES["scaling"]
    shearing: tuple[float, float] = DEFAULT_RANGES["shearing"]
    translation_vox: tuple[float, float] = DEFAULT_RANGES["translation_vox"]
    sigma_v: tuple[float, float] = DEFAULT_RANGES["sigma_v"]
    sigma_b: tuple[float, float] = DEFAULT_RANGES["sigma_b"]

    def __post_init__(self):
        for name in DEFAULT_RANGES:
            lo, hi = (float(v) for v in getattr(self, name))
            if lo > hi:
                raise ConfigError(f"range {name} has low > high: ({lo}, {hi})")
            object.__setattr__(self, name, (lo, hi))
        if self.scaling[0] <= 0:
            raise ConfigError(f"scaling range must stay positive, got {self.scaling}")
        if self.sigma_v[0] < 0 or self.sigma_b[0] < 0:
            raise ConfigError("sigma_v and sigma_b ranges must be >= 0")

    def as_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in DEFAULT_RANGES}


@dataclass(frozen=True)
class GenerationConfig:
    """Everything one `generate` run needs, loadable from a JSON file."""

    label_maps: tuple[str, ...]
    priors: str  # path to a GmmPriors JSON document
    channels: AcquisitionSpec
    atlas_res_mm: float = 1.0
    ranges: ParamRanges = field(default_factory=ParamRanges)
    seed: int = 0
    n_pairs: int = 1
    out_dir: str = "out"
    format: str = "nii"
    svf_steps: int = 8
    label_merge: dict | None = None  # optional output relabeling {old: new}
    normalize_intensities: bool = False

    def __post_init__(self):
        if not self.label_maps:
            raise ConfigError("at least one training label map is required")
        object.__setattr__(self, "label_maps", tuple(str(p) for p in self.label_maps))
        if self.atlas_res_mm <= 0:
            raise ConfigError(f"atlas_res_mm must be > 0, got {self.atlas_res_mm}")
        if self.format not in ("nii", "raw"):
            raise ConfigError(f"format must be 'nii' or 'raw', got {self.format!r}")
        if self.n_pairs < 0:
            raise ConfigError(f"n_pairs must be >= 0, got {self.n_pairs}")
        if self.svf_steps < 1:
            raise ConfigError(f"svf_steps must be >= 1, got {self.svf_steps}")
        if self.label_merge is not None:
            merge = {int(k): int(v) for k, v in self.label_merge.items()}
            object.__setattr__(self, "label_merge", merge)

    @classmethod
    def from_json(cls, doc: dict, base_dir: str = ".") -> "GenerationConfig":
        try:
            channels = AcquisitionSpec(
                tuple(
                    ChannelSpec(
                        thickness_mm=tuple(ch["thickness_mm"]),
                        spacing_mm=tuple(ch["spacing_mm"]),
                        alpha_range=tuple(ch.get("alpha_range", DEFAULT_ALPHA_RANGE)),
                    )
                    for ch in doc["channels"]
                )
            )
            ranges = ParamRanges(**{k: tuple(v) for k, v in doc.get("ranges", {}).items()})
            seed = doc.get("seed")
            if seed is None:
                env = os.environ.get("PVGEN_SEED")
                seed = int(env) if env else 0

            def resolve(p):
                p = str(p)
                return p if os.path.isabs(p) else os.path.join(base_dir, p)

            return cls(
                label_maps=tuple(resolve(p) for p in doc["label_maps"]),
                priors=resolve(doc["priors"]),
                channels=channels,
                atlas_res_mm=float(doc.get("atlas_res_mm", 1.0)),
                ranges=ranges,
                seed=int(seed),
                n_pairs=int(doc.get("n_pairs", 1)),
                out_dir=str(doc.get("out_dir", "out")),
                format=str(doc.get("format", "nii")),
                svf_steps=int(doc.get("svf_steps", 8)),
                label_merge=doc.get("label_merge"),
                normalize_intensities=bool(doc.get("normalize_intensities", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad generation config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "GenerationConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_json(doc, base_dir=os.path.dirname(os.path.abspath(path)))

    def replace(self, **kwargs) -> "GenerationConfig":
        from dataclasses import replace as _replace

        return _replace(self, **kwargs)

    def to_json(self) -> dict:
        return {
            "label_maps": list(self.label_maps),
            "priors": self.priors,
            "channels": [
                {
                    "thickness_mm": list(ch.thickness_mm),
                    "spacing_mm": list(ch.spacing_mm),
                    "alpha_range": list(ch.alpha_range),
                }
                for ch in self.channels.channels
            ],
            "atlas_res_mm": self.atlas_res_mm,
            "ranges": self.ranges.as_dict(),
            "seed": self.seed,
            "n_pairs": self.n_pairs,
            "out_dir": self.out_dir,
            "format": self.format,
            "svf_steps": self.svf_steps,
            "label_merge": self.label_merge,
            "normalize_intensities": self.normalize_intensities,
        }
