import json
import os

import numpy as np
import pytest

from pvgen import ConfigError, GenerationConfig, ParamRanges, gaussian_blur
from pvgen.generate import generate_pair, generate_sample, load_resources, run_benchmark, run_generate
from pvgen.nifti import read_nifti, save_labels
from pvgen.volumes import Grid, IntensityVolume
from conftest import make_phantom_labels, make_priors


def write_fixture(tmp_path, dims=(20, 20, 20), n_maps=2, n_labels=4, channels=1, **config_extra):
    maps = []
    for i in range(n_maps):
        vol = make_phantom_labels(dims, n_labels=n_labels, seed=i)
        path = tmp_path / f"map_{i}.nii"
        save_labels(path, vol)
        maps.append(str(path))
    priors = make_priors(list(range(n_labels)), channels=channels, logvar_loc=2.0)
    priors_path = tmp_path / "priors.json"
    priors.save(priors_path)
    doc = {
        "label_maps": maps,
        "priors": str(priors_path),
        "channels": [{"thickness_mm": [1, 1, 3], "spacing_mm": [1, 1, 3]}] * channels,
        "seed": 99,
        "n_pairs": 2,
        "out_dir": str(tmp_path / "out"),
    }
    doc.update(config_extra)
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(doc))
    return config_path


class TestConfig:
    def test_defaults_match_documented_ranges(self):
        r = ParamRanges()
        assert r.rotation_deg == (-15.0, 15.0)
        assert r.scaling == (0.8, 1.2)
        assert r.shearing == (-0.01, 0.01)
        assert r.translation_vox == (-20.0, 20.0)
        assert r.sigma_v == (0.0, 4.0)
        assert r.sigma_b == (0.0, 0.5)

    def test_default_alpha_range(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        assert config.channels.channels[0].alpha_range == (0.75, 1.25)

    def test_invalid_range_rejected(self):
        with pytest.raises(ConfigError):
            ParamRanges(sigma_v=(3.0, 1.0))

    def test_bad_json_raises_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            GenerationConfig.load(path)

    def test_missing_field_raises_config_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"label_maps": ["x.nii"]}))
        with pytest.raises(ConfigError):
            GenerationConfig.load(path)

    def test_roundtrip(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        back = GenerationConfig.from_json(config.to_json())
        assert back.seed == config.seed
        assert back.channels == config.channels


class TestGeneratePair:
    def test_missing_prior_label_fails_before_volumes(self, tmp_path):
        config_path = write_fixture(tmp_path, n_labels=4)
        config = GenerationConfig.load(config_path)
        short_priors = make_priors([0, 1, 2])  # label 3 missing
        short_priors.save(config.priors)
        with pytest.raises(ConfigError, match="3"):
            load_resources(config)

    def test_degenerate_config_reduces_to_blurred_means(self, tmp_path):
        config_path = write_fixture(
            tmp_path,
            n_maps=1,
            channels=1,
            ranges={
                "rotation_deg": [0, 0],
                "scaling": [1, 1],
                "shearing": [0, 0],
                "translation_vox": [0, 0],
                "sigma_v": [0, 0],
                "sigma_b": [0, 0],
            },
        )
        config = GenerationConfig.load(config_path)
        config = config.replace(
            channels=config.channels.__class__(
                (config.channels.channels[0].__class__((1, 1, 1), (1, 1, 1), (1.0, 1.0)),)
            )
        )
        res = load_resources(config)
        priors = make_priors([0, 1, 2, 3], logvar_loc=-40.0)  # essentially zero variance
        res = res.__class__(res.label_maps, priors)
        image, labels = generate_pair(config, 0, resources=res)
        assert np.array_equal(labels.data, res.label_maps[0].data)
        means = priors.mean_prior[:, 0, 0]
        flat = means[res.label_maps[0].data].astype(np.float32)
        expected = gaussian_blur(
            IntensityVolume(labels.grid, flat), np.full(3, 0.7329355)
        )
        assert np.max(np.abs(image.data - expected.data)) < 1e-3

    def test_same_index_bit_identical(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        res = load_resources(config)
        a_img, a_lab = generate_pair(config, 1, resources=res)
        b_img, b_lab = generate_pair(config, 1, resources=res)
        assert np.array_equal(a_img.data, b_img.data)
        assert np.array_equal(a_lab.data, b_lab.data)

    def test_different_indices_differ(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        res = load_resources(config)
        a = generate_sample(config, 0, resources=res)
        b = generate_sample(config, 1, resources=res)
        frac = np.mean(a.labels.data != b.labels.data)
        assert frac > 0.01 or not np.array_equal(a.image.data, b.image.data)

    def test_label_subset_preserved(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        res = load_resources(config)
        _, labels = generate_pair(config, 0, resources=res)
        assert labels.label_set <= res.label_maps[0].label_set | res.label_maps[1].label_set

    def test_output_grid_is_configured_grid(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path, dims=(16, 18, 20)))
        res = load_resources(config)
        image, labels = generate_pair(config, 0, resources=res)
        assert image.grid.dims == (16, 18, 20)
        assert image.grid.spacing == (1.0, 1.0, 1.0)
        assert labels.grid == image.grid

    def test_label_merge_applied_to_output(self, tmp_path):
        config_path = write_fixture(tmp_path, label_merge={"3": 2, "2": 2})
        config = GenerationConfig.load(config_path)
        res = load_resources(config)
        _, labels = generate_pair(config, 0, resources=res)
        assert 3 not in labels.label_set


class TestRunGenerate:
    def test_writes_pairs_and_manifest(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path)).replace(n_pairs=3)
        manifest = run_generate(config)
        files = sorted(os.listdir(config.out_dir))
        assert files == [
            "image_000000.nii",
            "image_000001.nii",
            "image_000002.nii",
            "labels_000000.nii",
            "labels_000001.nii",
            "labels_000002.nii",
            "manifest.json",
        ]
        assert len(manifest["entries"]) == 3

    def test_rerun_is_byte_identical(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path)).replace(n_pairs=2)
        run_generate(config)
        first = {f: (tmp_path / "out" / f).read_bytes() for f in os.listdir(config.out_dir)}
        run_generate(config)
        second = {f: (tmp_path / "out" / f).read_bytes() for f in os.listdir(config.out_dir)}
        assert first == second

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path)).replace(n_pairs=4)
        run_generate(config, workers=1)
        serial = {f: (tmp_path / "out" / f).read_bytes() for f in os.listdir(config.out_dir)}
        run_generate(config, workers=2)
        parallel = {f: (tmp_path / "out" / f).read_bytes() for f in os.listdir(config.out_dir)}
        assert serial == parallel

    def test_draws_respect_ranges(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path, dims=(8, 8, 8))).replace(n_pairs=60)
        manifest = run_generate(config)
        r = config.ranges
        for entry in manifest["entries"]:
            assert r.sigma_v[0] <= entry["sigma_v"] <= r.sigma_v[1]
            assert r.sigma_b[0] <= entry["sigma_b"] <= r.sigma_b[1]
            for a in entry["alphas"]:
                assert 0.75 <= a <= 1.25
            for v in entry["affine"]["rotation_deg"]:
                assert -15.0 <= v <= 15.0
            for v in entry["affine"]["scaling"]:
                assert 0.8 <= v <= 1.2

    def test_resume_skips_existing(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path)).replace(n_pairs=2)
        manifest = run_generate(config)
        image_path = tmp_path / "out" / "image_000001.nii"
        mtime_0 = (tmp_path / "out" / "image_000000.nii").stat().st_mtime_ns
        image_path.unlink()
        resumed = run_generate(config, resume=True)
        assert image_path.exists()
        assert (tmp_path / "out" / "image_000000.nii").stat().st_mtime_ns == mtime_0
        assert resumed == manifest

    def test_raw_format(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path, format="raw")).replace(n_pairs=1)
        run_generate(config)
        names = sorted(os.listdir(config.out_dir))
        assert "image_000000.raw" in names and "image_000000.json" in names


class TestBenchmark:
    def test_zero_pairs_empty_report(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        report = run_benchmark(config, 0)
        assert report["n"] == 0
        assert report["stages"] == {}

    def test_stage_times_bounded_by_total(self, tmp_path):
        config = GenerationConfig.load(write_fixture(tmp_path))
        report = run_benchmark(config.replace(out_dir=str(tmp_path / "bench")), 2)
        total = report["single_worker"]["total_s"]
        assert sum(report["stages"].values()) <= total + 1e-6
        assert report["single_worker"]["pairs_per_sec"] > 0
        assert set(report["stages"]) == {"deform", "synth", "blur", "resample", "io"}
