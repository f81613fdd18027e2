import numpy as np
import pytest

from vidagg import pipeline, store, synth


def test_noise_free_full_action_frames_equal_prototype(tmp_path):
    config = synth.SynthConfig(
        classes=2, videos_per_class=2, frames=6, dim=4,
        action_fraction=1.0, noise_scale=0.0, seed=0,
    )
    manifest = synth.generate(config, tmp_path / "d")
    per_class_rows = {}
    for rec in manifest.records:
        m = store.load_feature_matrix(manifest.root / rec.path)
        assert np.all(m == m[0])  # rho=1, sigma=0: constant sequence
        key = (rec.stream, rec.label)
        per_class_rows.setdefault(key, []).append(m[0])
    for (stream, label), rows in per_class_rows.items():
        for row in rows[1:]:
            assert np.array_equal(row, rows[0])  # same prototype per class
    assert not np.array_equal(
        per_class_rows[("spatial", 0)][0], per_class_rows[("spatial", 1)][0]
    )


def test_action_frame_count_and_contiguity(tmp_path):
    config = synth.SynthConfig(
        classes=1, videos_per_class=3, frames=50, dim=3,
        action_fraction=0.2, noise_scale=0.0, seed=1,
    )
    assert config.action_frames == 10
    manifest = synth.generate(config, tmp_path / "d")
    for rec in manifest.records:
        m = store.load_feature_matrix(manifest.root / rec.path)
        background = m[0] if np.array_equal(m[0], m[-1]) else None
        assert background is not None  # offset <= 40 keeps endpoints background
        is_action = ~np.all(m == background, axis=1)
        assert is_action.sum() == 10
        idx = np.flatnonzero(is_action)
        assert np.all(np.diff(idx) == 1)  # one contiguous block


def test_determinism_bit_identical_files(tmp_path):
    config = synth.SynthConfig(
        classes=2, videos_per_class=3, frames=8, dim=5,
        action_fraction=0.5, noise_scale=1.0, seed=9,
    )
    m1 = synth.generate(config, tmp_path / "a")
    m2 = synth.generate(config, tmp_path / "b")
    for r1, r2 in zip(m1.records, m2.records):
        assert (m1.root / r1.path).read_bytes() == (m2.root / r2.path).read_bytes()
    assert (tmp_path / "a" / "manifest.txt").read_text() == (
        tmp_path / "b" / "manifest.txt"
    ).read_text()


def test_manifest_passes_validation_and_split_sizes(tmp_path):
    config = synth.SynthConfig(
        classes=3, videos_per_class=5, frames=6, dim=2,
        action_fraction=0.5, noise_scale=0.2, seed=4,
    )
    manifest = synth.generate(config, tmp_path / "d")  # load_manifest validates
    assert len(manifest.classes) == 3
    assert len(manifest.records) == 3 * 5 * 2
    train = manifest.video_ids("split1", "train")
    test = manifest.video_ids("split1", "test")
    assert len(train) == 9  # ceil(5/2) per class
    assert len(test) == 6
    assert not set(train) & set(test)


def test_config_validation():
    with pytest.raises(ValueError):
        synth.SynthConfig(0, 1, 1, 1, 0.5, 0.1)
    with pytest.raises(ValueError):
        synth.SynthConfig(1, 1, 1, 1, 0.0, 0.1)
    with pytest.raises(ValueError):
        synth.SynthConfig(1, 1, 1, 1, 1.5, 0.1)
    with pytest.raises(ValueError):
        synth.SynthConfig(1, 1, 1, 1, 0.5, -0.1)


def test_missing_parent_directory_raises(tmp_path):
    config = synth.SynthConfig(1, 1, 2, 2, 1.0, 0.0)
    with pytest.raises(OSError):
        synth.generate(config, tmp_path / "no" / "such" / "parent")


def test_sanity_floor_full_action_low_noise(tmp_path):
    # rho=1 with small noise: any aggregation + classifier should be perfect
    config = synth.SynthConfig(
        classes=3, videos_per_class=6, frames=12, dim=8,
        action_fraction=1.0, noise_scale=0.05, seed=2,
    )
    manifest = synth.generate(config, tmp_path / "d")
    mpath = tmp_path / "d" / "manifest.txt"
    for method in ("mean", "max"):
        cfg = pipeline.TrainConfig(method=method, samples=6, seed=2)
        bundle = tmp_path / f"b_{method}"
        pipeline.train_bundle(manifest, mpath, cfg, bundle)
        result = pipeline.eval_bundle(manifest, mpath, bundle)
        assert result["mean"]["fused"] == 1.0
