import numpy as np
import pytest

from vidagg import synth


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small two-stream synthetic dataset shared by pipeline-level tests."""
    out = tmp_path_factory.mktemp("tiny") / "data"
    config = synth.SynthConfig(
        classes=3, videos_per_class=6, frames=15, dim=6,
        action_fraction=0.5, noise_scale=0.3, seed=3,
    )
    manifest = synth.generate(config, out)
    return manifest, out / "manifest.txt"
