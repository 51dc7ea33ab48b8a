import numpy as np
import pytest

from resonet.dataset import build_synth_manifest, partition_subsets


@pytest.fixture(scope="session")
def corpus():
    """The default seeded synthetic corpus with its subset partition."""
    manifest = build_synth_manifest(1001)
    partition = partition_subsets(manifest, 55)
    return manifest, partition


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
