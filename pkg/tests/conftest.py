import numpy as np
import pytest

from marineseg.data import DiskDataset
from marineseg.synthetic import generate_synthetic_dataset

SPLIT_DATASET_SEED = 101


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """40 training patches (64x64, half-labeled) plus small val/test splits."""
    root = tmp_path_factory.mktemp("synth") / "ds"
    generate_synthetic_dataset(root, n_patches=40, size=(64, 64),
                               label_fraction=0.5, seed=SPLIT_DATASET_SEED,
                               n_val=2, n_test=2)
    return root


@pytest.fixture(scope="session")
def synth_dataset(synth_root):
    return DiskDataset(synth_root)


@pytest.fixture(scope="session")
def synth_maps(synth_dataset):
    return {pid: synth_dataset.load(pid)[1] for pid in synth_dataset.train_ids}


def random_probs(rng, c, h, w):
    """A valid per-pixel probability field of shape (c, h, w)."""
    raw = rng.random((c, h, w)) + 1e-3
    return raw / raw.sum(axis=0, keepdims=True)
