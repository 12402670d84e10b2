import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from driftmap.synth import BlobSpec, DriftScenario, EmergeEvent, SplitEvent


def axis_vec(dim: int, i: int, r: float) -> np.ndarray:
    v = np.zeros(dim)
    v[i] = r
    return v


def emergence_scenario(seed: int, dim: int = 16, batch_size: int = 200, n_batches: int = 6) -> DriftScenario:
    """k0=2 blobs 12 apart; a 30%-weight blob appears at batch 3, 25 sigma out."""
    return DriftScenario(
        dim=dim,
        batch_size=batch_size,
        n_batches=n_batches,
        seed=seed,
        blobs=[
            BlobSpec("A", axis_vec(dim, 0, 0.0), 1.0, 0.5),
            BlobSpec("B", axis_vec(dim, 0, 12.0), 1.0, 0.5),
        ],
        events=[EmergeEvent(at_batch=3, blob=BlobSpec("C", axis_vec(dim, 1, 25.0), 1.0, 0.30))],
    )


def split_scenario(seed: int, dim: int = 16, batch_size: int = 200, n_batches: int = 5) -> DriftScenario:
    """40% of blob A (weight 0.6) splits off 8 sigma away at batch 3."""
    return DriftScenario(
        dim=dim,
        batch_size=batch_size,
        n_batches=n_batches,
        seed=seed,
        blobs=[
            BlobSpec("A", axis_vec(dim, 0, 0.0), 1.0, 0.6),
            BlobSpec("B", axis_vec(dim, 0, 6.0), 1.0, 0.4),
        ],
        events=[SplitEvent(at_batch=3, parent="A", offset=axis_vec(dim, 1, 8.0), fraction=0.40)],
    )


def null_scenario(seed: int, dim: int = 16, batch_size: int = 200, n_batches: int = 10) -> DriftScenario:
    """Stationary 2-blob mixture, components 10 sigma apart."""
    return DriftScenario(
        dim=dim,
        batch_size=batch_size,
        n_batches=n_batches,
        seed=seed,
        blobs=[
            BlobSpec("A", axis_vec(dim, 0, 0.0), 1.0, 0.5),
            BlobSpec("B", axis_vec(dim, 0, 10.0), 1.0, 0.5),
        ],
    )


def nine_concept_scenario(seed: int, batch_size: int = 500) -> DriftScenario:
    """2 initial + 7 emerge events at growing radii on fresh axes; n = 10 * batch_size."""
    dim = 16
    events = [
        EmergeEvent(at_batch=3 + i, blob=BlobSpec(f"C{i+1}", axis_vec(dim, 1 + i, 25.0 + 15.0 * i), 1.0, 0.22))
        for i in range(7)
    ]
    return DriftScenario(
        dim=dim,
        batch_size=batch_size,
        n_batches=10,
        seed=seed,
        blobs=[
            BlobSpec("A", axis_vec(dim, 0, 0.0), 1.0, 0.5),
            BlobSpec("B", axis_vec(dim, 0, 12.0), 1.0, 0.5),
        ],
        events=events,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
