import numpy as np
import pytest

from scribeloop.features import FeatureSequence
from scribeloop.labels import LabelVocab, Segmentation


@pytest.fixture
def small_vocab():
    return LabelVocab(names=("walk", "run", "jump"))


def random_features(rng, T=64, D=8):
    return FeatureSequence(values=rng.normal(size=(T, D)).astype(np.float32))


def random_segmentation(rng, T, num_labels, max_segments=6):
    """Random tiling of [0, T) with no two adjacent labels equal."""
    k = int(rng.integers(1, max_segments + 1))
    k = min(k, T)
    cuts = sorted(rng.choice(np.arange(1, T), size=k - 1, replace=False).tolist()) if k > 1 else []
    edges = [0] + cuts + [T]
    labels = []
    for _ in range(len(edges) - 1):
        choices = [l for l in range(num_labels) if not labels or l != labels[-1]]
        labels.append(int(rng.choice(choices)))
    segs = tuple((edges[i], edges[i + 1], labels[i]) for i in range(len(edges) - 1))
    return Segmentation(segments=segs)
