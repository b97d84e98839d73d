import numpy as np
import pytest

from hemlets import canonical_skeleton
from hemlets.trainer import synth_dataset


@pytest.fixture(scope="session")
def skel():
    return canonical_skeleton()


def make_samples(seed, count, kind_mix=(1.0, 0.0, 0.0)):
    """Random annotated samples from the synthetic generator."""
    skeleton = canonical_skeleton()
    data = synth_dataset(np.random.default_rng(seed), count, skeleton, kind_mix=kind_mix)
    return [s.sample for s in data]
