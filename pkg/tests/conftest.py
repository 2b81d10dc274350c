import numpy as np
import pytest

from fupareto.config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    """A quick synthetic configuration for federation/CLI tests."""
    return RunConfig(per_class=60, clients=4, unlearn_count=1,
                     pretrain_rounds=30, unlearn_rounds=8, post_rounds=4)
