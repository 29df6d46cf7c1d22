import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lcproj.dist import DiscreteDistribution, make_rng, random_distribution

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def distributions(draw, min_atoms=2, max_atoms=8, lo=-5.0, hi=5.0):
    """Distributions with well-separated atoms and weights bounded away from zero."""
    k = draw(st.integers(min_atoms, max_atoms))
    locs = draw(st.lists(st.floats(lo, hi, allow_nan=False), min_size=k, max_size=k,
                         unique_by=lambda v: round(v, 3)))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    w = np.asarray(raw) / np.sum(raw)
    return DiscreteDistribution(locs, w)


@pytest.fixture
def corpus():
    rng = make_rng((7, 1))
    return [random_distribution(rng) for _ in range(30)]
