import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def complex_matrices(n_min=1, n_max=6, bound=10.0):
    """Hypothesis strategy: square complex matrices with entries in [-bound, bound]^2."""
    floats = st.floats(-bound, bound, allow_nan=False, allow_infinity=False)

    @st.composite
    def build(draw):
        n = draw(st.integers(n_min, n_max))
        re = np.array(draw(st.lists(floats, min_size=n * n, max_size=n * n))).reshape(n, n)
        im = np.array(draw(st.lists(floats, min_size=n * n, max_size=n * n))).reshape(n, n)
        return re + 1j * im

    return build()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
