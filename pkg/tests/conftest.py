import numpy as np
import pytest

from gbbmlab.spectral import SpectralField


def random_field(seed: int, n_max: int, decay: float = 0.0, scale: float = 1.0) -> SpectralField:
    """Deterministic random trig polynomial for oracle tests."""
    rng = np.random.default_rng(seed)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    c = (rng.standard_normal(n_max) + 1j * rng.standard_normal(n_max)) * scale
    return SpectralField(c / n ** decay if decay else c)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
