import numpy as np
import pytest

from ofrd import make_numerology


@pytest.fixture
def num_small():
    """Scaled-down 30 kHz numerology for fast unit tests."""
    return make_numerology(
        subcarrier_spacing_hz=30e3, cp_length_s=2.3e-6,
        active_subcarriers=64, ofdm_symbols=16, fft_size=128,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
