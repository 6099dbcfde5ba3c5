import numpy as np
import pytest

from molcomm import ChannelParams, generate_sequences, DEFAULT_SEED


@pytest.fixture(scope="session")
def params40():
    """Reference link with 40 ms sampling (5 samples per 200 ms symbol)."""
    return ChannelParams(
        rx_radius=0.5e-6, distance=5e-6, diffusion=1e-10,
        sample_period=0.04, samples_per_bit=5, seq_length=20,
        molecules_per_one=20000,
    )


@pytest.fixture(scope="session")
def params8():
    """Reference link with 8 ms sampling (25 samples per 200 ms symbol)."""
    return ChannelParams(
        rx_radius=0.5e-6, distance=5e-6, diffusion=1e-10,
        sample_period=0.008, samples_per_bit=25, seq_length=20,
        molecules_per_one=20000,
    )


@pytest.fixture(scope="session")
def sequences40(params40):
    return generate_sequences(params40, 1000, DEFAULT_SEED)


@pytest.fixture(scope="session")
def sequences8(params8):
    return generate_sequences(params8, 1000, DEFAULT_SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(20240331)
