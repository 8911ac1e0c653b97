import numpy as np
import pytest
import torch

from sg3edit.generator import GeneratorHandle, toy_config

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def toy_handle() -> GeneratorHandle:
    """Aligned 64px oracle, float64: the default geometric test subject."""
    handle = GeneratorHandle(toy_config(resolution=64, latent_dim=16, seed=3))
    handle.average_latent(2048, seed=7)
    return handle


@pytest.fixture(scope="session")
def unaligned_handle() -> GeneratorHandle:
    """Unaligned 64px oracle: its first-layer shift depends on row 0."""
    handle = GeneratorHandle(toy_config(resolution=64, latent_dim=16, seed=5, alignment="unaligned"))
    handle.average_latent(2048, seed=7)
    return handle


@pytest.fixture(scope="session")
def small_handle() -> GeneratorHandle:
    """32px low-width oracle for anything that trains."""
    handle = GeneratorHandle(
        toy_config(
            resolution=32, latent_dim=8, channels=12, num_features=24, seed=21, dtype="float32"
        )
    )
    handle.average_latent(4096, seed=7)
    return handle


@pytest.fixture(scope="session")
def toy_code(toy_handle):
    return toy_handle.sample_wplus_random(1, seed=11)[0]


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))
