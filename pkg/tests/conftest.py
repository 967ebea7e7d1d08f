"""Shared fixtures: deterministic images and small trained codebooks."""

import numpy as np
import pytest

from vqattack.codec import train_codebook_lbg
from vqattack.synthetic import smooth_image


@pytest.fixture(scope="session")
def gray_images():
    rng = np.random.default_rng(1234)
    return [smooth_image(rng, 32, 32, 1) for _ in range(12)]


@pytest.fixture(scope="session")
def rgb_images():
    rng = np.random.default_rng(4321)
    return [smooth_image(rng, 32, 32, 3) for _ in range(12)]


@pytest.fixture(scope="session")
def gray_codebook(gray_images):
    return train_codebook_lbg(gray_images, 16, 4, 4, seed=0)


@pytest.fixture(scope="session")
def rgb_codebook(rgb_images):
    return train_codebook_lbg(rgb_images, 16, 4, 4, seed=0)
