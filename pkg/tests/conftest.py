"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from irec.model import (
    PATCH_DIM,
    ImageGray8,
    LinearGaussianModel,
    fit_ppca,
    quantize_clamp,
    unpatchify,
)


def make_training_patches(rng, n=600, latent=8, noise_var=4.0):
    """Patches from a ground-truth linear-Gaussian generator."""
    w_true = rng.normal(size=(PATCH_DIM, latent)) * np.linspace(8.0, 2.0, latent)
    mu_true = np.full(PATCH_DIM, 120.0)
    z = rng.normal(size=(n, latent))
    noise = rng.normal(scale=np.sqrt(noise_var), size=(n, PATCH_DIM))
    return z @ w_true.T + mu_true + noise


def sample_image(model: LinearGaussianModel, rng, width: int, height: int) -> ImageGray8:
    """Draw an image from the model's own generative process."""
    rows = (height + 7) // 8
    cols = (width + 7) // 8
    patches = []
    for _ in range(rows * cols):
        z = rng.normal(size=model.latent_dim)
        x = model.W @ z + model.mu + rng.normal(
            scale=np.sqrt(model.noise_var), size=model.data_dim
        )
        patches.append(quantize_clamp(x).astype(np.float64))
    plane = unpatchify(patches, width, height)
    return ImageGray8(width=width, height=height, pixels=plane.astype(np.uint8))


@pytest.fixture(scope="session")
def fitted_model() -> LinearGaussianModel:
    rng = np.random.default_rng(2024)
    return fit_ppca(make_training_patches(rng), latent_dim=8)


@pytest.fixture(scope="session")
def small_image(fitted_model) -> ImageGray8:
    rng = np.random.default_rng(7)
    return sample_image(fitted_model, rng, 16, 16)
