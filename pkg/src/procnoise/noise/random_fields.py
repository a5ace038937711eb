"""Unstructured per-pixel noise baselines: Gaussian and salt-and-pepper."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from .field import NoiseField
from .params import GaussianParams, SaltPepperParams


def gaussian_field(height: int, width: int, params: GaussianParams, seed: int) -> NoiseField:
    """Independent normal draws per pixel.

    Mean and standard deviation are given in 8-bit pixel units and divided
    by 255 so the field lives on the same normalized scale as the other
    generators, with a final clamp to [-1, 1].
    """
    if height < 1 or width < 1:
        raise ParameterError(f"field shape must be positive, got {height}x{width}")
    rng = np.random.default_rng(seed)
    values = rng.normal(params.mean, params.std, size=(height, width)) / 255.0
    np.clip(values, -1.0, 1.0, out=values)
    return NoiseField(values=values)


def salt_pepper_mask(height: int, width: int, params: SaltPepperParams, seed: int) -> NoiseField:
    """Ternary impulse mask: +1 salt, -1 pepper, 0 elsewhere.

    Each pixel is independently salted with probability prob/2, peppered
    with probability prob/2, and left untouched otherwise.
    """
    if height < 1 or width < 1:
        raise ParameterError(f"field shape must be positive, got {height}x{width}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=(height, width))
    values = np.zeros((height, width), dtype=np.float64)
    values[u < params.prob / 2.0] = 1.0
    values[(u >= params.prob / 2.0) & (u < params.prob)] = -1.0
    return NoiseField(values=values)
