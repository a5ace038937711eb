"""Classic lattice gradient noise with octave summation and a sine map.

This is the comparison baseline: value noise on an integer lattice with
smoothstep-faded bilinear blending, summed over octaves with halving
amplitude and doubling frequency, then passed through a sine color map.
The sine map turns the smooth fractal field into the banded marble-like
pattern used for the baseline perturbations.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from .field import NoiseField
from .params import PerlinParams
from .simplex import GradientTable

# Unit gradients in 2D bound a single lattice cell's value by sqrt(2)/2,
# so this stretch fills [-1, 1] before blending.
_LATTICE_SCALE = math.sqrt(2.0)


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _lattice_noise(points: np.ndarray, table: GradientTable) -> np.ndarray:
    """Single-octave gradient noise for points shaped (M, 2) -> (M,)."""
    base = np.floor(points).astype(np.int64)
    frac = points - base

    dots = {}
    for off in ((0, 0), (1, 0), (0, 1), (1, 1)):
        corner = base + np.array(off, dtype=np.int64)
        grad = table.gradient_at(corner)
        d = frac - np.array(off, dtype=np.float64)
        dots[off] = (d * grad).sum(axis=1)

    u = _fade(frac[:, 0])
    v = _fade(frac[:, 1])
    bottom = dots[(0, 0)] + u * (dots[(1, 0)] - dots[(0, 0)])
    top = dots[(0, 1)] + u * (dots[(1, 1)] - dots[(0, 1)])
    return _LATTICE_SCALE * (bottom + v * (top - bottom))


def perlin_field(height: int, width: int, params: PerlinParams, seed: int) -> NoiseField:
    """Octave-summed lattice noise under the sine color map.

    Pixel (j, i) samples octave o at (i, j) * 2^o / period with amplitude
    0.5^o; the raw octave sum v is mapped through
    sin(2*pi*sine_frequency*v), which keeps every value in [-1, 1].
    """
    if height < 1 or width < 1:
        raise ParameterError(f"field shape must be positive, got {height}x{width}")
    table = GradientTable.from_seed(seed, 2)

    xs = np.tile(np.arange(width, dtype=np.float64), height)
    ys = np.repeat(np.arange(height, dtype=np.float64), width)
    pixels = np.stack([xs, ys], axis=1)

    total = np.zeros(height * width, dtype=np.float64)
    for octave in range(params.octaves):
        amp = 0.5 ** octave
        freq = 2.0 ** octave / params.period
        total += amp * _lattice_noise(pixels * freq, table)

    values = np.sin(2.0 * np.pi * params.sine_frequency * total)
    np.clip(values, -1.0, 1.0, out=values)
    return NoiseField(values=values.reshape(height, width))
