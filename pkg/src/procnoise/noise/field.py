"""Noise field container shared by every generator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError


@dataclass(frozen=True)
class NoiseField:
    """An H x W grid of real noise values with a declared closed value range.

    The declared range is a contract: every value is validated against it at
    construction time, so downstream code (perturbation scaling in
    particular) may rely on it without rescanning the array.
    """

    values: np.ndarray
    value_range: tuple[float, float] = field(default=(-1.0, 1.0))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ParameterError(f"noise field must be a 2-D H x W array, got shape {v.shape}")
        lo, hi = self.value_range
        if not lo < hi:
            raise ParameterError(f"invalid value range [{lo}, {hi}]")
        if v.size and (v.min() < lo or v.max() > hi):
            raise ParameterError(
                f"values [{v.min()}, {v.max()}] fall outside declared range [{lo}, {hi}]"
            )
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def signed(self) -> np.ndarray:
        """Values mapped onto [-1, 1]: [0, 1] fields go through 2*m - 1,
        already-signed fields are returned as-is."""
        lo, hi = self.value_range
        if (lo, hi) == (-1.0, 1.0):
            return self.values
        if (lo, hi) == (0.0, 1.0):
            return 2.0 * self.values - 1.0
        # generic affine map for nonstandard declared ranges
        return 2.0 * (self.values - lo) / (hi - lo) - 1.0
