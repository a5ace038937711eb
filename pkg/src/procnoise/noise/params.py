"""Parameter records for the noise generators (a tagged union by dataclass)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..errors import ParameterError

SUPPORTED_DIMS = (2, 3, 4)


@dataclass(frozen=True)
class SimplexParams:
    """Simplex noise in 2, 3 or 4 dimensions.

    `step` is the pixel stride: pixel (i, j) samples the noise at
    (i/step, j/step).  For dim > 2 the remaining coordinates are filled from
    `slice_coords` (padded with zeros), selecting a fixed slice of the
    higher-dimensional noise.
    """

    dim: int = 2
    step: float = 40.0
    slice_coords: tuple[float, ...] = ()
    r_squared: float = 0.5

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise ParameterError(f"simplex dim must be one of {SUPPORTED_DIMS}, got {self.dim}")
        if self.step < 1:
            raise ParameterError(f"step must be >= 1, got {self.step}")
        if self.r_squared <= 0:
            raise ParameterError(f"r_squared must be positive, got {self.r_squared}")
        if len(self.slice_coords) > self.dim - 2:
            raise ParameterError(
                f"at most {self.dim - 2} slice coordinates allowed for dim={self.dim}"
            )
        object.__setattr__(self, "slice_coords", tuple(float(c) for c in self.slice_coords))

    @property
    def full_slice(self) -> tuple[float, ...]:
        """Slice coordinates padded with zeros to exactly dim - 2 entries."""
        pad = self.dim - 2 - len(self.slice_coords)
        return self.slice_coords + (0.0,) * pad


@dataclass(frozen=True)
class WorleyParams:
    """Cellular noise seeded by `points` distinct feature pixels."""

    points: int = 100

    def __post_init__(self):
        if self.points < 1:
            raise ParameterError(f"points must be >= 1, got {self.points}")


@dataclass(frozen=True)
class PerlinParams:
    """Octaved lattice gradient noise pushed through a sine color map."""

    octaves: int = 1
    period: float = 60.0
    sine_frequency: float = 36.0

    def __post_init__(self):
        if not 1 <= self.octaves <= 4:
            raise ParameterError(f"octaves must be in [1, 4], got {self.octaves}")
        if self.period <= 0:
            raise ParameterError(f"period must be positive, got {self.period}")


@dataclass(frozen=True)
class GaussianParams:
    """Per-pixel normal draws; mean/std are in 8-bit pixel units."""

    mean: float = 10.0
    std: float = 50.0

    def __post_init__(self):
        if self.std <= 0:
            raise ParameterError(f"std must be positive, got {self.std}")


@dataclass(frozen=True)
class SaltPepperParams:
    """Salt-and-pepper mask: +1 / -1 each with probability prob/2, else 0."""

    prob: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise ParameterError(f"prob must be in [0, 1], got {self.prob}")


NoiseParams = Union[SimplexParams, WorleyParams, PerlinParams, GaussianParams, SaltPepperParams]

_KIND_NAMES = {
    SimplexParams: "simplex",
    WorleyParams: "worley",
    PerlinParams: "perlin",
    GaussianParams: "gaussian",
    SaltPepperParams: "sp",
}


def kind_name(params: NoiseParams) -> str:
    """Short stable tag for a parameter record ("simplex", "worley", ...)."""
    try:
        return _KIND_NAMES[type(params)]
    except KeyError:
        raise ParameterError(f"unknown noise parameter type {type(params).__name__}") from None
