"""Noise field generators and their parameter records."""

from __future__ import annotations

from typing import Optional

from ..errors import ParameterError
from .field import NoiseField
from .params import (
    GaussianParams,
    NoiseParams,
    PerlinParams,
    SaltPepperParams,
    SimplexParams,
    WorleyParams,
    kind_name,
)
from .perlin import perlin_field
from .random_fields import gaussian_field, salt_pepper_mask
from .simplex import (
    GradientTable,
    SkewConstants,
    kernel_contribution,
    simplex_field,
    simplex_sample,
    skew,
    skew_constants,
    unskew,
)
from .worley import (
    WorleyFeatureSet,
    nearest_feature_distance,
    worley_feature_points,
    worley_field,
    worley_texture,
)


def make_field(
    height: int, width: int, params: NoiseParams, seed: int
) -> tuple[NoiseField, Optional[WorleyFeatureSet]]:
    """Generate a field for any parameter record.

    Returns the field plus, for Worley parameters only, the feature set
    needed to mark feature pixels downstream.
    """
    if isinstance(params, SimplexParams):
        return simplex_field(height, width, params, seed), None
    if isinstance(params, WorleyParams):
        return worley_field(height, width, params, seed)
    if isinstance(params, PerlinParams):
        return perlin_field(height, width, params, seed), None
    if isinstance(params, GaussianParams):
        return gaussian_field(height, width, params, seed), None
    if isinstance(params, SaltPepperParams):
        return salt_pepper_mask(height, width, params, seed), None
    raise ParameterError(f"unknown noise parameter record: {params!r}")


__all__ = [
    "NoiseField",
    "NoiseParams",
    "SimplexParams",
    "WorleyParams",
    "PerlinParams",
    "GaussianParams",
    "SaltPepperParams",
    "kind_name",
    "make_field",
    "GradientTable",
    "SkewConstants",
    "skew_constants",
    "skew",
    "unskew",
    "kernel_contribution",
    "simplex_sample",
    "simplex_field",
    "WorleyFeatureSet",
    "worley_feature_points",
    "nearest_feature_distance",
    "worley_field",
    "worley_texture",
]
