"""Simplex noise over 2, 3, and 4 dimensions.

The sampler follows the classic recipe: skew the input point onto the
integer simplicial grid, walk the simplex vertices in decreasing order of
the internal coordinates, hash each vertex through a seeded permutation
table into a fixed gradient set, and sum radially clamped polynomial
kernels.  Fields are evaluated for whole pixel grids at once with numpy;
`simplex_sample` routes single points through the same code path so a
pixel of a field and a lone sample at the same coordinates agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .field import NoiseField
from .params import SimplexParams

SQRT1_2 = math.sqrt(0.5)

GRADIENTS_2D = np.array(
    [
        (1.0, 0.0),
        (SQRT1_2, SQRT1_2),
        (0.0, 1.0),
        (-SQRT1_2, SQRT1_2),
        (-1.0, 0.0),
        (-SQRT1_2, -SQRT1_2),
        (0.0, -1.0),
        (SQRT1_2, -SQRT1_2),
    ],
    dtype=np.float64,
)

GRADIENTS_3D = np.array(
    [
        (1, 1, 0), (-1, 1, 0), (1, -1, 0), (-1, -1, 0),
        (1, 0, 1), (-1, 0, 1), (1, 0, -1), (-1, 0, -1),
        (0, 1, 1), (0, -1, 1), (0, 1, -1), (0, -1, -1),
    ],
    dtype=np.float64,
)

GRADIENTS_4D = np.array(
    [
        (0, 1, 1, 1), (0, 1, 1, -1), (0, 1, -1, 1), (0, 1, -1, -1),
        (0, -1, 1, 1), (0, -1, 1, -1), (0, -1, -1, 1), (0, -1, -1, -1),
        (1, 0, 1, 1), (1, 0, 1, -1), (1, 0, -1, 1), (1, 0, -1, -1),
        (-1, 0, 1, 1), (-1, 0, 1, -1), (-1, 0, -1, 1), (-1, 0, -1, -1),
        (1, 1, 0, 1), (1, 1, 0, -1), (1, -1, 0, 1), (1, -1, 0, -1),
        (-1, 1, 0, 1), (-1, 1, 0, -1), (-1, -1, 0, 1), (-1, -1, 0, -1),
        (1, 1, 1, 0), (1, 1, -1, 0), (1, -1, 1, 0), (1, -1, -1, 0),
        (-1, 1, 1, 0), (-1, 1, -1, 0), (-1, -1, 1, 0), (-1, -1, -1, 0),
    ],
    dtype=np.float64,
)

_GRADIENTS = {2: GRADIENTS_2D, 3: GRADIENTS_3D, 4: GRADIENTS_4D}

# Reciprocals of the largest raw kernel-sum magnitude observed over 1e7
# uniformly scattered sample points per dimension at the default kernel
# radius.  They stretch the raw sum to roughly fill [-1, 1]; the final
# clamp catches the rare sample that lands beyond the observed extreme.
SCALE_BY_DIM = {2: 99.204, 3: 76.891, 4: 62.826}


@dataclass(frozen=True)
class SkewConstants:
    """Skew/unskew factors for mapping between input and simplicial grids."""

    dim: int
    skew_factor: float
    unskew_factor: float

    @classmethod
    def for_dim(cls, dim: int) -> "SkewConstants":
        if dim < 1:
            raise ParameterError(f"dim must be positive, got {dim}")
        root = math.sqrt(dim + 1)
        return cls(
            dim=dim,
            skew_factor=(root - 1.0) / dim,
            unskew_factor=(1.0 - 1.0 / root) / dim,
        )


def skew_constants(dim: int) -> SkewConstants:
    """Skew/unskew factor pair for a supported noise dimension."""
    if dim not in _GRADIENTS:
        raise ParameterError(f"unsupported dimension {dim}; expected 2, 3, or 4")
    return SkewConstants.for_dim(dim)


def skew(point: np.ndarray, constants: SkewConstants) -> np.ndarray:
    """Map input-space coordinates onto the skewed integer grid."""
    point = np.asarray(point, dtype=np.float64)
    shift = point.sum(axis=-1, keepdims=True) * constants.skew_factor
    return point + shift


def unskew(point: np.ndarray, constants: SkewConstants) -> np.ndarray:
    """Inverse of `skew`: map grid coordinates back to input space."""
    point = np.asarray(point, dtype=np.float64)
    shift = point.sum(axis=-1, keepdims=True) * constants.unskew_factor
    return point - shift


def kernel_contribution(delta: np.ndarray, gradient: np.ndarray, r_squared: float = 0.5) -> float:
    """One vertex's term: (max(0, r^2 - |delta|^2))^4 * (delta . gradient)."""
    delta = np.asarray(delta, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    t = r_squared - float(np.dot(delta, delta))
    if t <= 0.0:
        return 0.0
    return t ** 4 * float(np.dot(delta, gradient))


@dataclass(frozen=True)
class GradientTable:
    """Seeded permutation table plus the gradient set for one dimension."""

    dim: int
    perm: np.ndarray
    gradients: np.ndarray

    @classmethod
    def from_seed(cls, seed: int, dim: int) -> "GradientTable":
        if dim not in _GRADIENTS:
            raise ParameterError(f"no gradient set for dim {dim}")
        rng = np.random.default_rng(seed)
        half = rng.permutation(256).astype(np.int64)
        return cls(
            dim=dim,
            perm=np.concatenate([half, half]),
            gradients=_GRADIENTS[dim],
        )

    def hash_vertex(self, lattice: np.ndarray) -> np.ndarray:
        """Fold integer lattice coordinates through the permutation table.

        Coordinates are folded from the last axis entry outward so each one
        perturbs the lookup index produced by the ones after it.
        """
        lattice = np.asarray(lattice, dtype=np.int64)
        idx = np.zeros(lattice.shape[:-1], dtype=np.int64)
        for k in reversed(range(lattice.shape[-1])):
            idx = self.perm[(lattice[..., k] & 255) + idx]
        return idx % len(self.gradients)

    def gradient_at(self, lattice: np.ndarray) -> np.ndarray:
        return self.gradients[self.hash_vertex(lattice)]


def _raw_sum(points: np.ndarray, table: GradientTable, r_squared: float) -> np.ndarray:
    """Unscaled kernel sums for a batch of points, shaped (M, dim) -> (M,)."""
    n = table.dim
    constants = SkewConstants.for_dim(n)

    skewed = skew(points, constants)
    base = np.floor(skewed).astype(np.int64)
    internal = skewed - base

    # rank[m, j]: how many coordinates beat coordinate j, counting equal
    # values at a lower index as a win.  Vertex v then adds 1 to every
    # coordinate of rank < v, which walks the simplex corners in
    # decreasing coordinate order with ties broken toward lower index.
    greater = internal[:, :, None] > internal[:, None, :]
    equal = internal[:, :, None] == internal[:, None, :]
    lower_index = np.arange(n)[:, None] < np.arange(n)[None, :]
    rank = (greater | (equal & lower_index)).sum(axis=1)

    total = np.zeros(len(points), dtype=np.float64)
    for v in range(n + 1):
        offset = (rank < v).astype(np.int64)
        lattice = base + offset
        vertex = unskew(lattice.astype(np.float64), constants)
        delta = points - vertex

        grad = table.gradient_at(lattice)
        t = r_squared - (delta * delta).sum(axis=1)
        np.maximum(t, 0.0, out=t)
        total += t ** 4 * (delta * grad).sum(axis=1)
    return total


def simplex_sample(point: np.ndarray, table: GradientTable, r_squared: float = 0.5) -> float:
    """Scaled, clamped simplex value at a single point."""
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1 or point.shape[0] != table.dim:
        raise ParameterError(
            f"point must be a {table.dim}-vector, got shape {point.shape}"
        )
    raw = _raw_sum(point[None, :], table, r_squared)[0]
    return float(np.clip(SCALE_BY_DIM[table.dim] * raw, -1.0, 1.0))


def simplex_field(height: int, width: int, params: SimplexParams, seed: int) -> NoiseField:
    """Evaluate a pixel grid of simplex noise.

    Pixel (row j, column i) samples the point (i/step, j/step) extended by
    the fixed slice coordinates for dims above 2.
    """
    if height < 1 or width < 1:
        raise ParameterError(f"field shape must be positive, got {height}x{width}")
    table = GradientTable.from_seed(seed, params.dim)

    cols = np.arange(width, dtype=np.float64) / params.step
    rows = np.arange(height, dtype=np.float64) / params.step
    points = np.empty((height * width, params.dim), dtype=np.float64)
    points[:, 0] = np.tile(cols, height)
    points[:, 1] = np.repeat(rows, width)
    for k, coord in enumerate(params.full_slice):
        points[:, 2 + k] = coord

    raw = _raw_sum(points, table, params.r_squared)
    values = np.clip(SCALE_BY_DIM[params.dim] * raw, -1.0, 1.0)
    return NoiseField(values=values.reshape(height, width))
