"""Worley (cellular) noise: distance fields to random feature points.

A field pixel holds the Euclidean distance to its nearest feature point,
normalized by the largest such distance in the image, so values span
[0, 1].  Nearness comparisons happen on exact integer squared distances
and ties go to the lowest feature index, which keeps the choice of
nearest point unambiguous and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .field import NoiseField
from .params import WorleyParams


@dataclass(frozen=True)
class WorleyFeatureSet:
    """Distinct feature pixels, as (x, y) columns in [0, W) x [0, H)."""

    points: np.ndarray
    height: int
    width: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.int64)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ParameterError(f"points must be a non-empty (N, 2) array, got {pts.shape}")
        if (pts[:, 0] < 0).any() or (pts[:, 0] >= self.width).any():
            raise ParameterError("feature x coordinates out of bounds")
        if (pts[:, 1] < 0).any() or (pts[:, 1] >= self.height).any():
            raise ParameterError("feature y coordinates out of bounds")
        flat = pts[:, 1] * self.width + pts[:, 0]
        if len(np.unique(flat)) != len(pts):
            raise ParameterError("feature points must be distinct")

    @property
    def count(self) -> int:
        return len(self.points)


def worley_feature_points(h: int, w: int, n: int, seed: int) -> WorleyFeatureSet:
    """Draw n distinct feature pixels by rejection sampling.

    Draws (x, y) pairs from the seeded generator and keeps first
    occurrences in draw order until n distinct pixels are collected, so
    feature indices reflect the order the generator produced them.
    """
    if h < 1 or w < 1:
        raise ParameterError(f"image shape must be positive, got {h}x{w}")
    if n < 1 or n > h * w:
        raise ParameterError(f"point count must lie in [1, {h * w}], got {n}")
    rng = np.random.default_rng(seed)
    seen: dict[tuple[int, int], None] = {}
    while len(seen) < n:
        need = n - len(seen)
        draws = rng.integers(0, [w, h], size=(max(need, 16), 2))
        for x, y in draws:
            if len(seen) == n:
                break
            seen.setdefault((int(x), int(y)), None)
    return WorleyFeatureSet(points=np.array(list(seen), dtype=np.int64), height=h, width=w)


def nearest_feature_distance(pixel: tuple[int, int], features: WorleyFeatureSet) -> tuple[float, int]:
    """Distance from one pixel to its nearest feature, plus that feature's index.

    The minimum is taken over exact integer squared distances; equidistant
    features resolve to the lowest index.
    """
    x, y = int(pixel[0]), int(pixel[1])
    dx = features.points[:, 0] - x
    dy = features.points[:, 1] - y
    d2 = dx * dx + dy * dy
    idx = int(np.argmin(d2))
    return math.sqrt(int(d2[idx])), idx


def worley_field(h: int, w: int, params: WorleyParams, seed: int) -> tuple[NoiseField, WorleyFeatureSet]:
    """Normalized nearest-feature distance field plus its feature set.

    Every pixel's distance is divided by the image-wide maximum, so the
    farthest pixel reads exactly 1.  When every pixel is a feature the
    field is identically zero.
    """
    features = worley_feature_points(h, w, n=params.points, seed=seed)

    xs = np.arange(w, dtype=np.int64)
    ys = np.arange(h, dtype=np.int64)
    dx = xs[None, :, None] - features.points[None, None, :, 0]
    dy = ys[:, None, None] - features.points[None, None, :, 1]
    d2 = dx * dx + dy * dy

    nearest = d2.argmin(axis=2)
    dist = np.sqrt(np.take_along_axis(d2, nearest[:, :, None], axis=2)[:, :, 0].astype(np.float64))
    peak = dist.max()
    values = dist / peak if peak > 0 else np.zeros_like(dist)
    return NoiseField(values=values, value_range=(0.0, 1.0)), features


def worley_texture(field: NoiseField, features: WorleyFeatureSet) -> np.ndarray:
    """Render the field as an RGBA image with feature pixels in pure red.

    Grayscale pixels are (m, m, m, 255) with m the field value on the
    8-bit scale; feature pixels are overwritten with (255, 0, 0, 255).
    """
    if field.values.shape != (features.height, features.width):
        raise ParameterError(
            f"field shape {field.values.shape} does not match feature grid "
            f"{(features.height, features.width)}"
        )
    gray = np.rint(field.values * 255.0).astype(np.uint8)
    rgba = np.empty((features.height, features.width, 4), dtype=np.uint8)
    rgba[:, :, 0] = gray
    rgba[:, :, 1] = gray
    rgba[:, :, 2] = gray
    rgba[:, :, 3] = 255
    rgba[features.points[:, 1], features.points[:, 0]] = (255, 0, 0, 255)
    return rgba
