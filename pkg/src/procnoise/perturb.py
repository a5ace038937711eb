"""Bounded perturbations: noise fields scaled under an l-infinity budget.

A perturbation is a real-valued delta with max |delta| <= epsilon on the
normalized [0, 1] pixel scale.  Application to 8-bit images quantizes the
delta toward zero, trading up to one gray level of strength for an exact
post-quantization guarantee: no pixel ever moves by more than
floor(epsilon * 255) levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .images import ImageTensor
from .noise import (
    NoiseField,
    NoiseParams,
    WorleyFeatureSet,
    WorleyParams,
    kind_name,
    make_field,
    worley_texture,
)

REPLICATE = "replicate"
WORLEY_RGBA = "worley_rgba"


@dataclass(frozen=True)
class PerturbationSpec:
    """Everything needed to regenerate one perturbation.

    epsilon is the l-infinity budget on the normalized scale; 0 means no
    perturbation (natural testing).  channel_mode defaults to the RGBA
    texture construction for Worley parameters and plain replication for
    everything else.
    """

    params: NoiseParams
    seed: int
    epsilon: float
    channel_mode: str = dataclass_field(default="")

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ParameterError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        mode = self.channel_mode
        if mode == "":
            mode = WORLEY_RGBA if isinstance(self.params, WorleyParams) else REPLICATE
            object.__setattr__(self, "channel_mode", mode)
        if mode not in (REPLICATE, WORLEY_RGBA):
            raise ParameterError(f"unknown channel_mode {mode!r}")
        if mode == WORLEY_RGBA and not isinstance(self.params, WorleyParams):
            raise ParameterError("worley_rgba channel mode requires Worley parameters")

    def fingerprint(self) -> str:
        """Stable identifier for (params, seed, epsilon, channel_mode)."""
        fields = vars(self.params)
        inner = ",".join(f"{k}={fields[k]!r}" for k in sorted(fields))
        return f"{kind_name(self.params)}({inner})|seed={self.seed}|eps={self.epsilon!r}|mode={self.channel_mode}"


@dataclass(frozen=True)
class Perturbation:
    """A concrete delta with its budget; max |delta| <= budget always holds."""

    delta: np.ndarray
    budget: float

    def __post_init__(self) -> None:
        d = self.delta
        if not isinstance(d, np.ndarray) or d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ParameterError(f"delta must be (H, W, C) with C in (1, 3), got {getattr(d, 'shape', type(d))}")
        if d.dtype != np.float64:
            raise ParameterError(f"delta must be float64, got {d.dtype}")
        peak = float(np.abs(d).max()) if d.size else 0.0
        if peak > self.budget:
            raise ParameterError(f"delta exceeds budget: {peak} > {self.budget}")

    @property
    def height(self) -> int:
        return self.delta.shape[0]

    @property
    def width(self) -> int:
        return self.delta.shape[1]

    @property
    def channels(self) -> int:
        return self.delta.shape[2]


def field_to_perturbation(
    field: NoiseField,
    features: Optional[WorleyFeatureSet],
    spec: PerturbationSpec,
    channels: int = 3,
) -> Perturbation:
    """Scale a noise field into a budgeted delta.

    replicate mode maps the field onto the signed scale (a [0, 1] field
    becomes 2m - 1), multiplies by epsilon, and copies the plane to every
    channel.  worley_rgba mode renders the feature-marked RGBA texture,
    drops alpha, and maps each 8-bit channel c through epsilon * (2c - 1),
    so feature pixels perturb (+eps, -eps, -eps).
    """
    if spec.channel_mode == WORLEY_RGBA:
        if features is None:
            raise ParameterError("worley_rgba channel mode requires a feature set")
        texture = worley_texture(field, features)
        signed = 2.0 * (texture[:, :, :3].astype(np.float64) / 255.0) - 1.0
    else:
        if channels not in (1, 3):
            raise ParameterError(f"channels must be 1 or 3, got {channels}")
        signed = np.repeat(field.signed()[:, :, None], channels, axis=2)
    return Perturbation(delta=spec.epsilon * signed, budget=spec.epsilon)


def generate_perturbation(
    height: int, width: int, spec: PerturbationSpec, channels: int = 3
) -> Perturbation:
    """Generate the field for a spec and scale it into a perturbation."""
    field, features = make_field(height, width, spec.params, spec.seed)
    return field_to_perturbation(field, features, spec, channels=channels)


def apply(image: ImageTensor, p: Perturbation) -> ImageTensor:
    """Add a perturbation to an image, clamped to the valid range.

    8-bit images stay 8-bit: the delta is scaled to gray levels and
    truncated toward zero before addition, which caps the realized change
    at floor(budget * 255) levels exactly.  Float images add the raw delta
    and clamp to [0, 1].
    """
    if p.delta.shape != image.data.shape:
        raise ParameterError(f"shape mismatch: image {image.data.shape} vs delta {p.delta.shape}")
    if image.data.dtype == np.uint8:
        levels = np.trunc(p.delta * 255.0).astype(np.int16)
        adv = np.clip(image.data.astype(np.int16) + levels, 0, 255).astype(np.uint8)
        return ImageTensor(data=adv)
    return ImageTensor(data=np.clip(image.data + p.delta, 0.0, 1.0))


def linf_norm(p: Perturbation) -> float:
    """Largest absolute entry of the delta."""
    return float(np.abs(p.delta).max()) if p.delta.size else 0.0


def quantized_budget_levels(epsilon: float) -> int:
    """The 8-bit change cap implied by a normalized budget."""
    return math.floor(epsilon * 255.0)
