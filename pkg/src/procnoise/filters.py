"""Input-denoising defenses: Gaussian blur, median filter, bilateral filter.

All filters clamp at the border (edge pixels are repeated outward), keep
the input representation (8-bit in, 8-bit out), and are pure per-image
functions.  They run before classification; the defense evaluation simply
inserts them between the attack and the gateway, for clean images too,
since a deployed defense cannot know which inputs are attacked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dataset import LabeledDataset
from .errors import ParameterError
from .evaluate import EvalReport, ImageTransform, RecordSink, run_attack_eval
from .images import ImageTensor
from .perturb import PerturbationSpec


@dataclass(frozen=True)
class GaussianFilterSpec:
    radius: int = 2
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.radius < 1:
            raise ParameterError(f"radius must be at least 1, got {self.radius}")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class MedianFilterSpec:
    window: int = 3

    def __post_init__(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise ParameterError(f"window must be odd and at least 3, got {self.window}")


@dataclass(frozen=True)
class BilateralFilterSpec:
    diameter: int = 5
    sigma_color: float = 0.1
    sigma_space: float = 2.0

    def __post_init__(self) -> None:
        if self.diameter < 3 or self.diameter % 2 == 0:
            raise ParameterError(f"diameter must be odd and at least 3, got {self.diameter}")
        if self.sigma_color <= 0 or self.sigma_space <= 0:
            raise ParameterError("sigma_color and sigma_space must be positive")


FilterSpec = Union[GaussianFilterSpec, MedianFilterSpec, BilateralFilterSpec]


def _to_float_planes(image: ImageTensor) -> tuple[np.ndarray, bool]:
    """Normalized float64 working copy plus whether the input was 8-bit."""
    was_uint8 = image.data.dtype == np.uint8
    return image.to_float().data, was_uint8


def _from_float_planes(planes: np.ndarray, was_uint8: bool) -> ImageTensor:
    planes = np.clip(planes, 0.0, 1.0)
    if was_uint8:
        return ImageTensor(data=np.rint(planes * 255.0).astype(np.uint8))
    return ImageTensor(data=planes)


def _gaussian_kernel(radius: int, sigma: float) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(image: ImageTensor, spec: GaussianFilterSpec) -> ImageTensor:
    """Separable Gaussian convolution per channel with clamp-to-edge."""
    planes, was_uint8 = _to_float_planes(image)
    kernel = _gaussian_kernel(spec.radius, spec.sigma)
    r = spec.radius

    padded = np.pad(planes, ((0, 0), (r, r), (0, 0)), mode="edge")
    horizontal = np.zeros_like(planes)
    for k, weight in enumerate(kernel):
        horizontal += weight * padded[:, k : k + planes.shape[1], :]

    padded = np.pad(horizontal, ((r, r), (0, 0), (0, 0)), mode="edge")
    blurred = np.zeros_like(planes)
    for k, weight in enumerate(kernel):
        blurred += weight * padded[k : k + planes.shape[0], :, :]
    return _from_float_planes(blurred, was_uint8)


def median_filter(image: ImageTensor, spec: MedianFilterSpec) -> ImageTensor:
    """Per-channel sliding-window median with clamp-to-edge."""
    r = spec.window // 2
    data = image.data
    padded = np.pad(data, ((r, r), (r, r), (0, 0)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (spec.window, spec.window), axis=(0, 1))
    out = np.median(windows, axis=(3, 4))
    if data.dtype == np.uint8:
        return ImageTensor(data=out.astype(np.uint8))
    return ImageTensor(data=out)


def bilateral_filter(image: ImageTensor, spec: BilateralFilterSpec) -> ImageTensor:
    """Edge-preserving smoothing: spatial Gaussian times per-channel range Gaussian.

    Each neighbor's weight is exp(-(dx^2+dy^2)/2*sigma_space^2) times
    exp(-(I_n - I_c)^2 / 2*sigma_color^2) on the normalized intensity
    scale, renormalized per pixel.  As sigma_color grows the range term
    flattens to 1 and the filter degenerates to the spatial blur.
    """
    planes, was_uint8 = _to_float_planes(image)
    r = spec.diameter // 2
    inv_2ss = 1.0 / (2.0 * spec.sigma_space * spec.sigma_space)
    inv_2sc = 1.0 / (2.0 * spec.sigma_color * spec.sigma_color)

    padded = np.pad(planes, ((r, r), (r, r), (0, 0)), mode="edge")
    h, w = planes.shape[:2]
    accum = np.zeros_like(planes)
    norm = np.zeros_like(planes)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            neighbor = padded[r + dy : r + dy + h, r + dx : r + dx + w, :]
            spatial = np.exp(-(dx * dx + dy * dy) * inv_2ss)
            diff = neighbor - planes
            weight = spatial * np.exp(-(diff * diff) * inv_2sc)
            accum += weight * neighbor
            norm += weight
    return _from_float_planes(accum / norm, was_uint8)


def apply_filter(image: ImageTensor, spec: Optional[FilterSpec]) -> ImageTensor:
    """Dispatch on the filter spec; None passes the image through."""
    if spec is None:
        return image
    if isinstance(spec, GaussianFilterSpec):
        return gaussian_blur(image, spec)
    if isinstance(spec, MedianFilterSpec):
        return median_filter(image, spec)
    if isinstance(spec, BilateralFilterSpec):
        return bilateral_filter(image, spec)
    raise ParameterError(f"unknown filter spec: {spec!r}")


def run_defense_eval(
    dataset: LabeledDataset,
    attack_spec: PerturbationSpec,
    filter_spec: Optional[FilterSpec],
    handle,
    record_sink: Optional[RecordSink] = None,
    chunk_size: int = 64,
) -> EvalReport:
    """Attack, then filter, then classify; robust accuracy is the headline.

    The filter runs on clean images as well, so clean_accuracy measures the
    defense's cost on benign inputs.
    """
    transform: Optional[ImageTransform] = None
    if filter_spec is not None:
        transform = lambda img: apply_filter(img, filter_spec)
    return run_attack_eval(
        dataset,
        attack_spec,
        handle,
        record_sink=record_sink,
        transform=transform,
        chunk_size=chunk_size,
    )
