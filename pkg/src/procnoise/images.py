"""Image tensors: HWC arrays in 8-bit or normalized float form, plus PNG I/O."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import FormatError, ParameterError

_PIL_MODES = {1: "L", 3: "RGB"}


@dataclass(frozen=True)
class ImageTensor:
    """One image, laid out (height, width, channels).

    Two representations are allowed and tagged by dtype: uint8 samples in
    [0, 255] or float64 samples in [0, 1].  Channels are 1 (grayscale) or
    3 (RGB).
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3:
            raise ParameterError(f"image data must be an (H, W, C) array, got {getattr(d, 'shape', type(d))}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ParameterError(f"image dimensions must be positive, got {d.shape}")
        if d.shape[2] not in (1, 3):
            raise ParameterError(f"channels must be 1 or 3, got {d.shape[2]}")
        if d.dtype == np.uint8:
            return
        if d.dtype == np.float64:
            if d.size and (d.min() < 0.0 or d.max() > 1.0):
                raise ParameterError("float image samples must lie in [0, 1]")
            return
        raise ParameterError(f"image dtype must be uint8 or float64, got {d.dtype}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def layout(self) -> str:
        kind = "uint8" if self.data.dtype == np.uint8 else "float"
        return f"hwc/{kind}"

    def to_uint8(self) -> "ImageTensor":
        if self.data.dtype == np.uint8:
            return self
        return ImageTensor(data=np.rint(self.data * 255.0).astype(np.uint8))

    def to_float(self) -> "ImageTensor":
        if self.data.dtype == np.float64:
            return self
        return ImageTensor(data=self.data.astype(np.float64) / 255.0)

    def png_bytes(self) -> bytes:
        """Encode as PNG (8-bit, grayscale or RGB)."""
        arr = self.to_uint8().data
        mode = _PIL_MODES[arr.shape[2]]
        img = Image.fromarray(arr[:, :, 0] if mode == "L" else arr, mode=mode)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, blob: bytes) -> "ImageTensor":
        """Decode a PNG into 8-bit HWC form.

        Grayscale stays single-channel; everything else (palette, RGBA)
        is converted to RGB.
        """
        try:
            img = Image.open(io.BytesIO(blob))
            img.load()
        except Exception as exc:
            raise FormatError(f"undecodable PNG payload: {exc}") from exc
        if img.mode != "L":
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(data=arr)
