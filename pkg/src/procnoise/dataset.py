"""Labeled dataset loading: CIFAR-10 binary batches and manifest directories."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, ParameterError
from .images import ImageTensor

CIFAR10_RECORD_BYTES = 3073
CIFAR10_CLASSES = 10


@dataclass(frozen=True)
class DatasetItem:
    image: ImageTensor
    label: int
    item_id: str


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered labeled images with unique string ids."""

    items: tuple[DatasetItem, ...]
    class_count: int

    def __post_init__(self) -> None:
        if not self.items:
            raise ParameterError("datasets must be non-empty")
        if self.class_count < 2:
            raise ParameterError(f"class_count must be at least 2, got {self.class_count}")
        seen = set()
        for item in self.items:
            if not 0 <= item.label < self.class_count:
                raise ParameterError(f"label {item.label} out of range for {self.class_count} classes")
            if item.item_id in seen:
                raise ParameterError(f"duplicate item id {item.item_id!r}")
            seen.add(item.item_id)

    def __len__(self) -> int:
        return len(self.items)


def load_cifar10_batch(path: str | Path, limit: Optional[int] = None) -> LabeledDataset:
    """Parse a CIFAR-10 binary batch.

    Each 3073-byte record is 1 label byte followed by 3072 pixel bytes in
    channel-plane order: pixel (c, y, x) sits at byte 1 + c*1024 + y*32 + x.
    """
    raw = Path(path).read_bytes()
    if len(raw) == 0 or len(raw) % CIFAR10_RECORD_BYTES != 0:
        raise FormatError(
            f"{path}: length {len(raw)} is not a positive multiple of {CIFAR10_RECORD_BYTES}"
        )
    count = len(raw) // CIFAR10_RECORD_BYTES
    if limit is not None:
        if limit < 1:
            raise ParameterError(f"limit must be positive, got {limit}")
        count = min(count, limit)

    records = np.frombuffer(raw, dtype=np.uint8)[: count * CIFAR10_RECORD_BYTES]
    records = records.reshape(count, CIFAR10_RECORD_BYTES)
    labels = records[:, 0]
    bad = np.nonzero(labels >= CIFAR10_CLASSES)[0]
    if len(bad):
        raise FormatError(f"{path}: record {bad[0]} has label byte {labels[bad[0]]} > 9")

    pixels = records[:, 1:].reshape(count, 3, 32, 32).transpose(0, 2, 3, 1)
    items = tuple(
        DatasetItem(
            image=ImageTensor(data=np.ascontiguousarray(pixels[k])),
            label=int(labels[k]),
            item_id=f"{Path(path).name}:{k:05d}",
        )
        for k in range(count)
    )
    return LabeledDataset(items=items, class_count=CIFAR10_CLASSES)


def load_image_dir(directory: str | Path, manifest_path: str | Path) -> LabeledDataset:
    """Load images listed in a TSV manifest of "<relative-path>\\t<label>" lines.

    A relative manifest_path is resolved against the image directory.  Items
    follow manifest order; ids are the relative paths; class_count is one past
    the largest label.  Blank lines are ignored.
    """
    directory = Path(directory)
    manifest = Path(manifest_path)
    if not manifest.is_absolute():
        manifest = directory / manifest
    try:
        lines = manifest.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"{manifest_path}: unreadable manifest: {exc}") from exc

    items = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{manifest_path}:{lineno}: expected '<path>\\t<label>', got {line!r}")
        rel, label_text = parts
        try:
            label = int(label_text)
        except ValueError:
            raise FormatError(f"{manifest_path}:{lineno}: label {label_text!r} is not an integer") from None
        if label < 0:
            raise FormatError(f"{manifest_path}:{lineno}: label must be non-negative, got {label}")
        full = directory / rel
        try:
            blob = full.read_bytes()
        except OSError as exc:
            raise FormatError(f"{manifest_path}:{lineno}: cannot read {full}: {exc}") from exc
        try:
            image = ImageTensor.from_png_bytes(blob)
        except FormatError as exc:
            raise FormatError(f"{manifest_path}:{lineno}: {full}: {exc}") from exc
        items.append(DatasetItem(image=image, label=label, item_id=rel))

    if not items:
        raise FormatError(f"{manifest_path}: manifest lists no images")
    class_count = max(item.label for item in items) + 1
    return LabeledDataset(items=tuple(items), class_count=max(class_count, 2))


def save_png(image: ImageTensor, path: str | Path) -> None:
    """Write an 8-bit PNG atomically (temp file then rename)."""
    path = Path(path)
    blob = image.png_bytes()
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
