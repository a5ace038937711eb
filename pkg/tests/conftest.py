"""Shared test helpers: mock classifier commands, small datasets, fake handles."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

from procnoise.dataset import DatasetItem, LabeledDataset
from procnoise.errors import ClassifierError
from procnoise.gateway import Prediction
from procnoise.images import ImageTensor

MOCK = str(Path(__file__).resolve().parent / "mock_classifier.py")


def mock_cmd(*extra: str) -> list[str]:
    """Command line for the scripted classifier child."""
    return [sys.executable, MOCK, *extra]


def tiny_dataset(
    count: int = 6,
    size: int = 16,
    classes: int = 10,
    seed: int = 0,
    lo: int = 0,
    hi: int = 256,
) -> LabeledDataset:
    """Random uint8 RGB images with labels encoded in the item ids.

    Ids carry the item index and labels are index mod classes, so the
    id-digit mock (label = digits % classes) acts as a perfect classifier
    on clean and perturbed images alike.  lo/hi bound the pixel values;
    keeping them away from 0 and 255 makes small perturbations clamp-free.
    """
    rng = np.random.default_rng(seed)
    items = []
    for k in range(count):
        data = rng.integers(lo, hi, size=(size, size, 3), dtype=np.uint8)
        items.append(
            DatasetItem(image=ImageTensor(data=data), label=k % classes, item_id=f"item-{k:03d}")
        )
    return LabeledDataset(items=tuple(items), class_count=classes)


class FakeHandle:
    """In-process classifier: labels come from a lookup, batches are logged."""

    def __init__(self, labels=None, class_count=10, fail_on_call=None):
        self.labels = labels or {}
        self.class_count = class_count
        self.fail_on_call = fail_on_call
        self.calls = 0
        self.batches = []

    def classify_batch(self, images):
        self.calls += 1
        if self.fail_on_call is not None and self.calls in self.fail_on_call:
            raise ClassifierError("scripted failure")
        self.batches.append(list(images))
        return [
            Prediction(item_id=item_id, label=self.labels.get(item_id, 0))
            for item_id, _ in images
        ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
