"""Attack evaluation: evasion rate, robust accuracy, and parameter sweeps.

A perturbation is image-agnostic: one delta per spec is shared across the
whole dataset (per-shape when image sizes are mixed, still one delta per
shape).  The classifier sees clean and perturbed images in the same run so
every report carries its clean-accuracy context.  Evasion counts follow
the literal membership test adv_label != true_label, which includes images
the classifier already got wrong cleanly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .dataset import LabeledDataset
from .errors import ClassifierError, ParameterError
from .images import ImageTensor
from .perturb import PerturbationSpec, apply, generate_perturbation

RecordSink = Callable[["EvalRecord"], None]
ImageTransform = Callable[[ImageTensor], ImageTensor]


@dataclass(frozen=True)
class EvalRecord:
    item_id: str
    true_label: int
    clean_label: int
    adv_label: int
    fingerprint: str


@dataclass(frozen=True)
class EvalCounts:
    total: int
    evasions: int
    clean_correct: int


@dataclass(frozen=True)
class EvalReport:
    records: tuple[EvalRecord, ...]
    evasion_rate: float
    robust_accuracy: float
    clean_accuracy: float
    counts: EvalCounts

    @classmethod
    def from_records(cls, records: Sequence[EvalRecord]) -> "EvalReport":
        rate = evasion_rate(records)
        clean_correct = sum(r.clean_label == r.true_label for r in records)
        return cls(
            records=tuple(records),
            evasion_rate=rate,
            robust_accuracy=1.0 - rate,
            clean_accuracy=clean_correct / len(records),
            counts=EvalCounts(
                total=len(records),
                evasions=sum(r.adv_label != r.true_label for r in records),
                clean_correct=clean_correct,
            ),
        )


def evasion_rate(records: Sequence[EvalRecord]) -> float:
    """Fraction of records whose label under attack differs from the truth."""
    if not records:
        raise ParameterError("evasion_rate needs at least one record")
    return sum(r.adv_label != r.true_label for r in records) / len(records)


def robust_accuracy(records: Sequence[EvalRecord]) -> float:
    """Complement of the evasion rate over the same records."""
    if not records:
        raise ParameterError("robust_accuracy needs at least one record")
    return 1.0 - evasion_rate(records)


class PartialEvalError(ClassifierError):
    """Classifier failure mid-evaluation; carries the finished records."""

    def __init__(self, message: str, records: Sequence[EvalRecord]):
        super().__init__(message)
        self.records = tuple(records)


def run_attack_eval(
    dataset: LabeledDataset,
    spec: PerturbationSpec,
    handle,
    record_sink: Optional[RecordSink] = None,
    transform: Optional[ImageTransform] = None,
    per_image_seed: bool = False,
    chunk_size: int = 64,
) -> EvalReport:
    """Evaluate one spec over a dataset.

    The same delta is applied to every image of a given shape.  transform,
    when given, runs on both the clean and the perturbed image before
    classification (the defense pipeline plugs in here).  per_image_seed
    regenerates the delta per image from seed + index; it exists for
    ablations and breaks the shared-perturbation semantics on purpose.
    Records stream through record_sink as they complete, and a classifier
    failure raises PartialEvalError carrying everything finished so far.
    """
    fingerprint = spec.fingerprint()
    cache: dict[tuple[int, int, int], object] = {}

    def delta_for(image: ImageTensor, index: int):
        if per_image_seed:
            one_off = PerturbationSpec(
                params=spec.params,
                seed=spec.seed + index,
                epsilon=spec.epsilon,
                channel_mode=spec.channel_mode,
            )
            return generate_perturbation(image.height, image.width, one_off, channels=image.channels)
        key = (image.height, image.width, image.channels)
        if key not in cache:
            cache[key] = generate_perturbation(key[0], key[1], spec, channels=key[2])
        return cache[key]

    records: list[EvalRecord] = []
    items = dataset.items
    for start in range(0, len(items), chunk_size):
        chunk = items[start : start + chunk_size]
        clean_batch = []
        adv_batch = []
        for offset, item in enumerate(chunk):
            image = item.image
            adv = apply(image.to_uint8(), delta_for(image, start + offset))
            if transform is not None:
                image = transform(image)
                adv = transform(adv)
            clean_batch.append((item.item_id, image))
            adv_batch.append((item.item_id, adv))
        try:
            clean_preds = handle.classify_batch(clean_batch)
            adv_preds = handle.classify_batch(adv_batch)
        except ClassifierError as exc:
            raise PartialEvalError(
                f"classifier failed on {fingerprint} after {len(records)} records: {exc}",
                records,
            ) from exc
        for item, cp, ap in zip(chunk, clean_preds, adv_preds):
            record = EvalRecord(
                item_id=item.item_id,
                true_label=item.label,
                clean_label=cp.label,
                adv_label=ap.label,
                fingerprint=fingerprint,
            )
            records.append(record)
            if record_sink is not None:
                record_sink(record)
    return EvalReport.from_records(records)


@dataclass(frozen=True)
class SweepEntry:
    fingerprint: str
    report: Optional[EvalReport]
    error: Optional[str]


def sweep(
    dataset: LabeledDataset,
    grid: Sequence[PerturbationSpec],
    handle,
    record_sink: Optional[RecordSink] = None,
    transform: Optional[ImageTransform] = None,
    chunk_size: int = 64,
) -> list[SweepEntry]:
    """Evaluate a grid of specs in order; failures are recorded, not fatal."""
    if not grid:
        raise ParameterError("sweep needs a non-empty grid")
    entries: list[SweepEntry] = []
    for spec in grid:
        try:
            report = run_attack_eval(
                dataset,
                spec,
                handle,
                record_sink=record_sink,
                transform=transform,
                chunk_size=chunk_size,
            )
            entries.append(SweepEntry(spec.fingerprint(), report, None))
        except ClassifierError as exc:
            entries.append(SweepEntry(spec.fingerprint(), None, str(exc)))
    return entries


def report_to_json(report: EvalReport, spec: PerturbationSpec) -> str:
    """Full-record JSON document for one report."""
    doc = {
        "fingerprint": spec.fingerprint(),
        "epsilon": spec.epsilon,
        "evasion_rate": report.evasion_rate,
        "robust_accuracy": report.robust_accuracy,
        "clean_accuracy": report.clean_accuracy,
        "counts": {
            "total": report.counts.total,
            "evasions": report.counts.evasions,
            "clean_correct": report.counts.clean_correct,
        },
        "records": [
            {
                "id": r.item_id,
                "true_label": r.true_label,
                "clean_label": r.clean_label,
                "adv_label": r.adv_label,
            }
            for r in report.records
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


CSV_COLUMNS = ("fingerprint", "epsilon", "evasion_rate", "robust_accuracy", "clean_accuracy", "n")


def reports_to_csv(rows: Sequence[tuple[PerturbationSpec, Optional[EvalReport], Optional[str]]]) -> str:
    """One CSV row per spec; failed specs carry an error column instead of rates."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + ("error",))
    for spec, report, error in rows:
        if report is None:
            writer.writerow([spec.fingerprint(), spec.epsilon, "", "", "", "", error or "failed"])
        else:
            writer.writerow(
                [
                    spec.fingerprint(),
                    spec.epsilon,
                    repr(report.evasion_rate),
                    repr(report.robust_accuracy),
                    repr(report.clean_accuracy),
                    report.counts.total,
                    "",
                ]
            )
    return buf.getvalue()
