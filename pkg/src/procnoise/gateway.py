"""Classifier gateway: one prediction contract over pluggable backends.

Perturbations are generated with no model access at all; the classifier
appears only here, at measurement time.  Two backends are provided: an
external process speaking newline-delimited JSON over its standard
streams, and an in-process TorchScript model with fully declared
preprocessing.  Both yield order-preserving, argmax-lowest-index
predictions.

Wire protocol (subprocess backend), one JSON document per line:

    child -> parent on start:  {"protocol": 1, "class_count": K}
    parent -> child per image: {"id": "...", "png_b64": "..."}
    child -> parent per image: {"id": "...", "label": 3, "scores": [...]}

"scores" is optional; when present the label is its argmax (ties to the
lowest index) and any explicit "label" field must agree.
"""

from __future__ import annotations

import base64
import collections
import json
import logging
import queue
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ClassifierError, HandshakeError, ParameterError, ProtocolError
from .images import ImageTensor

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class Prediction:
    item_id: str
    label: int
    scores: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class GatewayConfig:
    handshake_timeout: float = 30.0
    batch_timeout: float = 300.0


@dataclass(frozen=True)
class Preprocessing:
    """Declared preprocessing for the embedded backend.

    resize_to is (height, width) or None for no resizing; mean and std are
    per-channel constants applied on the [0, 1] scale before the tensor is
    laid out channels-first.
    """

    resize_to: Optional[tuple[int, int]] = None
    mean: tuple[float, ...] = (0.0, 0.0, 0.0)
    std: tuple[float, ...] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.std):
            raise ParameterError("preprocessing std entries must be positive")
        if len(self.mean) != len(self.std):
            raise ParameterError("preprocessing mean and std lengths differ")


def _argmax_lowest(scores: Sequence[float]) -> int:
    arr = np.asarray(scores, dtype=np.float64)
    return int(arr.argmax())


def _parse_response(line: str, class_count: int) -> tuple[str, int, Optional[tuple[float, ...]]]:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed response line {line!r}: {exc}") from exc
    if not isinstance(doc, dict) or "id" not in doc:
        raise ProtocolError(f"response missing id: {line!r}")
    item_id = str(doc["id"])

    scores: Optional[tuple[float, ...]] = None
    if "scores" in doc:
        raw = doc["scores"]
        if not isinstance(raw, list) or not raw:
            raise ProtocolError(f"response {item_id}: scores must be a non-empty list")
        if len(raw) != class_count:
            raise ProtocolError(
                f"response {item_id}: {len(raw)} scores for {class_count} classes"
            )
        scores = tuple(float(v) for v in raw)
        label = _argmax_lowest(scores)
        if "label" in doc and int(doc["label"]) != label:
            raise ProtocolError(
                f"response {item_id}: label {doc['label']} disagrees with scores argmax {label}"
            )
    elif "label" in doc:
        label = int(doc["label"])
    else:
        raise ProtocolError(f"response {item_id} carries neither label nor scores")

    if not 0 <= label < class_count:
        raise ProtocolError(f"response {item_id}: label {label} outside [0, {class_count})")
    return item_id, label, scores


class SubprocessClassifier:
    """Handle on an external classifier process speaking the line protocol."""

    backend = "subprocess"

    def __init__(self, command: str | Sequence[str], config: GatewayConfig = GatewayConfig()):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._config = config
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ClassifierError(f"cannot spawn classifier {argv!r}: {exc}") from exc

        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._stderr_tail: collections.deque[str] = collections.deque(maxlen=20)
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()
        self.class_count = self._handshake()

    def _pump_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self) -> None:
        assert self._proc.stderr is not None
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    def _next_line(self, timeout: float, context: str) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise ClassifierError(f"classifier timed out after {timeout}s {context}") from None
        if line is None:
            tail = "; stderr: " + " | ".join(self._stderr_tail) if self._stderr_tail else ""
            raise ClassifierError(f"classifier exited {context}{tail}")
        return line

    def _handshake(self) -> int:
        line = self._next_line(self._config.handshake_timeout, "during handshake")
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise HandshakeError(f"malformed handshake {line!r}: {exc}") from exc
        if doc.get("protocol") != PROTOCOL_VERSION:
            raise HandshakeError(
                f"protocol version mismatch: expected {PROTOCOL_VERSION}, got {doc.get('protocol')!r}"
            )
        count = doc.get("class_count")
        if not isinstance(count, int) or count < 2:
            raise HandshakeError(f"handshake class_count must be an integer >= 2, got {count!r}")
        return count

    def classify_batch(self, images: Sequence[tuple[str, ImageTensor]]) -> list[Prediction]:
        """Send one request line per image; collect responses in input order."""
        if not images:
            return []
        ids = [item_id for item_id, _ in images]
        if len(set(ids)) != len(ids):
            raise ParameterError("batch ids must be unique")

        assert self._proc.stdin is not None
        try:
            for item_id, image in images:
                payload = base64.b64encode(image.png_bytes()).decode("ascii")
                self._proc.stdin.write(json.dumps({"id": item_id, "png_b64": payload}) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ClassifierError(f"classifier pipe closed while sending: {exc}") from exc

        pending = dict.fromkeys(ids)
        got: dict[str, Prediction] = {}
        last_ok = "<none>"
        while len(got) < len(ids):
            line = self._next_line(
                self._config.batch_timeout,
                f"mid-batch (last successful id {last_ok})",
            )
            if not line.strip():
                continue
            item_id, label, scores = _parse_response(line, self.class_count)
            if item_id not in pending:
                raise ProtocolError(f"response for unknown id {item_id!r}")
            if item_id in got:
                raise ProtocolError(f"duplicate response for id {item_id!r}")
            got[item_id] = Prediction(item_id=item_id, label=label, scores=scores)
            last_ok = item_id
        return [got[item_id] for item_id in ids]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "SubprocessClassifier":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()


class EmbeddedClassifier:
    """In-process TorchScript model with declared preprocessing."""

    backend = "embedded-model-file"

    def __init__(
        self,
        model_file: str,
        class_count: int,
        preprocessing: Preprocessing = Preprocessing(),
    ):
        if class_count < 2:
            raise ParameterError(f"class_count must be at least 2, got {class_count}")
        try:
            import torch
        except ImportError as exc:
            raise ClassifierError(
                "embedded backend needs the optional torch dependency (pip install procnoise[torch])"
            ) from exc
        self._torch = torch
        try:
            self._model = torch.jit.load(model_file, map_location="cpu")
        except Exception as exc:
            raise ClassifierError(f"cannot load model file {model_file!r}: {exc}") from exc
        self._model.eval()
        self.class_count = class_count
        self.preprocessing = preprocessing
        self._lock = threading.Lock()

    def _preprocess(self, image: ImageTensor) -> np.ndarray:
        pre = self.preprocessing
        if pre.resize_to is not None and (image.height, image.width) != pre.resize_to:
            from PIL import Image

            arr = image.to_uint8().data
            mode = "L" if arr.shape[2] == 1 else "RGB"
            pil = Image.fromarray(arr[:, :, 0] if mode == "L" else arr, mode=mode)
            pil = pil.resize((pre.resize_to[1], pre.resize_to[0]), Image.BILINEAR)
            arr = np.asarray(pil, dtype=np.uint8)
            if arr.ndim == 2:
                arr = arr[:, :, None]
            image = ImageTensor(data=arr)
        x = image.to_float().data
        if x.shape[2] != len(pre.mean):
            raise ClassifierError(
                f"image has {x.shape[2]} channels but preprocessing declares {len(pre.mean)}"
            )
        x = (x - np.asarray(pre.mean)) / np.asarray(pre.std)
        return x.transpose(2, 0, 1).astype(np.float32)

    def classify_batch(self, images: Sequence[tuple[str, ImageTensor]]) -> list[Prediction]:
        if not images:
            return []
        planes = [self._preprocess(img) for _, img in images]
        shapes = {p.shape for p in planes}
        if len(shapes) > 1:
            raise ClassifierError(
                f"mixed input shapes {sorted(shapes)}; declare resize_to in preprocessing"
            )
        batch = self._torch.from_numpy(np.stack(planes))
        with self._lock, self._torch.no_grad():
            try:
                out = self._model(batch)
            except Exception as exc:
                raise ClassifierError(f"model inference failed: {exc}") from exc
        scores = out.detach().cpu().numpy()
        if scores.ndim != 2 or scores.shape[1] != self.class_count:
            raise ClassifierError(
                f"model output shape {scores.shape} does not match class_count {self.class_count}"
            )
        return [
            Prediction(
                item_id=item_id,
                label=_argmax_lowest(scores[k]),
                scores=tuple(float(v) for v in scores[k]),
            )
            for k, (item_id, _) in enumerate(images)
        ]

    def close(self) -> None:
        pass

    def __enter__(self) -> "EmbeddedClassifier":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()


def open_subprocess(command: str | Sequence[str], config: GatewayConfig = GatewayConfig()) -> SubprocessClassifier:
    return SubprocessClassifier(command, config)


def open_embedded(
    model_file: str, class_count: int, preprocessing: Preprocessing = Preprocessing()
) -> EmbeddedClassifier:
    return EmbeddedClassifier(model_file, class_count, preprocessing)


def classify_batch(handle, images: Sequence[tuple[str, ImageTensor]]) -> list[Prediction]:
    """Order-preserving classification through any handle."""
    return handle.classify_batch(images)


def classify_with_embedded(handle: EmbeddedClassifier, images: Sequence[tuple[str, ImageTensor]]) -> list[Prediction]:
    return handle.classify_batch(images)


def probe_purity(handle, images: Sequence[tuple[str, ImageTensor]]) -> bool:
    """Submit the same batch twice; warn (not fail) if labels differ.

    Randomized defenses legitimately break purity, so a mismatch is logged
    and reported to the caller rather than raised.
    """
    first = [p.label for p in handle.classify_batch(images)]
    second = [p.label for p in handle.classify_batch(images)]
    pure = first == second
    if not pure:
        log.warning("classifier is not pure: identical batch produced differing labels")
    return pure


class ClassifierPool:
    """Shards batches over several handles, preserving input order.

    Aggregation is order-independent under the hood (chunks are reassembled
    by position), so concurrent handles never reorder results.
    """

    def __init__(self, handles: Sequence):
        if not handles:
            raise ParameterError("pool needs at least one handle")
        counts = {h.class_count for h in handles}
        if len(counts) != 1:
            raise ParameterError(f"pool handles disagree on class_count: {sorted(counts)}")
        self._handles = list(handles)
        self.class_count = self._handles[0].class_count

    def classify_batch(self, images: Sequence[tuple[str, ImageTensor]]) -> list[Prediction]:
        if not images:
            return []
        n = len(self._handles)
        chunk = (len(images) + n - 1) // n
        pieces = [images[k : k + chunk] for k in range(0, len(images), chunk)]
        with ThreadPoolExecutor(max_workers=len(pieces)) as pool:
            futures = [
                pool.submit(handle.classify_batch, piece)
                for handle, piece in zip(self._handles, pieces)
            ]
            results = [f.result() for f in futures]
        return [pred for part in results for pred in part]

    def close(self) -> None:
        for handle in self._handles:
            handle.close()

    def __enter__(self) -> "ClassifierPool":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()
