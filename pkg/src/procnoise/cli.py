"""Command-line front end: generate | attack-eval | defense-eval | sweep.

Every run resolves to one effective configuration (defaults, then config
file, then flags) which is echoed as JSON into the output directory, so a
run can be reproduced from its artifacts alone.  All files are written
atomically (temp file then rename).  Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import re
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .dataset import LabeledDataset, load_cifar10_batch, load_image_dir, save_png
from .errors import ClassifierError, ProcNoiseError
from .evaluate import SweepEntry, report_to_json, reports_to_csv, run_attack_eval, sweep
from .filters import (
    BilateralFilterSpec,
    FilterSpec,
    GaussianFilterSpec,
    MedianFilterSpec,
    run_defense_eval,
)
from .gateway import ClassifierPool, GatewayConfig, Preprocessing, open_embedded, open_subprocess
from .images import ImageTensor
from .noise import (
    GaussianParams,
    NoiseParams,
    PerlinParams,
    SaltPepperParams,
    SimplexParams,
    WorleyParams,
    make_field,
    worley_texture,
)
from .perturb import PerturbationSpec, apply, field_to_perturbation, generate_perturbation

SEED_ENV = "PROCNOISE_SEED"


class UsageError(Exception):
    """Bad flags or config values; maps to exit code 2."""


# Defaults for every config key.  None means "not set"; noise parameter
# keys left at None fall back to the parameter dataclass defaults.
_DEFAULTS: dict = {
    "command": None,
    "noise": None,
    "dim": None,
    "step": None,
    "slice": None,
    "r_squared": None,
    "points": None,
    "octaves": None,
    "period": None,
    "sine_frequency": None,
    "mean": None,
    "std": None,
    "prob": None,
    "eps": None,
    "seed": None,
    "channel_mode": None,
    "height": 224,
    "width": 224,
    "image": None,
    "dataset": None,
    "data": None,
    "manifest": None,
    "limit": None,
    "classifier_cmd": None,
    "model_file": None,
    "model_class_count": None,
    "model_resize": None,
    "model_mean": None,
    "model_std": None,
    "handshake_timeout": 30.0,
    "batch_timeout": 300.0,
    "filter": None,
    "window": 3,
    "radius": 2,
    "sigma": 1.0,
    "diameter": 5,
    "sigma_color": 0.1,
    "sigma_space": 2.0,
    "out": "procnoise-out",
    "jobs": 1,
    "chunk_size": 64,
    "per_image_seed": False,
}

_LIST_KEYS = ("eps", "dim", "step", "points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procnoise",
        description="Procedural noise perturbations: generation, attack and defense evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("--noise", choices=["simplex", "worley", "perlin", "gaussian", "sp"])
    common.add_argument("--dim", type=int, action="append", help="simplex dimension (2, 3, or 4)")
    common.add_argument("--step", type=float, action="append", help="simplex iteration step in pixels")
    common.add_argument("--slice", type=float, nargs="*", help="fixed extra coordinates for simplex dim > 2")
    common.add_argument("--r-squared", dest="r_squared", type=float, help="simplex kernel radius squared")
    common.add_argument("--points", type=int, action="append", help="worley feature point count")
    common.add_argument("--octaves", type=int, help="perlin octave count")
    common.add_argument("--period", type=float, help="perlin base period in pixels")
    common.add_argument("--sine-frequency", dest="sine_frequency", type=float, help="perlin sine map frequency")
    common.add_argument("--mean", type=float, help="gaussian noise mean, 8-bit units")
    common.add_argument("--std", type=float, help="gaussian noise std, 8-bit units")
    common.add_argument("--prob", type=float, help="salt-and-pepper flip probability")
    common.add_argument("--eps", type=float, action="append", help="l-inf budget, repeatable")
    common.add_argument("--seed", type=int, help=f"base seed (default ${SEED_ENV} or 0)")
    common.add_argument("--channel-mode", dest="channel_mode", choices=["replicate", "worley_rgba"])
    common.add_argument("--out", help="output directory")

    gen = sub.add_parser("generate", parents=[common], help="write noise and perturbation images")
    gen.add_argument("--height", type=int)
    gen.add_argument("--width", type=int)
    gen.add_argument("--image", help="optional input PNG; writes its perturbed version per eps")

    evalish = argparse.ArgumentParser(add_help=False, parents=[common])
    evalish.add_argument("--dataset", choices=["cifar10", "dir"])
    evalish.add_argument("--data", help="CIFAR-10 batch file or image directory")
    evalish.add_argument("--manifest", help="TSV manifest for --dataset dir")
    evalish.add_argument("--limit", type=int, help="use only the first N dataset items")
    evalish.add_argument("--classifier-cmd", dest="classifier_cmd", help="external classifier command line")
    evalish.add_argument("--model-file", dest="model_file", help="TorchScript model for the embedded backend")
    evalish.add_argument("--model-class-count", dest="model_class_count", type=int)
    evalish.add_argument("--model-resize", dest="model_resize", type=int, nargs=2, metavar=("H", "W"))
    evalish.add_argument("--model-mean", dest="model_mean", type=float, nargs="+")
    evalish.add_argument("--model-std", dest="model_std", type=float, nargs="+")
    evalish.add_argument("--handshake-timeout", dest="handshake_timeout", type=float)
    evalish.add_argument("--batch-timeout", dest="batch_timeout", type=float)
    evalish.add_argument("--jobs", type=int, help="parallel classifier subprocesses")
    evalish.add_argument("--chunk-size", dest="chunk_size", type=int)
    evalish.add_argument(
        "--per-image-seed",
        dest="per_image_seed",
        action="store_const",
        const=True,
        default=None,
        help="ablation: regenerate the delta per image instead of sharing one",
    )

    sub.add_parser("attack-eval", parents=[evalish], help="evasion rate over a dataset")

    defense = sub.add_parser("defense-eval", parents=[evalish], help="attack, filter, then classify")
    defense.add_argument("--filter", choices=["none", "gaussian", "median", "bilateral"])
    defense.add_argument("--window", type=int, help="median window (odd)")
    defense.add_argument("--radius", type=int, help="gaussian radius")
    defense.add_argument("--sigma", type=float, help="gaussian sigma")
    defense.add_argument("--diameter", type=int, help="bilateral diameter (odd)")
    defense.add_argument("--sigma-color", dest="sigma_color", type=float)
    defense.add_argument("--sigma-space", dest="sigma_space", type=float)

    sub.add_parser("sweep", parents=[evalish], help="grid over eps and step/points/dim lists")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and flags into one effective config."""
    merged = dict(_DEFAULTS)

    config_path = getattr(args, "config", None)
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        unknown = set(doc) - set(_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)

    for key, value in vars(args).items():
        if key == "config" or value is None:
            continue
        merged[key] = value

    for key in _LIST_KEYS:
        if merged[key] is not None and not isinstance(merged[key], list):
            merged[key] = [merged[key]]
    if merged["slice"] is not None and not isinstance(merged["slice"], list):
        merged["slice"] = [merged["slice"]]
    if merged["model_resize"] is not None:
        merged["model_resize"] = [int(v) for v in merged["model_resize"]]

    if merged["seed"] is None:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                merged["seed"] = int(env)
            except ValueError:
                raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
        else:
            merged["seed"] = 0
    return merged


def _single(config: dict, key: str):
    values = config[key]
    if values is None:
        return None
    if len(values) != 1:
        raise UsageError(f"--{key} accepts one value for {config['command']}, got {values}")
    return values[0]


def _params_from(config: dict, dim=None, step=None, points=None) -> NoiseParams:
    """Build a parameter record from config, with optional sweep overrides."""
    kind = config["noise"]
    if kind is None:
        raise UsageError("--noise is required")
    picked = {
        "simplex": lambda: SimplexParams(
            dim=int(dim if dim is not None else _single(config, "dim") or 2),
            step=float(step if step is not None else _single(config, "step") or 40.0),
            slice_coords=tuple(config["slice"] or ()),
            r_squared=config["r_squared"] if config["r_squared"] is not None else 0.5,
        ),
        "worley": lambda: WorleyParams(
            points=int(points if points is not None else _single(config, "points") or 100)
        ),
        "perlin": lambda: PerlinParams(
            octaves=config["octaves"] if config["octaves"] is not None else 1,
            period=config["period"] if config["period"] is not None else 60.0,
            sine_frequency=config["sine_frequency"] if config["sine_frequency"] is not None else 36.0,
        ),
        "gaussian": lambda: GaussianParams(
            mean=config["mean"] if config["mean"] is not None else 10.0,
            std=config["std"] if config["std"] is not None else 50.0,
        ),
        "sp": lambda: SaltPepperParams(
            prob=config["prob"] if config["prob"] is not None else 0.1
        ),
    }
    try:
        return picked[kind]()
    except ProcNoiseError as exc:
        raise UsageError(str(exc)) from exc


def _spec_grid(config: dict) -> list[PerturbationSpec]:
    """The perturbation specs a command will evaluate, in grid order.

    Structural values (dim for simplex, step for simplex, points for
    worley) vary in the outer loop, epsilon in the inner one, matching the
    order flags were given.
    """
    if config["eps"] is None:
        raise UsageError("--eps is required")
    eps_list = [float(e) for e in config["eps"]]

    structural: list[dict] = [{}]
    if config["command"] == "sweep":
        kind = config["noise"]
        if kind == "simplex":
            dims = config["dim"] or [2]
            steps = config["step"] or [40.0]
            structural = [{"dim": d, "step": s} for d in dims for s in steps]
        elif kind == "worley":
            structural = [{"points": n} for n in (config["points"] or [100])]

    grid = []
    try:
        for combo in structural:
            params = _params_from(config, **combo)
            for eps in eps_list:
                grid.append(
                    PerturbationSpec(
                        params=params,
                        seed=config["seed"],
                        epsilon=eps,
                        channel_mode=config["channel_mode"] or "",
                    )
                )
    except ProcNoiseError as exc:
        raise UsageError(str(exc)) from exc
    return grid


def _load_dataset(config: dict) -> LabeledDataset:
    if config["dataset"] is None or config["data"] is None:
        raise UsageError("--dataset and --data are required")
    if config["dataset"] == "cifar10":
        return load_cifar10_batch(config["data"], limit=config["limit"])
    if config["manifest"] is None:
        raise UsageError("--manifest is required with --dataset dir")
    dataset = load_image_dir(config["data"], config["manifest"])
    if config["limit"] is not None:
        items = dataset.items[: config["limit"]]
        dataset = LabeledDataset(items=items, class_count=dataset.class_count)
    return dataset


def _open_classifier(config: dict):
    gw = GatewayConfig(
        handshake_timeout=config["handshake_timeout"],
        batch_timeout=config["batch_timeout"],
    )
    if config["classifier_cmd"]:
        jobs = max(1, int(config["jobs"]))
        if jobs == 1:
            return open_subprocess(config["classifier_cmd"], gw)
        return ClassifierPool([open_subprocess(config["classifier_cmd"], gw) for _ in range(jobs)])
    if config["model_file"]:
        if config["model_class_count"] is None:
            raise UsageError("--model-class-count is required with --model-file")
        pre = Preprocessing(
            resize_to=tuple(config["model_resize"]) if config["model_resize"] else None,
            mean=tuple(config["model_mean"]) if config["model_mean"] else (0.0, 0.0, 0.0),
            std=tuple(config["model_std"]) if config["model_std"] else (1.0, 1.0, 1.0),
        )
        return open_embedded(config["model_file"], config["model_class_count"], pre)
    raise UsageError("one of --classifier-cmd or --model-file is required")


def _filter_from(config: dict) -> Optional[FilterSpec]:
    kind = config["filter"] or "none"
    try:
        if kind == "none":
            return None
        if kind == "gaussian":
            return GaussianFilterSpec(radius=config["radius"], sigma=config["sigma"])
        if kind == "median":
            return MedianFilterSpec(window=config["window"])
        return BilateralFilterSpec(
            diameter=config["diameter"],
            sigma_color=config["sigma_color"],
            sigma_space=config["sigma_space"],
        )
    except ProcNoiseError as exc:
        raise UsageError(str(exc)) from exc


def _write_atomic(path: Path, payload: str | bytes) -> None:
    mode = "wb" if isinstance(payload, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _echo_config(config: dict, out: Path) -> None:
    _write_atomic(out / "config.json", json.dumps(config, indent=2, sort_keys=True) + "\n")


def _safe_name(fingerprint: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", fingerprint).strip("_")


def _field_png(values: np.ndarray, lo: float, hi: float) -> ImageTensor:
    gray = np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return ImageTensor(data=gray[:, :, None])


def cmd_generate(config: dict) -> int:
    specs = _spec_grid(config)
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    h, w = int(config["height"]), int(config["width"])

    params = specs[0].params
    field, features = make_field(h, w, params, config["seed"])
    written = []

    if features is not None:
        texture = worley_texture(field, features)
        buf = io.BytesIO()
        Image.fromarray(texture, mode="RGBA").save(buf, format="PNG")
        _write_atomic(out / "field.png", buf.getvalue())
    else:
        lo, hi = field.value_range
        save_png(_field_png(field.values, lo, hi), out / "field.png")
    written.append("field.png")

    source = None
    if config["image"]:
        source = ImageTensor.from_png_bytes(Path(config["image"]).read_bytes())

    for spec in specs:
        delta = field_to_perturbation(
            field, features, spec, channels=source.channels if source else 3
        )
        if source is not None:
            if delta.delta.shape[:2] != source.data.shape[:2]:
                delta = generate_perturbation(
                    source.height, source.width, spec, channels=source.channels
                )
            adv = apply(source.to_uint8(), delta)
            name = f"adv_eps{spec.epsilon!r}.png"
            save_png(adv, out / name)
            written.append(name)

    metadata = {
        "fingerprints": [spec.fingerprint() for spec in specs],
        "height": h,
        "width": w,
        "outputs": written,
    }
    _write_atomic(out / "metadata.json", json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    _echo_config(config, out)
    return 0


def _run_eval_command(config: dict, filter_spec: Optional[FilterSpec]) -> int:
    specs = _spec_grid(config)
    dataset = _load_dataset(config)
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(config, out)

    handle = _open_classifier(config)
    entries = []
    try:
        if filter_spec is None and not config["per_image_seed"]:
            entries = sweep(dataset, specs, handle, chunk_size=config["chunk_size"])
        else:
            for spec in specs:
                try:
                    if filter_spec is not None:
                        report = run_defense_eval(
                            dataset, spec, filter_spec, handle, chunk_size=config["chunk_size"]
                        )
                    else:
                        report = run_attack_eval(
                            dataset,
                            spec,
                            handle,
                            per_image_seed=True,
                            chunk_size=config["chunk_size"],
                        )
                    entries.append(SweepEntry(spec.fingerprint(), report, None))
                except ClassifierError as exc:
                    entries.append(SweepEntry(spec.fingerprint(), None, str(exc)))
    finally:
        handle.close()

    rows = []
    failures = 0
    for index, (spec, entry) in enumerate(zip(specs, entries)):
        rows.append((spec, entry.report, entry.error))
        if entry.report is not None:
            name = f"report_{index:02d}_{_safe_name(spec.fingerprint())}.json"
            _write_atomic(out / name, report_to_json(entry.report, spec))
        else:
            failures += 1
    _write_atomic(out / "reports.csv", reports_to_csv(rows))
    for spec, report, error in rows:
        if report is not None:
            print(
                f"{spec.fingerprint()}: evasion_rate={report.evasion_rate:.4f} "
                f"robust_accuracy={report.robust_accuracy:.4f} "
                f"clean_accuracy={report.clean_accuracy:.4f} n={report.counts.total}"
            )
        else:
            print(f"{spec.fingerprint()}: FAILED ({error})", file=sys.stderr)
    return 1 if failures else 0


def cmd_attack_eval(config: dict) -> int:
    return _run_eval_command(config, None)


def cmd_defense_eval(config: dict) -> int:
    return _run_eval_command(config, _filter_from(config))


def cmd_sweep(config: dict) -> int:
    return _run_eval_command(config, None)


_COMMANDS = {
    "generate": cmd_generate,
    "attack-eval": cmd_attack_eval,
    "defense-eval": cmd_defense_eval,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        command = _COMMANDS[config["command"]]
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return command(config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProcNoiseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
