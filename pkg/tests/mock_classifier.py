#!/usr/bin/env python3
"""Scriptable classifier child process for gateway and evaluation tests.

Speaks the newline-delimited JSON protocol: emits a handshake line, then
answers each {"id", "png_b64"} request according to --mode.  Failure
switches simulate crashed, hung, or misbehaving children.
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import io
import json
import sys
import time

import numpy as np
from PIL import Image


def decode_pixels(png_b64: str) -> np.ndarray:
    img = Image.open(io.BytesIO(base64.b64decode(png_b64)))
    img.load()
    if img.mode != "L":
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.uint8)
    return arr[:, :, None] if arr.ndim == 2 else arr


def pixel_hash(arr: np.ndarray) -> str:
    return hashlib.sha256(arr.tobytes()).hexdigest()


def build_torchscript(args):
    import torch

    model = torch.jit.load(args.model, map_location="cpu")
    model.eval()

    def run(item_id: str, arr: np.ndarray):
        img = Image.fromarray(arr[:, :, 0] if arr.shape[2] == 1 else arr)
        if args.resize:
            img = img.resize((args.resize[1], args.resize[0]), Image.BILINEAR)
        x = np.asarray(img, dtype=np.float64) / 255.0
        if x.ndim == 2:
            x = x[:, :, None]
        mean = np.asarray(args.mean or [0.0] * x.shape[2])
        std = np.asarray(args.std or [1.0] * x.shape[2])
        x = ((x - mean) / std).transpose(2, 0, 1).astype(np.float32)
        with torch.no_grad():
            out = model(torch.from_numpy(x[None]))
        return {"scores": [float(v) for v in out[0]]}

    return run


def build_responder(args):
    table = {}
    if args.table:
        with open(args.table, "r", encoding="utf-8") as fh:
            table = json.load(fh)

    if args.mode == "constant":
        return lambda item_id, arr: {"label": args.label}
    if args.mode == "id-digit":
        def run(item_id, arr):
            digits = "".join(ch for ch in item_id if ch.isdigit())
            return {"label": (int(digits) if digits else 0) % args.classes}
        return run
    if args.mode == "hash-table":
        return lambda item_id, arr: {"label": table.get(pixel_hash(arr), args.label)}
    if args.mode == "flip-on-change":
        def run(item_id, arr):
            entry = table[item_id]
            true = entry["true_label"]
            if pixel_hash(arr) == entry["clean_hash"]:
                return {"label": true}
            return {"label": (true + 1) % args.classes}
        return run
    if args.mode == "threshold":
        def run(item_id, arr):
            entry = table[item_id]
            clean = decode_pixels(entry["png_b64"])
            diff = int(np.abs(arr.astype(int) - clean.astype(int)).max())
            true = entry["true_label"]
            if diff >= args.threshold:
                return {"label": (true + 1) % args.classes}
            return {"label": true}
        return run
    if args.mode == "score-table":
        return lambda item_id, arr: {"scores": table[item_id]}
    if args.mode == "torchscript":
        return build_torchscript(args)
    raise SystemExit(f"unknown mode {args.mode}")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--mode", default="constant")
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--label", type=int, default=0)
    parser.add_argument("--table", help="JSON table file; meaning depends on --mode")
    parser.add_argument("--threshold", type=int, default=8, help="gray levels for --mode threshold")
    parser.add_argument("--model", help="TorchScript file for --mode torchscript")
    parser.add_argument("--resize", type=int, nargs=2)
    parser.add_argument("--mean", type=float, nargs="+")
    parser.add_argument("--std", type=float, nargs="+")
    parser.add_argument("--handshake-protocol", type=int, default=1)
    parser.add_argument("--handshake-classes", type=int, default=None)
    parser.add_argument("--no-handshake", action="store_true")
    parser.add_argument("--handshake-delay", type=float, default=0.0)
    parser.add_argument("--fail-after", type=int, default=-1, help="exit abruptly after N responses")
    parser.add_argument("--garbage-after", type=int, default=-1, help="emit one non-JSON line after N responses")
    parser.add_argument("--respond-id", choices=["echo", "wrong", "duplicate"], default="echo")
    parser.add_argument("--silent", action="store_true", help="consume requests, never respond")
    args = parser.parse_args()

    if args.handshake_delay:
        time.sleep(args.handshake_delay)
    if not args.no_handshake:
        classes = args.handshake_classes if args.handshake_classes is not None else args.classes
        print(json.dumps({"protocol": args.handshake_protocol, "class_count": classes}), flush=True)

    respond = build_responder(args)
    answered = 0
    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        if args.silent:
            continue
        if args.fail_after >= 0 and answered >= args.fail_after:
            return 3
        if args.garbage_after >= 0 and answered == args.garbage_after:
            print("this is not json", flush=True)
            answered += 1
            continue
        body = respond(req["id"], decode_pixels(req["png_b64"]))
        rid = req["id"]
        if args.respond_id == "wrong":
            rid = rid + "-mangled"
        print(json.dumps({"id": rid, **body}), flush=True)
        if args.respond_id == "duplicate":
            print(json.dumps({"id": rid, **body}), flush=True)
        answered += 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
