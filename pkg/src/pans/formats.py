"""Bit-exact on-disk formats and the benchmark manifest.

Binary layouts (all integers little-endian):

  feature file  "PANSFEAT" | u16 version | u32 height, width, dim | f32 payload
  model file    "PANSMODL" | u16 version | u8 head (0 cosine, 1 linear)
                | u32 classes, dim | f64 tau | f32 weights [| f32 bias]
  score file    "PANSSCOR" | u16 version | u32 height, width | f32 payload

Masks are binary PGM (P5, maxval 255); pixel value = class id, 255 = anomaly.
Payloads are row-major, pixel-then-channel. Grids compute in float64 but
store float32, so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grids import COSINE, LINEAR, AnomalyMap, FeatureMap, LabelMask, PrototypeBank

FEATURE_MAGIC = b"PANSFEAT"
MODEL_MAGIC = b"PANSMODL"
SCORE_MAGIC = b"PANSSCOR"
VERSION = 1

_HEAD_CODE = {COSINE: 0, LINEAR: 1}
_HEAD_NAME = {0: COSINE, 1: LINEAR}


def _read_exact(data: bytes, offset: int, count: int, path, field: str) -> bytes:
    if offset + count > len(data):
        raise FormatError(f"{path}: truncated while reading {field} "
                          f"(need {count} bytes at offset {offset}, have {len(data) - offset})")
    return data[offset:offset + count]


def _check_magic(data: bytes, magic: bytes, path) -> None:
    got = _read_exact(data, 0, len(magic), path, "magic")
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")


def _check_version(version: int, path) -> None:
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}")


def _payload_f32(data: bytes, offset: int, count: int, path) -> np.ndarray:
    raw = _read_exact(data, offset, 4 * count, path, "payload")
    if len(data) != offset + 4 * count:
        raise FormatError(f"{path}: {len(data) - offset - 4 * count} trailing bytes after payload")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


def write_features(path, fm: FeatureMap) -> None:
    header = struct.pack("<8sHIII", FEATURE_MAGIC, VERSION, fm.height, fm.width, fm.dim)
    payload = fm.data.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_features(path) -> FeatureMap:
    data = Path(path).read_bytes()
    _check_magic(data, FEATURE_MAGIC, path)
    version, h, w, d = struct.unpack("<HIII", _read_exact(data, 8, 14, path, "header"))
    _check_version(version, path)
    if h < 1 or w < 1 or d < 1:
        raise FormatError(f"{path}: invalid dimensions {h}x{w}x{d} in header")
    flat = _payload_f32(data, 22, h * w * d, path)
    return FeatureMap(flat.reshape(h, w, d))


def write_mask(path, mask: LabelMask) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + mask.labels.tobytes())


def _pgm_token(data: bytes, pos: int, path, field: str):
    # skip whitespace and '#' comments, then take one token
    n = len(data)
    while pos < n:
        b = data[pos]
        if b in b" \t\r\n":
            pos += 1
        elif b == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise FormatError(f"{path}: missing {field} in PGM header")
    return data[start:pos], pos


def read_mask(path) -> LabelMask:
    data = Path(path).read_bytes()
    token, pos = _pgm_token(data, 0, path, "magic")
    if token != b"P5":
        raise FormatError(f"{path}: bad magic {token!r}, expected b'P5' (binary PGM)")
    fields = {}
    for name in ("width", "height", "maxval"):
        token, pos = _pgm_token(data, pos, path, name)
        try:
            fields[name] = int(token)
        except ValueError:
            raise FormatError(f"{path}: {name} is not an integer: {token!r}") from None
    if fields["maxval"] != 255:
        raise FormatError(f"{path}: maxval must be 255, got {fields['maxval']}")
    w, h = fields["width"], fields["height"]
    if w < 1 or h < 1:
        raise FormatError(f"{path}: invalid dimensions {w}x{h} in header")
    pos += 1  # exactly one whitespace byte separates header and payload
    raw = _read_exact(data, pos, h * w, path, "payload")
    if len(data) != pos + h * w:
        raise FormatError(f"{path}: {len(data) - pos - h * w} trailing bytes after payload")
    return LabelMask(np.frombuffer(raw, dtype=np.uint8).reshape(h, w))


def write_model(path, bank: PrototypeBank, tau: float) -> None:
    header = struct.pack("<8sHBIId", MODEL_MAGIC, VERSION, _HEAD_CODE[bank.head_kind],
                         bank.classes, bank.dim, tau)
    blob = header + bank.weights.astype("<f4").tobytes()
    if bank.head_kind == LINEAR:
        blob += bank.bias.astype("<f4").tobytes()
    Path(path).write_bytes(blob)


def read_model(path):
    """Returns (PrototypeBank, tau)."""
    data = Path(path).read_bytes()
    _check_magic(data, MODEL_MAGIC, path)
    version, head, classes, dim, tau = struct.unpack(
        "<HBIId", _read_exact(data, 8, 19, path, "header"))
    _check_version(version, path)
    if head not in _HEAD_NAME:
        raise FormatError(f"{path}: unknown head kind code {head}")
    if classes < 2 or dim < 1:
        raise FormatError(f"{path}: invalid classes/dim {classes}/{dim} in header")
    kind = _HEAD_NAME[head]
    n = classes * dim if kind == COSINE else classes * dim + classes
    flat = _payload_f32(data, 27, n, path)
    weights = flat[:classes * dim].reshape(classes, dim)
    bias = flat[classes * dim:] if kind == LINEAR else None
    return PrototypeBank(weights, head_kind=kind, bias=bias), float(tau)


def write_scores(path, amap: AnomalyMap) -> None:
    header = struct.pack("<8sHII", SCORE_MAGIC, VERSION, amap.height, amap.width)
    Path(path).write_bytes(header + amap.data.astype("<f4").tobytes())


def read_scores(path) -> AnomalyMap:
    data = Path(path).read_bytes()
    _check_magic(data, SCORE_MAGIC, path)
    version, h, w = struct.unpack("<HII", _read_exact(data, 8, 10, path, "header"))
    _check_version(version, path)
    if h < 1 or w < 1:
        raise FormatError(f"{path}: invalid dimensions {h}x{w} in header")
    flat = _payload_f32(data, 18, h * w, path)
    return AnomalyMap(flat.reshape(h, w))


def write_manifest(path, train_pairs, eval_pairs) -> None:
    """Pairs are (feature_name, mask_name) relative to the manifest directory."""
    lines = [f"train {f} {m}" for f, m in train_pairs]
    lines += [f"eval {f} {m}" for f, m in eval_pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_manifest(path):
    """Returns (train_pairs, eval_pairs) with paths resolved to absolute."""
    path = Path(path)
    base = path.parent
    train_pairs, eval_pairs = [], []
    for ln, line in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("train", "eval"):
            raise FormatError(f"{path}:{ln}: expected 'train|eval <features> <mask>', got {line!r}")
        pair = (base / parts[1], base / parts[2])
        (train_pairs if parts[0] == "train" else eval_pairs).append(pair)
    return train_pairs, eval_pairs
