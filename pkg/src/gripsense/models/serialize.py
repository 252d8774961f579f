"""Versioned flat binary model files.

Layout: magic ``GSM1`` | uint32 LE descriptor length | JSON descriptor
(utf-8) | uint64 LE parameter count | float32 LE parameter block |
uint32 LE CRC32 of everything preceding it.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .classifier import ClassifierConfig, MaterialClassifier
from .predictor import PredictorConfig, SlipPredictor

MAGIC = b"GSM1"


class ModelFormatError(ValueError):
    """Bad magic, version, truncation, or descriptor."""


class ModelChecksumError(ValueError):
    """Stored CRC32 does not match the file contents."""


def _pack(descriptor: dict, params: np.ndarray) -> bytes:
    desc = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    block = np.asarray(params, dtype="<f4").tobytes()
    body = MAGIC + struct.pack("<I", len(desc)) + desc \
        + struct.pack("<Q", len(params)) + block
    return body + struct.pack("<I", zlib.crc32(body))


def _unpack(blob: bytes) -> tuple[dict, np.ndarray]:
    if len(blob) < len(MAGIC) + 4 + 8 + 4:
        raise ModelFormatError("file too short for a model")
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"bad magic {blob[:len(MAGIC)]!r}")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ModelChecksumError("model file CRC32 mismatch")
    pos = len(MAGIC)
    (desc_len,) = struct.unpack_from("<I", body, pos)
    pos += 4
    try:
        descriptor = json.loads(body[pos:pos + desc_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"bad descriptor: {e}") from e
    pos += desc_len
    (count,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    block = body[pos:pos + 4 * count]
    if len(block) != 4 * count:
        raise ModelFormatError("truncated parameter block")
    params = np.frombuffer(block, dtype="<f4").astype(float)
    return descriptor, params


def save_classifier(path, model: MaterialClassifier) -> None:
    descriptor = {
        "kind": "classifier",
        "config": {
            "n_coeffs": model.cfg.n_coeffs,
            "channels": list(model.cfg.channels),
            "kernel": model.cfg.kernel,
            "classes": list(model.cfg.classes),
            "seed": model.cfg.seed,
        },
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
    }
    with open(path, "wb") as f:
        f.write(_pack(descriptor, model.theta))


def load_classifier(path) -> MaterialClassifier:
    with open(path, "rb") as f:
        descriptor, params = _unpack(f.read())
    if descriptor.get("kind") != "classifier":
        raise ModelFormatError(f"expected a classifier, got {descriptor.get('kind')!r}")
    c = descriptor["config"]
    cfg = ClassifierConfig(n_coeffs=c["n_coeffs"], channels=tuple(c["channels"]),
                           kernel=c["kernel"], classes=tuple(c["classes"]),
                           seed=c["seed"])
    model = MaterialClassifier(cfg, theta=params)
    model.input_mean = np.asarray(descriptor["input_mean"], dtype=float)
    model.input_std = np.asarray(descriptor["input_std"], dtype=float)
    return model


def save_predictor(path, model: SlipPredictor) -> None:
    descriptor = {
        "kind": "predictor",
        "config": {
            "input_dim": model.cfg.input_dim,
            "hidden": model.cfg.hidden,
            "window": model.cfg.window,
            "horizon": model.cfg.horizon,
            "seed": model.cfg.seed,
        },
        "scope": model.scope,
        "motion": model.motion,
        "material": model.material,
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "force_mean": model.force_mean,
        "force_std": model.force_std,
    }
    with open(path, "wb") as f:
        f.write(_pack(descriptor, model.theta))


def load_predictor(path) -> SlipPredictor:
    with open(path, "rb") as f:
        descriptor, params = _unpack(f.read())
    if descriptor.get("kind") != "predictor":
        raise ModelFormatError(f"expected a predictor, got {descriptor.get('kind')!r}")
    c = descriptor["config"]
    cfg = PredictorConfig(input_dim=c["input_dim"], hidden=c["hidden"],
                          window=c["window"], horizon=c["horizon"], seed=c["seed"])
    model = SlipPredictor(cfg, theta=params, scope=descriptor["scope"],
                          motion=descriptor["motion"],
                          material=descriptor["material"])
    model.input_mean = np.asarray(descriptor["input_mean"], dtype=float)
    model.input_std = np.asarray(descriptor["input_std"], dtype=float)
    model.force_mean = float(descriptor["force_mean"])
    model.force_std = float(descriptor["force_std"])
    return model
