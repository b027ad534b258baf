"""Queue-state predictor: persistence baseline plus a single-layer,
single-head self-attention sequence model whose weights come from a file
produced by the offline trainer.

The weight file is the cross-component contract: JSON with explicit shapes,
row-major float arrays, input normalization stats, and a crc32 computed over
a canonical byte encoding (header string + IEEE-754 LE float payload) so
both runtimes agree on the checksum.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

SCHEMA_VERSION = 1
LAYERNORM_EPS = 1e-5

# fixed matrix order; also the checksum order
MATRIX_SHAPES = {
    "embed_w": ("1", "d"),
    "embed_b": ("1", "d"),
    "wq": ("d", "d"),
    "wk": ("d", "d"),
    "wv": ("d", "d"),
    "ln1_gamma": ("1", "d"),
    "ln1_beta": ("1", "d"),
    "ffn_w1": ("d", "f"),
    "ffn_b1": ("1", "f"),
    "ffn_w2": ("f", "d"),
    "ffn_b2": ("1", "d"),
    "ln2_gamma": ("1", "d"),
    "ln2_beta": ("1", "d"),
    "head_w": ("d", "1"),
    "head_b": ("1", "1"),
}


class WeightSchemaError(ValueError):
    """Unsupported schema version or missing/unknown fields."""


class WeightShapeError(ValueError):
    """A matrix does not match the manifest shape."""


class WeightChecksumError(ValueError):
    """Stored crc32 does not match the canonical payload."""


class PredictorError(RuntimeError):
    """Inference produced a non-finite intermediate."""


@dataclass
class AttentionWeights:
    d_model: int
    d_ff: int
    seq_len_max: int
    norm_mean: float
    norm_scale: float
    matrices: dict[str, np.ndarray]
    posenc: str = "sinusoidal"

    def expected_shape(self, name: str) -> tuple[int, int]:
        dims = {"1": 1, "d": self.d_model, "f": self.d_ff}
        r, c = MATRIX_SHAPES[name]
        return dims[r], dims[c]

    def validate(self):
        if self.posenc not in ("sinusoidal", "none"):
            raise WeightSchemaError(f"unknown positional encoding {self.posenc!r}")
        if self.norm_scale <= 0:
            raise WeightSchemaError("norm scale must be > 0")
        for name in MATRIX_SHAPES:
            if name not in self.matrices:
                raise WeightSchemaError(f"missing matrix {name!r}")
            m = self.matrices[name]
            want = self.expected_shape(name)
            if m.shape != want:
                raise WeightShapeError(
                    f"matrix {name!r} has shape {m.shape}, expected {want}")
            if not np.all(np.isfinite(m)):
                raise WeightSchemaError(f"matrix {name!r} contains non-finite values")


def canonical_payload(w: AttentionWeights) -> bytes:
    buf = bytearray()
    buf += f"dcnsim-qpred|v{SCHEMA_VERSION}|{w.d_model}|{w.d_ff}|{w.seq_len_max}|{w.posenc}|".encode()
    buf += struct.pack("<2d", w.norm_mean, w.norm_scale)
    for name in MATRIX_SHAPES:
        m = w.matrices[name]
        buf += f"{name}|{m.shape[0]},{m.shape[1]}|".encode()
        buf += np.ascontiguousarray(m, dtype="<f8").tobytes()
    return bytes(buf)


def weights_checksum(w: AttentionWeights) -> int:
    return zlib.crc32(canonical_payload(w))


def save_weights(w: AttentionWeights, path) -> None:
    w.validate()
    doc = {
        "schema_version": SCHEMA_VERSION,
        "d_model": w.d_model,
        "d_ff": w.d_ff,
        "seq_len_max": w.seq_len_max,
        "posenc": w.posenc,
        "norm": {"mean": w.norm_mean, "scale": w.norm_scale},
        "matrices": {
            name: {"shape": list(m.shape), "data": m.reshape(-1).tolist()}
            for name, m in w.matrices.items()
        },
        "crc32": weights_checksum(w),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_weights(path) -> AttentionWeights:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightChecksumError(f"weight file is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise WeightSchemaError(
            f"schema_version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    try:
        matrices = {}
        for name, spec in doc["matrices"].items():
            if name not in MATRIX_SHAPES:
                raise WeightSchemaError(f"unknown matrix {name!r}")
            shape = tuple(spec["shape"])
            data = np.asarray(spec["data"], dtype=np.float64)
            if data.size != shape[0] * shape[1]:
                raise WeightShapeError(
                    f"matrix {name!r}: {data.size} values for shape {shape}")
            matrices[name] = data.reshape(shape)
        w = AttentionWeights(
            d_model=int(doc["d_model"]),
            d_ff=int(doc["d_ff"]),
            seq_len_max=int(doc["seq_len_max"]),
            norm_mean=float(doc["norm"]["mean"]),
            norm_scale=float(doc["norm"]["scale"]),
            matrices=matrices,
            posenc=doc.get("posenc", "sinusoidal"),
        )
    except KeyError as exc:
        raise WeightSchemaError(f"missing field {exc}") from exc
    w.validate()
    if weights_checksum(w) != doc["crc32"]:
        raise WeightChecksumError("crc32 mismatch: weight file corrupted")
    return w


def predict_persistence(samples, window_len: int = 10) -> float:
    """Mean of the last window_len samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty queue trace")
    tail = samples[-window_len:]
    return sum(tail) / len(tail)


def sinusoidal_encoding(n_pos: int, d_model: int) -> np.ndarray:
    pe = np.zeros((n_pos, d_model))
    pos = np.arange(n_pos, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)
    div = np.power(10000.0, i / d_model)
    pe[:, 0::2] = np.sin(pos / div)
    pe[:, 1::2] = np.cos(pos / div)
    return pe


def _layernorm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + LAYERNORM_EPS) * gamma + beta


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def attention_forward(x_norm: np.ndarray, w: AttentionWeights) -> np.ndarray:
    """Encoder forward over a normalized sequence; returns the (T, d) output.

    Embed + positional encoding, single-head self-attention with residual +
    layernorm, then a relu feed-forward sublayer with residual + layernorm.
    """
    m = w.matrices
    x0 = x_norm[:, None] @ m["embed_w"] + m["embed_b"]
    if w.posenc == "sinusoidal":
        x0 = x0 + sinusoidal_encoding(len(x_norm), w.d_model)
    q = x0 @ m["wq"]
    k = x0 @ m["wk"]
    v = x0 @ m["wv"]
    scores = (q @ k.T) / math.sqrt(w.d_model)
    attn = _softmax_rows(scores) @ v
    x1 = _layernorm(x0 + attn, m["ln1_gamma"], m["ln1_beta"])
    h = np.maximum(x1 @ m["ffn_w1"] + m["ffn_b1"], 0.0)
    f = h @ m["ffn_w2"] + m["ffn_b2"]
    return _layernorm(x1 + f, m["ln2_gamma"], m["ln2_beta"])


def predict_attention(samples, weights: AttentionWeights) -> float:
    """Infer the next queue depth (bits) from a depth trace."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty queue trace")
    tail = np.asarray(samples[-weights.seq_len_max:], dtype=np.float64)
    x_norm = (tail - weights.norm_mean) / weights.norm_scale
    out = attention_forward(x_norm, weights)
    y = float((out[-1] @ weights.matrices["head_w"])[0]
              + weights.matrices["head_b"][0, 0])
    if not math.isfinite(y):
        raise PredictorError("non-finite prediction")
    return y * weights.norm_scale + weights.norm_mean
