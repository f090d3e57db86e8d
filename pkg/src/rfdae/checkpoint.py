"""Versioned binary model checkpoints (RFDAE format).

Layout (little-endian), version 1:

    magic   8s   "RFDAE\\0\\0\\0"
    u32     version = 1
    config  8 x u32 (input_features, seq_len, hidden, encoder_depth,
                     clf_width_1, clf_width_2, num_classes, final_relu)
            3 x f64 (lambda, mask_rate, dropout_rate)
    per tensor, in canonical order (encoder layer 1 w_i,u_i,b_i,w_o,...;
    encoder layer 2; decoder w,b; clf1..clf3 w,b):
            u32 rank, rank x u32 dims, float32 payload row-major
    u32     CRC32 of every preceding byte

Weights train in float64 and serialize in float32; a round trip therefore
reproduces eval outputs to float32 precision, not bitwise.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .data import (BadMagicError, DataError, IntegrityError, SchemaError,
                   TruncatedError, VersionError, atomic_write_bytes)
from .model import DaeModel, ModelConfig
from .numeric import Rng

CHECKPOINT_MAGIC = b"RFDAE\x00\x00\x00"
CHECKPOINT_VERSION = 1
_CONFIG_FMT = "<8I3d"


def checkpoint_to_bytes(model: DaeModel) -> bytes:
    cfg = model.config
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    parts.append(struct.pack(
        _CONFIG_FMT,
        cfg.input_features, cfg.seq_len, cfg.hidden, cfg.encoder_depth,
        cfg.classifier_widths[0], cfg.classifier_widths[1], cfg.num_classes,
        int(cfg.final_relu), cfg.lam, cfg.mask_rate, cfg.dropout_rate,
    ))
    for name, arr in model.param_tensors().items():
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def checkpoint_write(model: DaeModel, path: str) -> None:
    atomic_write_bytes(path, checkpoint_to_bytes(model))


def checkpoint_from_bytes(data: bytes) -> tuple[DaeModel, ModelConfig]:
    if len(data) < 8 or data[:8] != CHECKPOINT_MAGIC:
        raise BadMagicError("not an RFDAE checkpoint (bad magic)")
    if len(data) < 16:
        raise TruncatedError(f"header needs 16 bytes, file has {len(data)}")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    if len(data) < 12 + struct.calcsize(_CONFIG_FMT) + 4:
        raise TruncatedError(f"config block runs past end of file ({len(data)} bytes)")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise IntegrityError("CRC32 mismatch: checkpoint is corrupted")

    fields = struct.unpack_from(_CONFIG_FMT, data, 12)
    m, n, hidden, depth, w0, w1, k, final_relu = fields[:8]
    lam, mask_rate, dropout_rate = fields[8:]
    try:
        cfg = ModelConfig(input_features=m, seq_len=n, num_classes=k, hidden=hidden,
                          encoder_depth=depth, classifier_widths=(w0, w1, k),
                          final_relu=bool(final_relu), lam=lam, mask_rate=mask_rate,
                          dropout_rate=dropout_rate)
    except ValueError as exc:
        raise SchemaError(f"invalid config in checkpoint: {exc}") from exc

    model = DaeModel.init(cfg, Rng(0))
    off = 12 + struct.calcsize(_CONFIG_FMT)
    end = len(data) - 4
    for name, arr in model.param_tensors().items():
        if off + 4 > end:
            raise TruncatedError(f"tensor table ends early before {name}")
        (rank,) = struct.unpack_from("<I", data, off)
        off += 4
        if rank != arr.ndim:
            raise SchemaError(f"tensor {name}: rank {rank}, expected {arr.ndim}")
        if off + 4 * rank > end:
            raise TruncatedError(f"dims of {name} run past end of file")
        dims = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        if dims != arr.shape:
            raise SchemaError(f"tensor {name}: dims {dims}, expected {arr.shape}")
        count = int(np.prod(dims))
        if off + 4 * count > end:
            raise TruncatedError(f"payload of {name} runs past end of file")
        payload = np.frombuffer(data, dtype="<f4", count=count, offset=off)
        arr[...] = payload.reshape(dims).astype(np.float64)
        off += 4 * count
    if off != end:
        raise SchemaError(f"{end - off} unexplained trailing bytes before CRC")
    return model, cfg


def checkpoint_read(path: str) -> tuple[DaeModel, ModelConfig]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint file not found: {path}") from exc
    return checkpoint_from_bytes(data)
