"""Dataset container, feature transforms, and the SIGSET binary format.

SIGSET layout (little-endian), version 1:

    magic   8s   "SIGSET\\0\\0"
    u32     version = 1
    u32     n_records
    u32     n    (timesteps per record)
    u32     m    (features per timestep)
    u32     K    (classes)
    K x     { u16 byte-length, UTF-8 class name }
    per record: u16 label, i16 snr_db, n*m float32 row-major
    u32     CRC32 of every preceding byte

Features are stored float32; everything upstream computes in float64.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .numeric import RfdaeError

SIGSET_MAGIC = b"SIGSET\x00\x00"
SIGSET_VERSION = 1


class DataError(RfdaeError):
    """Invalid data contents (bad values, undefined transforms, bad labels)."""


class FormatError(DataError):
    """A serialized container violates its format."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class SchemaError(FormatError):
    """Internal shape/length arithmetic contradicts the file contents."""


class IntegrityError(FormatError):
    """Checksum mismatch: the bytes were corrupted."""


@dataclass
class SignalRecord:
    """One labeled example: (n, m) float32 features, class index, SNR tag."""

    features: np.ndarray
    label: int
    snr_db: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2:
            raise DataError(f"record features must be (n, m), got {self.features.shape}")


@dataclass
class Dataset:
    records: list[SignalRecord]
    class_names: list[str]
    n: int
    m: int
    provenance: str = ""

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def validate(self) -> "Dataset":
        k = self.num_classes
        for i, rec in enumerate(self.records):
            if rec.features.shape != (self.n, self.m):
                raise DataError(
                    f"record {i} has shape {rec.features.shape}, expected ({self.n}, {self.m})"
                )
            if not 0 <= rec.label < k:
                raise DataError(f"record {i} label {rec.label} out of range for K={k}")
            if not np.all(np.isfinite(rec.features)):
                raise DataError(f"record {i} contains non-finite features")
        return self

    def features_array(self) -> np.ndarray:
        return np.stack([r.features for r in self.records]).astype(np.float64)

    def labels_array(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def snrs_array(self) -> np.ndarray:
        return np.array([r.snr_db for r in self.records], dtype=np.int64)


# -- feature transforms ------------------------------------------------------


def iq_to_amp_phase(iq: np.ndarray) -> np.ndarray:
    """(n, 2) IQ -> (n, 2) [L2-normalized amplitude, phase/pi in [-1, 1]].

    The amplitude column is divided by its own L2 norm over the sequence;
    an all-zero sequence has no defined normalization and is an error.
    """
    iq = np.asarray(iq, dtype=np.float64)
    if iq.ndim != 2 or iq.shape[1] != 2:
        raise DataError(f"expected (n, 2) IQ, got {iq.shape}")
    amp = np.hypot(iq[:, 0], iq[:, 1])
    norm = np.linalg.norm(amp)
    if norm == 0.0:
        raise DataError("all-zero IQ sequence: amplitude normalization undefined")
    phase = np.arctan2(iq[:, 1], iq[:, 0]) / np.pi
    return np.stack([amp / norm, phase], axis=1)


def psd_features(sweep: np.ndarray, seq_len: int) -> np.ndarray:
    """Per-frequency averaged magnitudes -> (seq_len, 1), zero-padded at the end."""
    sweep = np.asarray(sweep, dtype=np.float64).reshape(-1)
    if sweep.shape[0] < 1:
        raise DataError("empty PSD sweep")
    if sweep.shape[0] > seq_len:
        raise DataError(f"sweep length {sweep.shape[0]} exceeds configured {seq_len}")
    out = np.zeros((seq_len, 1))
    out[: sweep.shape[0], 0] = sweep
    return out


def prepare_features(ds: Dataset, mode: str = "auto") -> np.ndarray:
    """Stack a dataset into (N, n, m) float64 model inputs.

    mode 'amp-phase' applies iq_to_amp_phase per record (m must be 2);
    'raw' keeps stored values; 'auto' picks amp-phase when m == 2.
    """
    if mode == "auto":
        mode = "amp-phase" if ds.m == 2 else "raw"
    x = ds.features_array()
    if mode == "raw":
        return x
    if mode != "amp-phase":
        raise DataError(f"unknown feature mode {mode!r}")
    if ds.m != 2:
        raise DataError("amp-phase features need 2-column IQ records")
    amp = np.hypot(x[:, :, 0], x[:, :, 1])
    norms = np.linalg.norm(amp, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.nonzero(norms == 0.0)[0][0])
        raise DataError(f"record {bad} is all zero: amplitude normalization undefined")
    out = np.empty_like(x)
    out[:, :, 0] = amp / norms[:, None]
    out[:, :, 1] = np.arctan2(x[:, :, 1], x[:, :, 0]) / np.pi
    return out


# -- SIGSET serialization ------------------------------------------------------


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file in the same directory, rename on success."""
    directory = os.path.dirname(os.path.abspath(path))
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp.{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def dataset_to_bytes(ds: Dataset) -> bytes:
    ds.validate()
    parts = [SIGSET_MAGIC,
             struct.pack("<5I", SIGSET_VERSION, len(ds.records), ds.n, ds.m,
                         ds.num_classes)]
    for name in ds.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError(f"class name too long: {name[:32]}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    for rec in ds.records:
        parts.append(struct.pack("<Hh", rec.label, rec.snr_db))
        parts.append(np.ascontiguousarray(rec.features, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def dataset_write(ds: Dataset, path: str) -> None:
    atomic_write_bytes(path, dataset_to_bytes(ds))


def dataset_from_bytes(data: bytes, provenance: str = "") -> Dataset:
    if len(data) < 8 or data[:8] != SIGSET_MAGIC:
        raise BadMagicError("not a SIGSET file (bad magic)")
    if len(data) < 28:
        raise TruncatedError(f"header needs 28 bytes, file has {len(data)}")
    version, n_records, n, m, k = struct.unpack_from("<5I", data, 8)
    if version != SIGSET_VERSION:
        raise VersionError(f"unsupported SIGSET version {version}, expected {SIGSET_VERSION}")
    off = 28
    names = []
    for _ in range(k):
        if off + 2 > len(data):
            raise TruncatedError(f"class-name table runs past end of file ({len(data)} bytes)")
        (length,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + length > len(data):
            raise TruncatedError("class name runs past end of file")
        names.append(data[off:off + length].decode("utf-8"))
        off += length
    rec_bytes = 4 + n * m * 4
    expected = off + n_records * rec_bytes + 4
    if len(data) < expected:
        raise TruncatedError(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise SchemaError(f"file has {len(data)} bytes but shape arithmetic gives {expected}")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise IntegrityError("CRC32 mismatch: file is corrupted")
    records = []
    for _ in range(n_records):
        label, snr = struct.unpack_from("<Hh", data, off)
        off += 4
        feats = np.frombuffer(data, dtype="<f4", count=n * m, offset=off).reshape(n, m)
        off += n * m * 4
        records.append(SignalRecord(feats.copy(), int(label), int(snr)))
    ds = Dataset(records, names, n, m, provenance=provenance)
    try:
        return ds.validate()
    except DataError as exc:
        raise SchemaError(str(exc)) from exc


def dataset_read(path: str) -> Dataset:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise DataError(f"dataset file not found: {path}") from exc
    return dataset_from_bytes(data, provenance=f"sigset:{path}")
