#!/usr/bin/env python3
"""Generate the miniature source-archive fixtures used by the converter tests.

Outputs (committed under test/fixtures/):
  mini2016.pkl        dict {(mod, snr): float32 (3, 2, 8)}, pickle protocol 2
  mini2016_py2.pkl    same structure, hand-assembled python-2-style opcodes
                      (SHORT_BINSTRING keys, BINSTRING array payloads)
  mini2018.h5         HDF5 with X (12, 8, 2) f4, Y (12, 3) int64 one-hot,
                      Z (12, 1) int64
  mini_psd.csv        4 PSD rows: class,snr,8 values
  expected.json       every float value, for exact-equality assertions
"""

import json
import os
import pickle
import struct

import h5py
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "test", "fixtures")

rng = np.random.default_rng(20240817)
MODS = ["QPSK", "BPSK"]  # deliberately not sorted
SNRS = [-4, 6]


def arr(mod, snr):
    base = (hash((mod, snr)) % 7) / 10.0
    return (rng.standard_normal((3, 2, 8)) + base).astype(np.float32)


def main():
    os.makedirs(OUT, exist_ok=True)
    data = {(m, s): arr(m, s) for m in MODS for s in SNRS}

    with open(os.path.join(OUT, "mini2016.pkl"), "wb") as fh:
        pickle.dump(data, fh, protocol=2)

    write_py2_style(data, os.path.join(OUT, "mini2016_py2.pkl"))

    # 2018-style HDF5: 12 records of length 8, 3 classes one-hot, snr column
    x = rng.standard_normal((12, 8, 2)).astype(np.float32)
    y = np.zeros((12, 3), dtype=np.int64)
    z = np.zeros((12, 1), dtype=np.int64)
    for i in range(12):
        y[i, i % 3] = 1
        z[i, 0] = -10 + 4 * (i % 5)
    with h5py.File(os.path.join(OUT, "mini2018.h5"), "w") as h5:
        h5.create_dataset("X", data=x)
        h5.create_dataset("Y", data=y)
        h5.create_dataset("Z", data=z)

    psd_rows = []
    for i in range(4):
        vals = np.round(rng.standard_normal(8).astype(np.float32), 4)
        psd_rows.append(("LTE" if i % 2 == 0 else "GSM", -6 + 4 * i, vals))
    with open(os.path.join(OUT, "mini_psd.csv"), "w") as fh:
        for name, snr, vals in psd_rows:
            fh.write(f"{name},{snr}," + ",".join(repr(float(v)) for v in vals) + "\n")

    expected = {
        "radioml2016": {
            f"{m}|{s}": data[(m, s)].tolist() for m in MODS for s in SNRS
        },
        "radioml2018": {"X": x.tolist(), "Y": y.tolist(), "Z": z.tolist()},
        "psd": [
            {"class": name, "snr": snr, "values": [float(v) for v in vals]}
            for name, snr, vals in psd_rows
        ],
    }
    with open(os.path.join(OUT, "expected.json"), "w") as fh:
        json.dump(expected, fh)
    print("fixtures written to", OUT)


def write_py2_style(data, path):
    """Hand-assemble the opcode profile cPickle (python 2, protocol 2) used
    by the original archives: str keys as SHORT_BINSTRING, array payloads as
    BINSTRING, dtype built via numpy.core.multiarray scalar machinery."""
    out = bytearray()
    out += b"\x80\x02}("
    for (mod, snr), a in data.items():
        name = mod.encode()
        out += b"U" + bytes([len(name)]) + name
        out += b"J" + struct.pack("<i", snr)
        out += b"\x86"
        out += b"cnumpy.core.multiarray\n_reconstruct\ncnumpy\nndarray\nK\x00\x85U\x01b\x87R"
        out += b"("  # MARK for the 5-item state tuple
        out += b"K\x01"
        for d in a.shape:
            out += b"K" + bytes([d])
        out += b"\x87"
        out += b"cnumpy\ndtype\nU\x02f4K\x00K\x01\x87R"
        out += b"(K\x03U\x01<NNNJ\xff\xff\xff\xffJ\xff\xff\xff\xffK\x00tb"
        out += b"\x89"
        payload = a.tobytes()
        out += b"T" + struct.pack("<i", len(payload)) + payload
        out += b"t"  # TUPLE from MARK -> state
        out += b"b"  # BUILD ndarray
    out += b"u"  # SETITEMS
    out += b"."  # STOP
    with open(path, "wb") as fh:
        fh.write(bytes(out))
    # sanity: python itself must be able to load it
    with open(path, "rb") as fh:
        back = pickle.load(fh, encoding="latin1")
    for key, a in data.items():
        k2 = (key[0], key[1])
        assert k2 in back, (k2, list(back))
        assert np.array_equal(back[k2], a)


if __name__ == "__main__":
    main()
