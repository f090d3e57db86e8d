/**
 * SIGSET container (little-endian), version 1:
 *
 *   magic   "SIGSET\0\0" (8 bytes)
 *   u32     version = 1
 *   u32     n_records
 *   u32     n   (timesteps per record)
 *   u32     m   (features per timestep)
 *   u32     K   (classes)
 *   K x     { u16 byte length, UTF-8 class name }
 *   record: u16 label, i16 snr_db, n*m float32 row-major
 *   u32     CRC32 over every preceding byte
 */

import { crc32 } from "node:zlib";

export const SIGSET_MAGIC = Buffer.from("SIGSET\0\0", "latin1");
export const SIGSET_VERSION = 1;

export interface SigsetRecord {
  label: number;
  snrDb: number;
  features: Float32Array; // length n*m, row-major
}

export interface SigsetData {
  classNames: string[];
  n: number;
  m: number;
  records: SigsetRecord[];
}

export function writeSigset(data: SigsetData): Buffer {
  const { classNames, n, m, records } = data;
  for (const [i, rec] of records.entries()) {
    if (rec.features.length !== n * m) {
      throw new Error(`record ${i}: ${rec.features.length} values, expected ${n * m}`);
    }
    if (rec.label < 0 || rec.label >= classNames.length) {
      throw new Error(`record ${i}: label ${rec.label} out of range`);
    }
    if (!Number.isInteger(rec.snrDb) || rec.snrDb < -32768 || rec.snrDb > 32767) {
      throw new Error(`record ${i}: snr ${rec.snrDb} does not fit i16`);
    }
  }
  const parts: Buffer[] = [SIGSET_MAGIC];
  const head = Buffer.alloc(20);
  head.writeUInt32LE(SIGSET_VERSION, 0);
  head.writeUInt32LE(records.length, 4);
  head.writeUInt32LE(n, 8);
  head.writeUInt32LE(m, 12);
  head.writeUInt32LE(classNames.length, 16);
  parts.push(head);
  for (const name of classNames) {
    const raw = Buffer.from(name, "utf-8");
    const len = Buffer.alloc(2);
    len.writeUInt16LE(raw.length, 0);
    parts.push(len, raw);
  }
  for (const rec of records) {
    const hdr = Buffer.alloc(4);
    hdr.writeUInt16LE(rec.label, 0);
    hdr.writeInt16LE(rec.snrDb, 2);
    parts.push(hdr);
    const payload = Buffer.alloc(rec.features.length * 4);
    for (let i = 0; i < rec.features.length; i++) {
      payload.writeFloatLE(rec.features[i], i * 4);
    }
    parts.push(payload);
  }
  const body = Buffer.concat(parts);
  const tail = Buffer.alloc(4);
  tail.writeUInt32LE(crc32(body) >>> 0, 0);
  return Buffer.concat([body, tail]);
}

export function readSigset(buf: Buffer): SigsetData {
  if (buf.length < 8 || !buf.subarray(0, 8).equals(SIGSET_MAGIC)) {
    throw new Error("not a SIGSET file (bad magic)");
  }
  if (buf.length < 28) throw new Error("truncated SIGSET header");
  const version = buf.readUInt32LE(8);
  if (version !== SIGSET_VERSION) {
    throw new Error(`unsupported SIGSET version ${version}`);
  }
  const nRecords = buf.readUInt32LE(12);
  const n = buf.readUInt32LE(16);
  const m = buf.readUInt32LE(20);
  const k = buf.readUInt32LE(24);
  let off = 28;
  const classNames: string[] = [];
  for (let i = 0; i < k; i++) {
    const len = buf.readUInt16LE(off);
    off += 2;
    classNames.push(buf.subarray(off, off + len).toString("utf-8"));
    off += len;
  }
  const expected = off + nRecords * (4 + n * m * 4) + 4;
  if (buf.length < expected) {
    throw new Error(`truncated SIGSET: expected ${expected} bytes, got ${buf.length}`);
  }
  if (buf.length > expected) {
    throw new Error(`SIGSET shape arithmetic gives ${expected} bytes, file has ${buf.length}`);
  }
  const stored = buf.readUInt32LE(buf.length - 4);
  if ((crc32(buf.subarray(0, buf.length - 4)) >>> 0) !== stored) {
    throw new Error("SIGSET CRC32 mismatch: file is corrupted");
  }
  const records: SigsetRecord[] = [];
  for (let r = 0; r < nRecords; r++) {
    const label = buf.readUInt16LE(off);
    const snrDb = buf.readInt16LE(off + 2);
    off += 4;
    const features = new Float32Array(n * m);
    for (let i = 0; i < n * m; i++) {
      features[i] = buf.readFloatLE(off + i * 4);
    }
    off += n * m * 4;
    records.push({ label, snrDb, features });
  }
  return { classNames, n, m, records };
}
