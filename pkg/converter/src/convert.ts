/**
 * Archive-to-SIGSET conversion.
 *
 * Class names are ordered lexicographically (source dict ordering is not
 * deterministic across serializations), records by (class, snr, source
 * index). Values are copied float32-exact; IQ stays raw, the training side
 * applies its own feature transforms.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { datasetValues, readHdf5 } from "./hdf5";
import { isNdArray, loadPickle, ndarrayValues } from "./pickle";
import { writeSigset, SigsetRecord } from "./sigset";

export type SourceFormat = "radioml2016" | "radioml2018" | "psd_csv";

export interface SourceSpec {
  format: SourceFormat;
  path: string;
  /** For radioml2018: ordered class names matching the one-hot columns
   * (required, the archive stores none). For other formats: subset filter. */
  classes?: string[];
  snrMin?: number;
}

export interface ConversionSummary {
  records: number;
  classes: string[];
  snrRange: [number, number];
  n: number;
  m: number;
  outPath: string;
}

interface RawRecord {
  className: string;
  snr: number;
  sourceIndex: number;
  features: Float32Array; // (n, m) row-major
}

export function convert(spec: SourceSpec, outPath: string): ConversionSummary {
  const buf = fs.readFileSync(spec.path);
  let raw: RawRecord[];
  let n: number;
  let m: number;
  if (spec.format === "radioml2016") {
    ({ raw, n, m } = load2016(buf));
  } else if (spec.format === "radioml2018") {
    ({ raw, n, m } = load2018(buf, spec.classes));
  } else if (spec.format === "psd_csv") {
    ({ raw, n, m } = loadPsdCsv(buf));
  } else {
    throw new Error(`unknown source format ${spec.format}`);
  }

  if (spec.format !== "radioml2018" && spec.classes && spec.classes.length > 0) {
    const keep = new Set(spec.classes);
    raw = raw.filter((r) => keep.has(r.className));
  }
  if (spec.snrMin !== undefined) {
    raw = raw.filter((r) => r.snr >= spec.snrMin!);
  }
  if (raw.length === 0) throw new Error("no records left after filtering");

  const classes = [...new Set(raw.map((r) => r.className))].sort();
  const index = new Map(classes.map((c, i) => [c, i]));
  raw.sort((a, b) =>
    index.get(a.className)! - index.get(b.className)! ||
    a.snr - b.snr ||
    a.sourceIndex - b.sourceIndex
  );
  const records: SigsetRecord[] = raw.map((r) => ({
    label: index.get(r.className)!,
    snrDb: r.snr,
    features: r.features,
  }));
  const blob = writeSigset({ classNames: classes, n, m, records });
  writeAtomic(outPath, blob);
  const snrs = raw.map((r) => r.snr);
  return {
    records: records.length,
    classes,
    snrRange: [Math.min(...snrs), Math.max(...snrs)],
    n,
    m,
    outPath,
  };
}

function writeAtomic(outPath: string, blob: Buffer): void {
  const dir = path.dirname(path.resolve(outPath));
  const tmp = path.join(dir, `.${path.basename(outPath)}.tmp.${process.pid}`);
  try {
    fs.writeFileSync(tmp, blob);
    fs.renameSync(tmp, outPath);
  } finally {
    if (fs.existsSync(tmp)) fs.unlinkSync(tmp);
  }
}

/** 2016.10A: pickled dict {(modulation, snr): float32 (count, 2, len)}. */
function load2016(buf: Buffer): { raw: RawRecord[]; n: number; m: number } {
  const dict = loadPickle(buf);
  const raw: RawRecord[] = [];
  let n = -1;
  for (const [key, value] of dict.entries()) {
    const parts = key.split("|");
    if (parts.length !== 2 || !isNdArray(value)) {
      throw new Error(`unexpected archive entry ${key}`);
    }
    const className = parts[0];
    const snr = Number(parts[1]);
    if (!Number.isFinite(snr)) throw new Error(`non-numeric snr in key ${key}`);
    const [count, channels, length] = value.shape;
    if (value.shape.length !== 3 || channels !== 2) {
      throw new Error(`entry ${key}: expected (count, 2, len), got (${value.shape})`);
    }
    if (n === -1) n = length;
    if (length !== n) {
      throw new Error(`entry ${key}: ragged sample length ${length} != ${n}`);
    }
    const values = ndarrayValues(value);
    for (let r = 0; r < count; r++) {
      // (2, len) channel-major in the archive -> (len, 2) row-major records
      const features = new Float32Array(n * 2);
      const base = r * 2 * length;
      for (let t = 0; t < length; t++) {
        features[t * 2] = Math.fround(values[base + t]);
        features[t * 2 + 1] = Math.fround(values[base + length + t]);
      }
      raw.push({ className, snr, sourceIndex: r, features });
    }
  }
  return { raw, n, m: 2 };
}

/** 2018.01A: HDF5 with X (N, len, 2) float32, Y (N, K) one-hot, Z (N, 1). */
function load2018(buf: Buffer, classes?: string[]): { raw: RawRecord[]; n: number; m: number } {
  const file = readHdf5(buf);
  const x = file.get("X");
  const y = file.get("Y");
  const z = file.get("Z");
  if (!x || !y || !z) {
    throw new Error(`archive must contain X, Y, Z datasets; found ${[...file.keys()]}`);
  }
  const [nRec, len, channels] = x.shape;
  if (x.shape.length !== 3 || channels !== 2) {
    throw new Error(`X: expected (N, len, 2), got (${x.shape})`);
  }
  const k = y.shape[1];
  if (y.shape.length !== 2 || y.shape[0] !== nRec) {
    throw new Error(`Y: expected (${nRec}, K), got (${y.shape})`);
  }
  if (z.shape[0] !== nRec) {
    throw new Error(`Z: expected ${nRec} rows, got ${z.shape[0]}`);
  }
  if (!classes || classes.length === 0) {
    throw new Error(
      "radioml2018 archives carry no class names; pass --classes with the " +
      `ordered ${k} names matching the one-hot columns`
    );
  }
  if (classes.length !== k) {
    throw new Error(`--classes lists ${classes.length} names, archive one-hot width is ${k}`);
  }
  const xv = datasetValues(x);
  const yv = datasetValues(y);
  const zv = datasetValues(z);
  const raw: RawRecord[] = [];
  const perClassCount = new Map<string, number>();
  for (let r = 0; r < nRec; r++) {
    let hot = -1;
    for (let c = 0; c < k; c++) {
      const v = yv[r * k + c];
      if (v === 1) {
        if (hot !== -1) throw new Error(`record ${r}: one-hot row has multiple ones`);
        hot = c;
      } else if (v !== 0) {
        throw new Error(`record ${r}: label row is not one-hot (value ${v})`);
      }
    }
    if (hot === -1) throw new Error(`record ${r}: one-hot row has no one`);
    const className = classes[hot];
    const features = new Float32Array(len * 2);
    for (let i = 0; i < len * 2; i++) {
      features[i] = Math.fround(xv[r * len * 2 + i]);
    }
    const idx = perClassCount.get(className) ?? 0;
    perClassCount.set(className, idx + 1);
    raw.push({ className, snr: zv[r], sourceIndex: r, features });
  }
  return { raw, n: len, m: 2 };
}

/** PSD CSV: one record per line, "class,snr_db,v1,...,vn". */
function loadPsdCsv(buf: Buffer): { raw: RawRecord[]; n: number; m: number } {
  const lines = buf.toString("utf-8").split("\n").map((l) => l.trim()).filter(Boolean);
  if (lines.length === 0) throw new Error("empty PSD CSV");
  const raw: RawRecord[] = [];
  let n = -1;
  for (const [lineNo, line] of lines.entries()) {
    const cells = line.split(",");
    if (cells.length < 3) {
      throw new Error(`line ${lineNo + 1}: expected class,snr,values...`);
    }
    const className = cells[0];
    const snr = Number(cells[1]);
    if (!Number.isInteger(snr)) {
      throw new Error(`line ${lineNo + 1}: snr ${cells[1]} is not an integer dB`);
    }
    const values = cells.slice(2).map((c, i) => {
      const v = Number(c);
      if (!Number.isFinite(v)) {
        throw new Error(`line ${lineNo + 1}, value ${i + 1}: ${c} is not a number`);
      }
      return Math.fround(v);
    });
    if (n === -1) n = values.length;
    if (values.length !== n) {
      throw new Error(`line ${lineNo + 1}: ${values.length} values, expected ${n}`);
    }
    raw.push({ className, snr, sourceIndex: lineNo, features: Float32Array.from(values) });
  }
  return { raw, n, m: 1 };
}
