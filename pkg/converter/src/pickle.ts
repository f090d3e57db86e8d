/**
 * Minimal pickle reader covering the RadioML 2016.10A archive profile:
 * a dict keyed by (modulation, snr) tuples whose values are float32 numpy
 * arrays. Handles both the python-2 cPickle protocol-2 encoding
 * (SHORT_BINSTRING/BINSTRING payloads) and python-3 re-pickles
 * (BINUNICODE + _codecs.encode latin-1 payloads, BINBYTES at protocol 3+,
 * FRAME/MEMOIZE at protocol 4).
 *
 * Numpy arrays surface as NdArray records; nothing is executed, unknown
 * globals raise.
 */

export interface NdArray {
  kind: "ndarray";
  shape: number[];
  dtype: string; // numpy letter code with byte order, e.g. "<f4"
  data: Buffer;
}

interface GlobalRef {
  kind: "global";
  name: string;
}

interface DTypeObj {
  kind: "dtype";
  code: string;
  byteOrder: string;
}

type Value =
  | null
  | boolean
  | number
  | string
  | Buffer
  | Value[]
  | Map<string, Value>
  | NdArray
  | GlobalRef
  | DTypeObj
  | { kind: "tuple"; items: Value[] };

const MARK_SENTINEL = Symbol("mark");

export function isNdArray(v: unknown): v is NdArray {
  return typeof v === "object" && v !== null && (v as NdArray).kind === "ndarray";
}

function keyOf(v: Value): string {
  // dict keys in these archives are strings, ints, or (str, int) tuples
  if (typeof v === "string" || typeof v === "number") return String(v);
  if (Buffer.isBuffer(v)) return v.toString("latin1");
  if (typeof v === "object" && v !== null && (v as any).kind === "tuple") {
    return (v as any).items.map((x: Value) => keyOf(x)).join("|");
  }
  throw new Error(`unsupported dict key ${JSON.stringify(v)}`);
}

export function loadPickle(buf: Buffer): Map<string, Value> {
  const stack: (Value | typeof MARK_SENTINEL)[] = [];
  const memo = new Map<number, Value>();
  let pos = 0;
  let memoCounter = 0;

  const u8 = () => buf.readUInt8(pos++);
  const i4 = () => {
    const v = buf.readInt32LE(pos);
    pos += 4;
    return v;
  };
  const u4 = () => {
    const v = buf.readUInt32LE(pos);
    pos += 4;
    return v;
  };
  const take = (nbytes: number) => {
    const b = buf.subarray(pos, pos + nbytes);
    if (b.length !== nbytes) throw new Error("pickle data runs past end of file");
    pos += nbytes;
    return Buffer.from(b);
  };
  const popMark = (): Value[] => {
    const items: Value[] = [];
    for (;;) {
      if (stack.length === 0) throw new Error("pickle stack underflow (no mark)");
      const top = stack.pop()!;
      if (top === MARK_SENTINEL) return items.reverse();
      items.push(top as Value);
    }
  };
  const pop = (): Value => {
    const v = stack.pop();
    if (v === undefined || v === MARK_SENTINEL) throw new Error("pickle stack underflow");
    return v as Value;
  };
  const readLine = (): string => {
    const nl = buf.indexOf(0x0a, pos);
    if (nl < 0) throw new Error("unterminated pickle line");
    const s = buf.subarray(pos, nl).toString("latin1");
    pos = nl + 1;
    return s;
  };

  for (;;) {
    const op = u8();
    switch (op) {
      case 0x80: // PROTO
        u8();
        break;
      case 0x95: // FRAME (protocol 4)
        pos += 8;
        break;
      case 0x7d: // EMPTY_DICT "}"
        stack.push(new Map());
        break;
      case 0x5d: // EMPTY_LIST "]"
        stack.push([]);
        break;
      case 0x28: // MARK "("
        stack.push(MARK_SENTINEL);
        break;
      case 0x4e: // NONE
        stack.push(null);
        break;
      case 0x88: // NEWTRUE
        stack.push(true);
        break;
      case 0x89: // NEWFALSE
        stack.push(false);
        break;
      case 0x4a: // BININT
        stack.push(i4());
        break;
      case 0x4b: // BININT1
        stack.push(u8());
        break;
      case 0x4d: {
        // BININT2
        const v = buf.readUInt16LE(pos);
        pos += 2;
        stack.push(v);
        break;
      }
      case 0x8a: {
        // LONG1
        const nb = u8();
        const raw = take(nb);
        let v = 0n;
        for (let i = nb - 1; i >= 0; i--) v = (v << 8n) | BigInt(raw[i]);
        if (nb > 0 && raw[nb - 1] & 0x80) v -= 1n << BigInt(8 * nb);
        stack.push(Number(v));
        break;
      }
      case 0x47: {
        // BINFLOAT (big-endian double)
        const v = buf.readDoubleBE(pos);
        pos += 8;
        stack.push(v);
        break;
      }
      case 0x55: {
        // SHORT_BINSTRING (py2 str): keep as latin1 Buffer
        const n = u8();
        stack.push(take(n));
        break;
      }
      case 0x54: {
        // BINSTRING
        const n = i4();
        stack.push(take(n));
        break;
      }
      case 0x58: {
        // BINUNICODE (utf-8)
        const n = u4();
        stack.push(take(n).toString("utf-8"));
        break;
      }
      case 0x8c: {
        // SHORT_BINUNICODE (protocol 4)
        const n = u8();
        stack.push(take(n).toString("utf-8"));
        break;
      }
      case 0x42: {
        // BINBYTES
        const n = u4();
        stack.push(take(n));
        break;
      }
      case 0x43: {
        // SHORT_BINBYTES
        const n = u8();
        stack.push(take(n));
        break;
      }
      case 0x85: // TUPLE1
        stack.push({ kind: "tuple", items: [pop()] });
        break;
      case 0x86: {
        // TUPLE2
        const b = pop();
        const a = pop();
        stack.push({ kind: "tuple", items: [a, b] });
        break;
      }
      case 0x87: {
        // TUPLE3
        const c = pop();
        const b = pop();
        const a = pop();
        stack.push({ kind: "tuple", items: [a, b, c] });
        break;
      }
      case 0x74: // TUPLE "t"
        stack.push({ kind: "tuple", items: popMark() });
        break;
      case 0x29: // EMPTY_TUPLE ")"
        stack.push({ kind: "tuple", items: [] });
        break;
      case 0x71: // BINPUT "q"
        memo.set(u8(), stack[stack.length - 1] as Value);
        break;
      case 0x72: // LONG_BINPUT "r"
        memo.set(u4(), stack[stack.length - 1] as Value);
        break;
      case 0x94: // MEMOIZE (protocol 4)
        memo.set(memoCounter++, stack[stack.length - 1] as Value);
        break;
      case 0x68: {
        // BINGET "h"
        const v = memo.get(u8());
        if (v === undefined) throw new Error("pickle memo miss");
        stack.push(v);
        break;
      }
      case 0x6a: {
        // LONG_BINGET "j"
        const v = memo.get(u4());
        if (v === undefined) throw new Error("pickle memo miss");
        stack.push(v);
        break;
      }
      case 0x63: {
        // GLOBAL "c": module\nname\n
        const mod = readLine();
        const name = readLine();
        stack.push({ kind: "global", name: `${mod}.${name}` });
        break;
      }
      case 0x93: {
        // STACK_GLOBAL (protocol 4)
        const name = pop();
        const mod = pop();
        stack.push({ kind: "global", name: `${mod}.${name}` });
        break;
      }
      case 0x52: {
        // REDUCE "R"
        const args = pop() as { kind: "tuple"; items: Value[] };
        const fn = pop() as GlobalRef;
        stack.push(applyGlobal(fn, args.items));
        break;
      }
      case 0x62: {
        // BUILD "b"
        const state = pop();
        const obj = pop();
        stack.push(applyBuild(obj, state));
        break;
      }
      case 0x73: {
        // SETITEM "s"
        const v = pop();
        const key = pop();
        const d = stack[stack.length - 1] as Map<string, Value>;
        if (!(d instanceof Map)) throw new Error("SETITEM on non-dict");
        d.set(keyOf(key), v);
        break;
      }
      case 0x75: {
        // SETITEMS "u"
        const items = popMark();
        const d = stack[stack.length - 1] as Map<string, Value>;
        if (!(d instanceof Map)) throw new Error("SETITEMS on non-dict");
        for (let i = 0; i < items.length; i += 2) {
          d.set(keyOf(items[i]), items[i + 1]);
        }
        break;
      }
      case 0x65: {
        // APPENDS "e"
        const items = popMark();
        const list = stack[stack.length - 1];
        if (!Array.isArray(list)) throw new Error("APPENDS on non-list");
        list.push(...items);
        break;
      }
      case 0x61: {
        // APPEND "a"
        const v = pop();
        const list = stack[stack.length - 1];
        if (!Array.isArray(list)) throw new Error("APPEND on non-list");
        list.push(v);
        break;
      }
      case 0x2e: {
        // STOP "."
        const root = pop();
        if (!(root instanceof Map)) {
          throw new Error("expected a dict at the pickle root");
        }
        return root;
      }
      default:
        throw new Error(
          `unsupported pickle opcode 0x${op.toString(16)} at offset ${pos - 1}`
        );
    }
  }
}

const RECONSTRUCT_NAMES = new Set([
  "numpy.core.multiarray._reconstruct",
  "numpy._core.multiarray._reconstruct",
]);

function applyGlobal(fn: GlobalRef, args: Value[]): Value {
  if (RECONSTRUCT_NAMES.has(fn.name)) {
    return { kind: "ndarray", shape: [], dtype: "", data: Buffer.alloc(0) };
  }
  if (fn.name === "numpy.dtype") {
    const code = args[0];
    const codeStr = Buffer.isBuffer(code) ? code.toString("latin1") : String(code);
    return { kind: "dtype", code: codeStr, byteOrder: "=" };
  }
  if (fn.name === "_codecs.encode") {
    const [s, enc] = args;
    const encoding = Buffer.isBuffer(enc) ? enc.toString("latin1") : String(enc);
    if (encoding !== "latin1" && encoding !== "latin-1") {
      throw new Error(`unsupported _codecs.encode encoding ${encoding}`);
    }
    return Buffer.from(String(s), "latin1");
  }
  if (fn.name === "numpy.ndarray") {
    return { kind: "global", name: fn.name };
  }
  throw new Error(`unsupported pickle global ${fn.name}`);
}

function applyBuild(obj: Value, state: Value): Value {
  if (typeof obj === "object" && obj !== null && (obj as any).kind === "dtype") {
    // dtype state tuple: (version, byteorder, subdtype, names, fields, ...)
    const d = obj as DTypeObj;
    const items = (state as any).items as Value[];
    const bo = items[1];
    d.byteOrder = Buffer.isBuffer(bo) ? bo.toString("latin1") : String(bo);
    return d;
  }
  if (isNdArray(obj)) {
    // ndarray state: (version, shape, dtype, fortran_order, data)
    const items = (state as any).items as Value[];
    const shapeTuple = items[1] as { kind: "tuple"; items: Value[] };
    const dtype = items[2] as DTypeObj;
    const fortran = items[3];
    const data = items[4];
    if (fortran === true) throw new Error("fortran-order arrays are not supported");
    if (!Buffer.isBuffer(data)) throw new Error("ndarray data is not a byte payload");
    obj.shape = shapeTuple.items.map((v) => Number(v));
    obj.dtype = (dtype.byteOrder === "=" ? "<" : dtype.byteOrder) + dtype.code;
    obj.data = data;
    return obj;
  }
  throw new Error("BUILD on unsupported object");
}

/** Decode an NdArray's payload into numbers (row-major). */
export function ndarrayValues(a: NdArray): Float64Array {
  const count = a.shape.reduce((x, y) => x * y, 1);
  const out = new Float64Array(count);
  const le = !a.dtype.startsWith(">");
  const code = a.dtype.replace(/^[<>=|]/, "");
  for (let i = 0; i < count; i++) {
    switch (code) {
      case "f4":
        out[i] = le ? a.data.readFloatLE(i * 4) : a.data.readFloatBE(i * 4);
        break;
      case "f8":
        out[i] = le ? a.data.readDoubleLE(i * 8) : a.data.readDoubleBE(i * 8);
        break;
      case "i8":
        out[i] = Number(le ? a.data.readBigInt64LE(i * 8) : a.data.readBigInt64BE(i * 8));
        break;
      case "i4":
        out[i] = le ? a.data.readInt32LE(i * 4) : a.data.readInt32BE(i * 4);
        break;
      case "u1":
        out[i] = a.data.readUInt8(i);
        break;
      default:
        throw new Error(`unsupported array dtype ${a.dtype}`);
    }
  }
  return out;
}
