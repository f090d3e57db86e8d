/**
 * Minimal HDF5 reader for RadioML 2018.01A-style archives: a version-0
 * superblock whose root group holds flat, contiguous (or compact) datasets
 * of fixed-point or IEEE-float type. Covers exactly what h5py writes for
 * such files (v1 object headers, v1 B-tree + local heap group storage);
 * chunked or compressed layouts are rejected with a clear error.
 */

const SIGNATURE = Buffer.from([0x89, 0x48, 0x44, 0x46, 0x0d, 0x0a, 0x1a, 0x0a]);

export interface H5Dataset {
  name: string;
  shape: number[];
  dtype: string; // "<f4", "<f8", "<i8", "<i4", "|u1"
  data: Buffer;
}

export function readHdf5(buf: Buffer): Map<string, H5Dataset> {
  if (buf.length < 64 || !buf.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error("not an HDF5 file (bad signature)");
  }
  const sbVersion = buf.readUInt8(8);
  if (sbVersion !== 0) {
    throw new Error(`unsupported HDF5 superblock version ${sbVersion}`);
  }
  const offsetsSize = buf.readUInt8(13);
  const lengthsSize = buf.readUInt8(14);
  if (offsetsSize !== 8 || lengthsSize !== 8) {
    throw new Error("only 8-byte offsets/lengths are supported");
  }
  // Root group symbol-table entry sits after the fixed superblock fields.
  const rootEntry = 24 + 32;
  const cacheType = buf.readUInt32LE(rootEntry + 16);
  if (cacheType !== 1) {
    throw new Error("root group without cached B-tree info is not supported");
  }
  const btreeAddr = Number(buf.readBigUInt64LE(rootEntry + 24));
  const heapAddr = Number(buf.readBigUInt64LE(rootEntry + 32));

  const heapData = readLocalHeap(buf, heapAddr);
  const out = new Map<string, H5Dataset>();
  for (const { nameOffset, objectHeader } of iterGroupEntries(buf, btreeAddr)) {
    const name = readHeapString(buf, heapData, nameOffset);
    out.set(name, readDataset(buf, name, objectHeader));
  }
  return out;
}

function readLocalHeap(buf: Buffer, addr: number): number {
  if (buf.subarray(addr, addr + 4).toString("latin1") !== "HEAP") {
    throw new Error("bad local heap signature");
  }
  return Number(buf.readBigUInt64LE(addr + 24));
}

function readHeapString(buf: Buffer, heapData: number, offset: number): string {
  const start = heapData + offset;
  const end = buf.indexOf(0, start);
  return buf.subarray(start, end).toString("utf-8");
}

interface GroupEntry {
  nameOffset: number;
  objectHeader: number;
}

function* iterGroupEntries(buf: Buffer, btreeAddr: number): Generator<GroupEntry> {
  const sig = buf.subarray(btreeAddr, btreeAddr + 4).toString("latin1");
  if (sig !== "TREE") throw new Error("bad group B-tree signature");
  const nodeType = buf.readUInt8(btreeAddr + 4);
  const level = buf.readUInt8(btreeAddr + 5);
  const entries = buf.readUInt16LE(btreeAddr + 6);
  if (nodeType !== 0) throw new Error("unexpected B-tree node type");
  // children start after: sig(4) type(1) level(1) entries(2) left(8) right(8)
  let off = btreeAddr + 24;
  for (let i = 0; i < entries; i++) {
    off += 8; // key i
    const child = Number(buf.readBigUInt64LE(off));
    off += 8;
    if (level > 0) {
      yield* iterGroupEntries(buf, child);
    } else {
      yield* iterSymbolNode(buf, child);
    }
  }
}

function* iterSymbolNode(buf: Buffer, addr: number): Generator<GroupEntry> {
  if (buf.subarray(addr, addr + 4).toString("latin1") !== "SNOD") {
    throw new Error("bad symbol-node signature");
  }
  const count = buf.readUInt16LE(addr + 6);
  let off = addr + 8;
  for (let i = 0; i < count; i++) {
    yield {
      nameOffset: Number(buf.readBigUInt64LE(off)),
      objectHeader: Number(buf.readBigUInt64LE(off + 8)),
    };
    off += 40; // symbol table entry size
  }
}

interface Message {
  type: number;
  body: Buffer;
}

function readObjectHeaderV1(buf: Buffer, addr: number): Message[] {
  const version = buf.readUInt8(addr);
  if (version !== 1) throw new Error(`unsupported object header version ${version}`);
  const totalMessages = buf.readUInt16LE(addr + 2);
  let remaining = totalMessages;
  const messages: Message[] = [];
  // blocks of (offset, byte length); the first starts after the 16-byte header
  const blocks: Array<[number, number]> = [[addr + 16, buf.readUInt32LE(addr + 8)]];
  while (blocks.length > 0 && remaining > 0) {
    let [off, size] = blocks.shift()!;
    const end = off + size;
    while (remaining > 0 && off + 8 <= end) {
      const type = buf.readUInt16LE(off);
      const msize = buf.readUInt16LE(off + 2);
      const body = buf.subarray(off + 8, off + 8 + msize);
      remaining--;
      off += 8 + msize;
      if (type === 0x10) {
        // continuation: body holds (offset, length)
        blocks.push([Number(body.readBigUInt64LE(0)), Number(body.readBigUInt64LE(8))]);
      } else {
        messages.push({ type, body: Buffer.from(body) });
      }
    }
  }
  return messages;
}

function readDataset(buf: Buffer, name: string, headerAddr: number): H5Dataset {
  let shape: number[] | null = null;
  let dtype: string | null = null;
  let data: Buffer | null = null;
  for (const msg of readObjectHeaderV1(buf, headerAddr)) {
    if (msg.type === 0x1) {
      // dataspace
      const version = msg.body.readUInt8(0);
      if (version !== 1) throw new Error(`dataset ${name}: dataspace v${version}`);
      const rank = msg.body.readUInt8(1);
      shape = [];
      for (let i = 0; i < rank; i++) {
        shape.push(Number(msg.body.readBigUInt64LE(8 + i * 8)));
      }
    } else if (msg.type === 0x3) {
      // datatype
      const classAndVersion = msg.body.readUInt8(0);
      const klass = classAndVersion & 0x0f;
      const bits0 = msg.body.readUInt8(1);
      const size = msg.body.readUInt32LE(4);
      const bigEndian = (bits0 & 0x1) !== 0;
      if (bigEndian) throw new Error(`dataset ${name}: big-endian data unsupported`);
      if (klass === 0) {
        const signed = (bits0 & 0x8) !== 0;
        if (size === 8 && signed) dtype = "<i8";
        else if (size === 4 && signed) dtype = "<i4";
        else if (size === 1 && !signed) dtype = "|u1";
        else throw new Error(`dataset ${name}: fixed-point size ${size} unsupported`);
      } else if (klass === 1) {
        if (size === 4) dtype = "<f4";
        else if (size === 8) dtype = "<f8";
        else throw new Error(`dataset ${name}: float size ${size} unsupported`);
      } else {
        throw new Error(`dataset ${name}: datatype class ${klass} unsupported`);
      }
    } else if (msg.type === 0x8) {
      // data layout
      const version = msg.body.readUInt8(0);
      if (version !== 3) throw new Error(`dataset ${name}: layout v${version} unsupported`);
      const klass = msg.body.readUInt8(1);
      if (klass === 1) {
        const addr = Number(msg.body.readBigUInt64LE(2));
        const size = Number(msg.body.readBigUInt64LE(10));
        data = Buffer.from(buf.subarray(addr, addr + size));
      } else if (klass === 0) {
        const size = msg.body.readUInt16LE(2);
        data = Buffer.from(msg.body.subarray(4, 4 + size));
      } else {
        throw new Error(`dataset ${name}: chunked/compressed layout unsupported`);
      }
    }
  }
  if (!shape || !dtype || !data) {
    throw new Error(`dataset ${name}: missing dataspace/datatype/layout`);
  }
  return { name, shape, dtype, data };
}

export function datasetValues(ds: H5Dataset): Float64Array {
  const count = ds.shape.reduce((a, b) => a * b, 1);
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    switch (ds.dtype) {
      case "<f4":
        out[i] = ds.data.readFloatLE(i * 4);
        break;
      case "<f8":
        out[i] = ds.data.readDoubleLE(i * 8);
        break;
      case "<i8":
        out[i] = Number(ds.data.readBigInt64LE(i * 8));
        break;
      case "<i4":
        out[i] = ds.data.readInt32LE(i * 4);
        break;
      case "|u1":
        out[i] = ds.data.readUInt8(i);
        break;
      default:
        throw new Error(`unsupported dtype ${ds.dtype}`);
    }
  }
  return out;
}
