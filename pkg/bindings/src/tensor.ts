/**
 * Binary tensor container shared with the Python side.
 *
 * Layout, little endian throughout: 4-byte magic "HMLT", uint32 version (1),
 * uint32 ndim, ndim uint64 dims, then float32 payload in row-major order.
 * The payload must be exactly prod(dims) entries; anything else is rejected.
 */

const MAGIC = "HMLT";
const VERSION = 1;

export interface Tensor {
  dims: number[];
  data: Float32Array;
}

/** Build a tensor record, checking that dims and data agree. */
export function tensor(dims: number[], data: Float32Array): Tensor {
  if (dims.length === 0) {
    throw new Error("tensor needs at least one dimension");
  }
  let count = 1;
  for (const d of dims) {
    if (!Number.isInteger(d) || d < 0) {
      throw new Error(`bad dimension ${d}`);
    }
    count *= d;
  }
  if (data.length !== count) {
    throw new Error(`payload has ${data.length} entries, dims say ${count}`);
  }
  return { dims: [...dims], data };
}

/** Serialize a tensor to the binary layout. Non-finite values are rejected. */
export function encodeTensor(t: Tensor): Buffer {
  const checked = tensor(t.dims, t.data);
  for (const v of checked.data) {
    if (!Number.isFinite(v)) {
      throw new Error("tensor payload must be finite");
    }
  }
  const header = 4 + 4 + 4 + 8 * checked.dims.length;
  const buf = Buffer.alloc(header + 4 * checked.data.length);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(checked.dims.length, 8);
  checked.dims.forEach((d, i) => buf.writeBigUInt64LE(BigInt(d), 12 + 8 * i));
  const view = new DataView(buf.buffer, buf.byteOffset + header);
  checked.data.forEach((v, i) => view.setFloat32(4 * i, v, true));
  return buf;
}

/** Parse the binary layout back into a tensor. */
export function decodeTensor(buf: Buffer): Tensor {
  if (buf.length < 12) {
    throw new Error("tensor file truncated before the header ends");
  }
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not a tensor file (bad magic)");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported tensor version ${version}`);
  }
  const ndim = buf.readUInt32LE(8);
  if (ndim < 1) {
    throw new Error("tensor needs at least one dimension");
  }
  const header = 12 + 8 * ndim;
  if (buf.length < header) {
    throw new Error("tensor file truncated inside the dimension list");
  }
  const dims: number[] = [];
  let count = 1;
  for (let i = 0; i < ndim; i++) {
    const d = buf.readBigUInt64LE(12 + 8 * i);
    if (d > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new Error(`dimension ${d} is too large`);
    }
    dims.push(Number(d));
    count *= Number(d);
  }
  if (buf.length !== header + 4 * count) {
    throw new Error(
      `payload is ${buf.length - header} bytes, dims say ${4 * count}`,
    );
  }
  const view = new DataView(buf.buffer, buf.byteOffset + header);
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = view.getFloat32(4 * i, true);
  }
  return { dims, data };
}
