/**
 * Reader for the upstream checkpoint serialization (safetensors): an 8-byte
 * little-endian header length, a JSON table of tensor name -> {dtype,
 * shape, data_offsets}, and a raw payload. Values are normalized to
 * float32 on read; F32 data passes through bit-identically.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export interface SourceEntry {
  dtype: string;
  shape: number[];
  data_offsets: [number, number];
}

export class SourceCheckpoint {
  readonly entries: Map<string, SourceEntry>;
  readonly checksum: string;
  private readonly payload: Buffer;

  constructor(path: string) {
    const blob = readFileSync(path);
    if (blob.length < 8) throw new Error(`source checkpoint too short: ${path}`);
    const headerLen = Number(blob.readBigUInt64LE(0));
    const header = JSON.parse(blob.subarray(8, 8 + headerLen).toString("utf-8"));
    delete header["__metadata__"];
    this.entries = new Map(Object.entries(header)) as Map<string, SourceEntry>;
    this.payload = blob.subarray(8 + headerLen);
    this.checksum = "sha256:" + createHash("sha256").update(blob).digest("hex");
  }

  names(): string[] {
    return [...this.entries.keys()];
  }

  shape(name: string): number[] {
    const entry = this.entries.get(name);
    if (!entry) throw new Error(`source tensor ${name} not found`);
    return entry.shape;
  }

  /** Tensor values normalized to float32. */
  read(name: string): Float32Array {
    const entry = this.entries.get(name);
    if (!entry) throw new Error(`source tensor ${name} not found`);
    const [begin, end] = entry.data_offsets;
    const raw = new Uint8Array(end - begin);
    raw.set(this.payload.subarray(begin, end));
    const view = new DataView(raw.buffer);
    switch (entry.dtype) {
      case "F32":
        return new Float32Array(raw.buffer);
      case "F64": {
        const doubles = new Float64Array(raw.buffer);
        return Float32Array.from(doubles);
      }
      case "F16": {
        const out = new Float32Array(raw.byteLength / 2);
        for (let i = 0; i < out.length; i++) out[i] = halfToFloat(view.getUint16(2 * i, true));
        return out;
      }
      case "BF16": {
        const out = new Float32Array(raw.byteLength / 2);
        const scratch = new DataView(new ArrayBuffer(4));
        for (let i = 0; i < out.length; i++) {
          scratch.setUint32(0, view.getUint16(2 * i, true) << 16, true);
          out[i] = scratch.getFloat32(0, true);
        }
        return out;
      }
      default:
        throw new Error(`source tensor ${name} has unsupported dtype ${entry.dtype}`);
    }
  }
}

function halfToFloat(bits: number): number {
  const sign = (bits & 0x8000) ? -1 : 1;
  const exponent = (bits >> 10) & 0x1f;
  const fraction = bits & 0x3ff;
  if (exponent === 0) return sign * fraction * 2 ** -24;
  if (exponent === 0x1f) return fraction ? Number.NaN : sign * Infinity;
  return sign * (1 + fraction / 1024) * 2 ** (exponent - 15);
}
