/**
 * Tensor archive writer/reader.
 *
 * Layout (little-endian): 8 bytes of unsigned 64-bit JSON header length,
 * then a UTF-8 JSON header mapping tensor name -> {dtype: "F32", shape,
 * data_offsets: [begin, end)} plus a "__metadata__" object carrying the
 * architecture manifest, then the raw float32 payload. Offsets are
 * relative to the payload start. Tensors are laid out in sorted name
 * order so identical inputs always produce byte-identical archives.
 */

import { createHash } from "node:crypto";
import { openSync, readFileSync, writeSync, closeSync } from "node:fs";

export interface ArchiveManifest {
  encoder_dim: number;
  encoder_depth: number;
  encoder_heads: number;
  decoder_dim: number;
  decoder_depth: number;
  decoder_heads: number;
  patch_size: number;
  grid_side: number;
  mlp_ratio: number;
  pixel_targets: boolean;
  channel_mean: number[];
  channel_std: number[];
  param_count: number;
  checksum: string;
}

export interface Tensor {
  shape: number[];
  data: Float32Array;
}

export function tensorLength(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

/** JSON with recursively sorted keys; the header must be deterministic. */
export function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
    return "{" + entries.join(",") + "}";
  }
  return JSON.stringify(value);
}

export function writeArchive(
  path: string,
  tensors: Map<string, Tensor>,
  manifest: Omit<ArchiveManifest, "checksum">,
): ArchiveManifest {
  const names = [...tensors.keys()].sort();
  const header: Record<string, unknown> = {};
  const hash = createHash("sha256");
  let offset = 0;
  let total = 0;
  const buffers: Buffer[] = [];
  for (const name of names) {
    const tensor = tensors.get(name)!;
    if (tensor.data.length !== tensorLength(tensor.shape)) {
      throw new Error(`tensor ${name} holds ${tensor.data.length} values for shape [${tensor.shape}]`);
    }
    const raw = Buffer.from(tensor.data.buffer, tensor.data.byteOffset, tensor.data.byteLength);
    header[name] = { dtype: "F32", shape: tensor.shape, data_offsets: [offset, offset + raw.length] };
    hash.update(raw);
    buffers.push(raw);
    offset += raw.length;
    total += tensor.data.length;
  }
  if (manifest.param_count !== total) {
    throw new Error(`manifest declares ${manifest.param_count} parameters, tensors hold ${total}`);
  }
  const full: ArchiveManifest = { ...manifest, checksum: "sha256:" + hash.digest("hex") };
  header["__metadata__"] = full;
  const headerBytes = Buffer.from(canonicalJson(header), "utf-8");
  const prefix = Buffer.alloc(8);
  prefix.writeBigUInt64LE(BigInt(headerBytes.length));

  const fd = openSync(path, "w");
  try {
    writeSync(fd, prefix);
    writeSync(fd, headerBytes);
    for (const raw of buffers) {
      writeSync(fd, raw);
    }
  } finally {
    closeSync(fd);
  }
  return full;
}

export interface LoadedArchive {
  tensors: Map<string, Tensor>;
  manifest: ArchiveManifest;
}

export function readArchive(path: string): LoadedArchive {
  const blob = readFileSync(path);
  if (blob.length < 8) throw new Error(`archive too short: ${path}`);
  const headerLen = Number(blob.readBigUInt64LE(0));
  const header = JSON.parse(blob.subarray(8, 8 + headerLen).toString("utf-8"));
  const manifest = header["__metadata__"] as ArchiveManifest;
  if (!manifest) throw new Error("archive header lacks __metadata__ manifest");
  delete header["__metadata__"];
  const payload = blob.subarray(8 + headerLen);
  const digest = "sha256:" + createHash("sha256").update(payload).digest("hex");
  if (manifest.checksum && manifest.checksum !== digest) {
    throw new Error(`payload checksum mismatch: manifest ${manifest.checksum}, file ${digest}`);
  }
  const tensors = new Map<string, Tensor>();
  for (const [name, entry] of Object.entries(header) as [string, any][]) {
    const [begin, end] = entry.data_offsets;
    const copy = new Uint8Array(end - begin);
    copy.set(payload.subarray(begin, end));
    tensors.set(name, { shape: entry.shape, data: new Float32Array(copy.buffer) });
  }
  return { tensors, manifest };
}
