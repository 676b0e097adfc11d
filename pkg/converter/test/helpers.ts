/** Synthetic upstream checkpoints for conversion tests. */

import { writeFileSync } from "node:fs";

import { canonicalJson } from "../src/archive.js";
import { VariantDims } from "../src/variants.js";

export const TINY_DIMS: VariantDims = {
  encoder_dim: 32,
  encoder_depth: 2,
  encoder_heads: 2,
  decoder_dim: 16,
  decoder_depth: 1,
  decoder_heads: 2,
  patch_size: 16,
  grid_side: 14,
  mlp_ratio: 4.0,
};

/** Deterministic pseudo-random floats (xorshift32 mapped to [-0.5, 0.5)). */
export function randomData(length: number, seed: number): Float32Array {
  const out = new Float32Array(length);
  let state = seed >>> 0 || 1;
  for (let i = 0; i < length; i++) {
    state ^= state << 13;
    state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5;
    state >>>= 0;
    out[i] = state / 2 ** 32 - 0.5;
  }
  return out;
}

function blockTensors(prefix: string, dim: number, ratio: number): Array<[string, number[]]> {
  const hidden = Math.floor(dim * ratio);
  return [
    [`${prefix}.norm1.weight`, [dim]],
    [`${prefix}.norm1.bias`, [dim]],
    [`${prefix}.attn.qkv.weight`, [3 * dim, dim]],
    [`${prefix}.attn.qkv.bias`, [3 * dim]],
    [`${prefix}.attn.proj.weight`, [dim, dim]],
    [`${prefix}.attn.proj.bias`, [dim]],
    [`${prefix}.norm2.weight`, [dim]],
    [`${prefix}.norm2.bias`, [dim]],
    [`${prefix}.mlp.fc1.weight`, [hidden, dim]],
    [`${prefix}.mlp.fc1.bias`, [hidden]],
    [`${prefix}.mlp.fc2.weight`, [dim, hidden]],
    [`${prefix}.mlp.fc2.bias`, [dim]],
  ];
}

/** Tensor names and shapes as the upstream serialization lays them out. */
export function upstreamShapes(dims: VariantDims): Array<[string, number[]]> {
  const d = dims.encoder_dim;
  const dd = dims.decoder_dim;
  const tokens = dims.grid_side * dims.grid_side + 1;
  const pv = dims.patch_size * dims.patch_size * 3;
  const shapes: Array<[string, number[]]> = [
    ["cls_token", [1, 1, d]],
    ["pos_embed", [1, tokens, d]],
    ["patch_embed.proj.weight", [d, 3, dims.patch_size, dims.patch_size]],
    ["patch_embed.proj.bias", [d]],
  ];
  for (let i = 0; i < dims.encoder_depth; i++) shapes.push(...blockTensors(`blocks.${i}`, d, dims.mlp_ratio));
  shapes.push(["norm.weight", [d]], ["norm.bias", [d]]);
  shapes.push(["decoder_embed.weight", [dd, d]], ["decoder_embed.bias", [dd]]);
  shapes.push(["mask_token", [1, 1, dd]], ["decoder_pos_embed", [1, tokens, dd]]);
  for (let i = 0; i < dims.decoder_depth; i++) shapes.push(...blockTensors(`decoder_blocks.${i}`, dd, dims.mlp_ratio));
  shapes.push(["decoder_norm.weight", [dd]], ["decoder_norm.bias", [dd]]);
  shapes.push(["decoder_pred.weight", [pv, dd]], ["decoder_pred.bias", [pv]]);
  return shapes;
}

export interface SourceTensor {
  shape: number[];
  data: Float32Array;
}

export function syntheticSourceTensors(dims: VariantDims, seed = 42): Map<string, SourceTensor> {
  const tensors = new Map<string, SourceTensor>();
  let salt = seed;
  for (const [name, shape] of upstreamShapes(dims)) {
    const length = shape.reduce((a, b) => a * b, 1);
    tensors.set(name, { shape, data: randomData(length, (salt += 17)) });
  }
  return tensors;
}

/** Serialize tensors in the upstream checkpoint layout. */
export function writeSourceCheckpoint(path: string, tensors: Map<string, SourceTensor>): void {
  const header: Record<string, unknown> = {};
  let offset = 0;
  const buffers: Buffer[] = [];
  for (const [name, tensor] of tensors) {
    const raw = Buffer.from(tensor.data.buffer, tensor.data.byteOffset, tensor.data.byteLength);
    header[name] = { dtype: "F32", shape: tensor.shape, data_offsets: [offset, offset + raw.length] };
    buffers.push(raw);
    offset += raw.length;
  }
  const headerBytes = Buffer.from(canonicalJson(header), "utf-8");
  const prefix = Buffer.alloc(8);
  prefix.writeBigUInt64LE(BigInt(headerBytes.length));
  writeFileSync(path, Buffer.concat([prefix, headerBytes, ...buffers]));
}
