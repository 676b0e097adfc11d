/**
 * Architecture dimensions per released backbone size, plus the expected
 * tensor-shape table the loader validates against. Dimension data lives
 * in data/variants.json so new sizes need no code change.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

export interface VariantDims {
  encoder_dim: number;
  encoder_depth: number;
  encoder_heads: number;
  decoder_dim: number;
  decoder_depth: number;
  decoder_heads: number;
  patch_size: number;
  grid_side: number;
  mlp_ratio: number;
}

export const IMAGENET_MEAN = [0.485, 0.456, 0.406];
export const IMAGENET_STD = [0.229, 0.224, 0.225];

const VARIANTS_PATH = fileURLToPath(new URL("../data/variants.json", import.meta.url));

export function loadVariants(path: string = VARIANTS_PATH): Record<string, VariantDims> {
  return JSON.parse(readFileSync(path, "utf-8"));
}

function blockShapes(prefix: string, dim: number, hidden: number): Map<string, number[]> {
  return new Map<string, number[]>([
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
  ]);
}

/** Required archive tensors for an architecture (position tables are optional extras). */
export function expectedShapes(dims: VariantDims): Map<string, number[]> {
  const d = dims.encoder_dim;
  const dd = dims.decoder_dim;
  const pv = dims.patch_size * dims.patch_size * 3;
  const shapes = new Map<string, number[]>([
    ["encoder.cls_token", [d]],
    ["encoder.patch_embed.weight", [d, pv]],
    ["encoder.patch_embed.bias", [d]],
    ["encoder.norm.weight", [d]],
    ["encoder.norm.bias", [d]],
    ["decoder.embed.weight", [dd, d]],
    ["decoder.embed.bias", [dd]],
    ["decoder.mask_token", [dd]],
    ["decoder.norm.weight", [dd]],
    ["decoder.norm.bias", [dd]],
    ["decoder.pred.weight", [pv, dd]],
    ["decoder.pred.bias", [pv]],
  ]);
  for (let i = 0; i < dims.encoder_depth; i++) {
    for (const [k, v] of blockShapes(`encoder.blocks.${i}`, d, Math.floor(d * dims.mlp_ratio))) shapes.set(k, v);
  }
  for (let i = 0; i < dims.decoder_depth; i++) {
    for (const [k, v] of blockShapes(`decoder.blocks.${i}`, dd, Math.floor(dd * dims.mlp_ratio))) shapes.set(k, v);
  }
  return shapes;
}

export function optionalShapes(dims: VariantDims): Map<string, number[]> {
  const tokens = dims.grid_side * dims.grid_side + 1;
  return new Map<string, number[]>([
    ["encoder.pos_embed", [tokens, dims.encoder_dim]],
    ["decoder.pos_embed", [tokens, dims.decoder_dim]],
  ]);
}

export function paramCount(dims: VariantDims, withPositionTables: boolean): number {
  let total = 0;
  for (const shape of expectedShapes(dims).values()) total += shape.reduce((a, b) => a * b, 1);
  if (withPositionTables) {
    for (const shape of optionalShapes(dims).values()) total += shape.reduce((a, b) => a * b, 1);
  }
  return total;
}
