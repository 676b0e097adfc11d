/**
 * One-shot conversion from an upstream checkpoint to the tensor archive.
 *
 * The name mapping is data (data/mapping_original.json): entries with an
 * {i} placeholder expand over the encoder/decoder depth. Three value-
 * preserving transforms exist; everything else is a straight copy.
 * Every archive tensor must trace to exactly one source tensor, every
 * source tensor must be consumed, and all shapes are validated against
 * the variant's architecture before anything is written.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { ArchiveManifest, Tensor, readArchive, writeArchive } from "./archive.js";
import { SourceCheckpoint } from "./safetensors.js";
import {
  IMAGENET_MEAN,
  IMAGENET_STD,
  VariantDims,
  expectedShapes,
  loadVariants,
  optionalShapes,
} from "./variants.js";

export class ConversionError extends Error {}

export interface MappingEntry {
  source: string;
  target: string;
  transform?: "flatten" | "drop_leading_one" | "conv_to_patch_vector";
}

export interface ConversionManifest {
  variant: string;
  dims: VariantDims;
  pixel_targets: boolean;
  param_count: number;
  source_checksum: string;
  archive_checksum: string;
  mapping: Record<string, string>; // archive name -> source name
}

export interface ConvertOptions {
  src: string;
  dst: string;
  variant: string;
  pixelTargets?: boolean;
  mappingPath?: string;
  variantsPath?: string;
  /** Explicit dims override (test hook; the variant name is still recorded). */
  dims?: VariantDims;
  /** Fail when the source file's checksum differs from this value. */
  expectSourceChecksum?: string;
}

const DEFAULT_MAPPING = fileURLToPath(new URL("../data/mapping_original.json", import.meta.url));

export function loadMapping(path: string = DEFAULT_MAPPING): MappingEntry[] {
  return JSON.parse(readFileSync(path, "utf-8"));
}

function expandMapping(entries: MappingEntry[], dims: VariantDims): MappingEntry[] {
  const expanded: MappingEntry[] = [];
  for (const entry of entries) {
    if (!entry.source.includes("{i}")) {
      expanded.push(entry);
      continue;
    }
    const depth = entry.target.startsWith("decoder.") ? dims.decoder_depth : dims.encoder_depth;
    for (let i = 0; i < depth; i++) {
      expanded.push({
        source: entry.source.replaceAll("{i}", String(i)),
        target: entry.target.replaceAll("{i}", String(i)),
        transform: entry.transform,
      });
    }
  }
  return expanded;
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** Apply a value-preserving layout transform; returns the archive tensor. */
export function applyTransform(
  entry: MappingEntry,
  shape: number[],
  data: Float32Array,
  dims: VariantDims,
): Tensor {
  switch (entry.transform) {
    case undefined:
      return { shape, data };
    case "flatten":
      return { shape: [data.length], data };
    case "drop_leading_one": {
      if (shape[0] !== 1 || shape.length < 2) {
        throw new ConversionError(`${entry.source}: cannot drop leading axis of shape [${shape}]`);
      }
      return { shape: shape.slice(1), data };
    }
    case "conv_to_patch_vector": {
      // (D, 3, S, S) -> (D, S*S*3): pixel position row-major, channel minor.
      const [d, channels, s1, s2] = shape;
      if (shape.length !== 4 || channels !== 3 || s1 !== dims.patch_size || s2 !== dims.patch_size) {
        throw new ConversionError(
          `${entry.source}: expected shape [D, 3, ${dims.patch_size}, ${dims.patch_size}], got [${shape}]`,
        );
      }
      const s = dims.patch_size;
      const out = new Float32Array(data.length);
      for (let di = 0; di < d; di++) {
        const base = di * 3 * s * s;
        for (let c = 0; c < 3; c++) {
          for (let p = 0; p < s; p++) {
            for (let q = 0; q < s; q++) {
              out[base + (p * s + q) * 3 + c] = data[base + (c * s + p) * s + q];
            }
          }
        }
      }
      return { shape: [d, s * s * 3], data: out };
    }
    default:
      throw new ConversionError(`${entry.source}: unknown transform ${entry.transform}`);
  }
}

export function convert(opts: ConvertOptions): ConversionManifest {
  const variants = loadVariants(opts.variantsPath);
  const dims = opts.dims ?? variants[opts.variant];
  if (!dims) {
    throw new ConversionError(
      `unknown variant ${opts.variant}; known: ${Object.keys(variants).join(", ")}`,
    );
  }
  const source = new SourceCheckpoint(opts.src);
  if (opts.expectSourceChecksum && source.checksum !== opts.expectSourceChecksum) {
    throw new ConversionError(
      `source checksum mismatch: file ${source.checksum}, expected ${opts.expectSourceChecksum}`,
    );
  }

  const mapping = expandMapping(loadMapping(opts.mappingPath), dims);
  const required = expectedShapes(dims);
  const optional = optionalShapes(dims);
  const consumed = new Set<string>();
  const tensors = new Map<string, Tensor>();
  const resolved: Record<string, string> = {};
  const missing: string[] = [];

  for (const entry of mapping) {
    if (!source.entries.has(entry.source)) {
      // position tables are the only tensors some checkpoints omit
      if (optional.has(entry.target)) continue;
      missing.push(entry.source);
      continue;
    }
    if (tensors.has(entry.target)) {
      throw new ConversionError(`archive tensor ${entry.target} produced twice`);
    }
    const tensor = applyTransform(entry, source.shape(entry.source), source.read(entry.source), dims);
    const expected = required.get(entry.target) ?? optional.get(entry.target);
    if (!expected) {
      throw new ConversionError(`mapping target ${entry.target} is not an architecture tensor`);
    }
    if (!shapesEqual(tensor.shape, expected)) {
      throw new ConversionError(
        `${entry.target}: shape [${tensor.shape}] does not match the ${opts.variant} ` +
          `architecture [${expected}] (source ${entry.source})`,
      );
    }
    tensors.set(entry.target, tensor);
    consumed.add(entry.source);
    resolved[entry.target] = entry.source;
  }
  if (missing.length) {
    throw new ConversionError(`source is missing mapped tensors: ${missing.join(", ")}`);
  }
  const unmapped = source.names().filter((name) => !consumed.has(name));
  if (unmapped.length) {
    throw new ConversionError(`unmapped source tensors: ${unmapped.join(", ")}`);
  }
  for (const name of required.keys()) {
    if (!tensors.has(name)) {
      throw new ConversionError(`mapping produced no tensor for ${name}`);
    }
  }

  let paramTotal = 0;
  for (const tensor of tensors.values()) paramTotal += tensor.data.length;
  const manifest: Omit<ArchiveManifest, "checksum"> = {
    ...dims,
    pixel_targets: opts.pixelTargets ?? true,
    channel_mean: IMAGENET_MEAN,
    channel_std: IMAGENET_STD,
    param_count: paramTotal,
  };
  const written = writeArchive(opts.dst, tensors, manifest);

  const conversion: ConversionManifest = {
    variant: opts.variant,
    dims,
    pixel_targets: written.pixel_targets,
    param_count: written.param_count,
    source_checksum: source.checksum,
    archive_checksum: written.checksum,
    mapping: resolved,
  };
  writeFileSync(opts.dst + ".manifest.json", JSON.stringify(conversion, null, 2) + "\n");
  return conversion;
}

/**
 * Re-derive every archive tensor from the source and require bit identity.
 * Throws on the first mismatch; returns the number of tensors checked.
 */
export function verifyRoundTrip(opts: ConvertOptions): number {
  const variants = loadVariants(opts.variantsPath);
  const dims = opts.dims ?? variants[opts.variant];
  const source = new SourceCheckpoint(opts.src);
  const { tensors } = readArchive(opts.dst);
  const mapping = expandMapping(loadMapping(opts.mappingPath), dims);
  let checked = 0;
  for (const entry of mapping) {
    if (!source.entries.has(entry.source)) continue;
    const derived = applyTransform(entry, source.shape(entry.source), source.read(entry.source), dims);
    const stored = tensors.get(entry.target);
    if (!stored) throw new ConversionError(`archive lacks ${entry.target}`);
    const a = Buffer.from(stored.data.buffer, stored.data.byteOffset, stored.data.byteLength);
    const b = Buffer.from(derived.data.buffer, derived.data.byteOffset, derived.data.byteLength);
    if (!a.equals(b)) {
      throw new ConversionError(`tensor ${entry.target} differs from source ${entry.source}`);
    }
    checked += 1;
  }
  return checked;
}
