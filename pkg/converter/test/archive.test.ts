import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { canonicalJson, readArchive, writeArchive, Tensor } from "../src/archive.js";
import { IMAGENET_MEAN, IMAGENET_STD } from "../src/variants.js";
import { randomData } from "./helpers.js";

const dir = mkdtempSync(join(tmpdir(), "archive-"));

function sampleTensors(): Map<string, Tensor> {
  return new Map<string, Tensor>([
    ["b.second", { shape: [2, 3], data: randomData(6, 7) }],
    ["a.first", { shape: [4], data: randomData(4, 9) }],
  ]);
}

function manifestFor(tensors: Map<string, Tensor>) {
  let count = 0;
  for (const t of tensors.values()) count += t.data.length;
  return {
    encoder_dim: 8, encoder_depth: 1, encoder_heads: 2,
    decoder_dim: 4, decoder_depth: 1, decoder_heads: 2,
    patch_size: 16, grid_side: 14, mlp_ratio: 4.0,
    pixel_targets: true,
    channel_mean: IMAGENET_MEAN, channel_std: IMAGENET_STD,
    param_count: count,
  };
}

describe("tensor archive", () => {
  it("round-trips tensors and manifest", () => {
    const tensors = sampleTensors();
    const path = join(dir, "roundtrip.tensors");
    const written = writeArchive(path, tensors, manifestFor(tensors));
    expect(written.checksum).toMatch(/^sha256:[0-9a-f]{64}$/);
    const loaded = readArchive(path);
    expect(loaded.manifest.checksum).toBe(written.checksum);
    expect([...loaded.tensors.keys()].sort()).toEqual(["a.first", "b.second"]);
    for (const [name, tensor] of tensors) {
      expect(Array.from(loaded.tensors.get(name)!.data)).toEqual(Array.from(tensor.data));
    }
  });

  it("is byte-deterministic regardless of insertion order", () => {
    const tensors = sampleTensors();
    const reversed = new Map([...tensors.entries()].reverse());
    const a = join(dir, "order-a.tensors");
    const b = join(dir, "order-b.tensors");
    writeArchive(a, tensors, manifestFor(tensors));
    writeArchive(b, reversed, manifestFor(tensors));
    expect(readFileSync(a).equals(readFileSync(b))).toBe(true);
  });

  it("rejects tampered payloads", () => {
    const tensors = sampleTensors();
    const path = join(dir, "tampered.tensors");
    writeArchive(path, tensors, manifestFor(tensors));
    const blob = readFileSync(path);
    blob[blob.length - 1] ^= 0xff;
    writeFileSync(path, blob);
    expect(() => readArchive(path)).toThrow(/checksum/);
  });

  it("rejects a wrong parameter count", () => {
    const tensors = sampleTensors();
    const manifest = { ...manifestFor(tensors), param_count: 1 };
    expect(() => writeArchive(join(dir, "bad.tensors"), tensors, manifest)).toThrow(/parameters/);
  });

  it("canonical json sorts keys recursively", () => {
    expect(canonicalJson({ b: 1, a: { d: [2, { z: 1, y: 0 }], c: true } })).toBe(
      '{"a":{"c":true,"d":[2,{"y":0,"z":1}]},"b":1}',
    );
  });
});
