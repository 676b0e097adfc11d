/**
 * Format contract, opposite direction: an archive written by the python
 * package must parse under this package's reader with consistent manifest,
 * shapes, and checksum. Skips when the python environment is unavailable.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { readArchive, tensorLength } from "../src/archive.js";

const dir = mkdtempSync(join(tmpdir(), "crosswriter-"));

function writeWithPython(path: string): boolean {
  const script = [
    "import sys",
    "from visionts.testing import write_random_archive",
    `write_random_archive(${JSON.stringify(path)}, seed=5)`,
  ].join("\n");
  return spawnSync("python3", ["-c", script], { encoding: "utf-8" }).status === 0;
}

const archivePath = join(dir, "python-written.tensors");
const available = writeWithPython(archivePath);

describe("python-written archives", () => {
  it.skipIf(!available)("parse with consistent manifest and payload", () => {
    const { tensors, manifest } = readArchive(archivePath);
    expect(manifest.pixel_targets).toBe(true);
    expect(manifest.grid_side * manifest.patch_size).toBe(224);
    let total = 0;
    for (const [name, tensor] of tensors) {
      expect(tensor.data.length).toBe(tensorLength(tensor.shape));
      expect(name).toMatch(/^(encoder|decoder)\./);
      total += tensor.data.length;
    }
    expect(total).toBe(manifest.param_count);
    expect(tensors.get("decoder.mask_token")!.shape).toEqual([manifest.decoder_dim]);
  });
});
