#!/usr/bin/env node
/**
 * visionts-convert --src <checkpoint> --dst <archive> --variant base|large|huge
 *                  [--pixel-targets true|false] [--mapping <json>] [--variants <json>]
 *                  [--expect-source-checksum sha256:<hex>] [--verify]
 *
 * Exit codes: 0 success, 1 usage, 2 conversion failure.
 */

import { resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { ConversionError, convert, verifyRoundTrip } from "./convert.js";

function parseArgs(argv: string[]): Map<string, string | boolean> {
  const args = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (key === "verify") {
      args.set(key, true);
      continue;
    }
    const value = argv[++i];
    if (value === undefined) throw new Error(`missing value for --${key}`);
    args.set(key, value);
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Map<string, string | boolean>;
  try {
    args = parseArgs(argv);
    for (const name of ["src", "dst", "variant"]) {
      if (!args.has(name)) throw new Error(`--${name} is required`);
    }
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(
      "usage: visionts-convert --src <checkpoint> --dst <archive> --variant base|large|huge " +
        "[--pixel-targets true|false] [--mapping <json>] [--variants <json>] " +
        "[--expect-source-checksum sha256:<hex>] [--verify]",
    );
    return 1;
  }
  const opts = {
    src: String(args.get("src")),
    dst: String(args.get("dst")),
    variant: String(args.get("variant")),
    pixelTargets: args.has("pixel-targets") ? args.get("pixel-targets") === "true" : undefined,
    mappingPath: args.has("mapping") ? String(args.get("mapping")) : undefined,
    variantsPath: args.has("variants") ? String(args.get("variants")) : undefined,
    expectSourceChecksum: args.has("expect-source-checksum")
      ? String(args.get("expect-source-checksum"))
      : undefined,
  };
  try {
    const manifest = convert(opts);
    console.log(
      `wrote ${opts.dst}: ${manifest.param_count.toLocaleString("en-US")} parameters, ` +
        `archive ${manifest.archive_checksum}`,
    );
    if (args.get("verify")) {
      const checked = verifyRoundTrip(opts);
      console.log(`verified ${checked} tensors bit-identical to the source`);
    }
    return 0;
  } catch (err) {
    if (err instanceof ConversionError) {
      console.error(`ConversionError: ${err.message}`);
    } else {
      console.error(String(err instanceof Error ? err.message : err));
    }
    return 2;
  }
}

if (process.argv[1] && resolve(process.argv[1]) === fileURLToPath(import.meta.url)) {
  process.exit(main(process.argv.slice(2)));
}
