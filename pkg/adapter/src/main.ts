#!/usr/bin/env node
/**
 * CLI entry: `node dist/main.js <echo|blur|threshold> [flags]`.
 *
 * Flags: --channels N, --out-channels N, --rank 2|3, --max-batch N,
 * --sigma S[,S,S] (blur), --t T (threshold); fault injection for tests:
 * --hello-version N, --wrong-shape, --die-after N.
 */

import { ModelDecl, blurModel, echoModel, thresholdModel } from "./models";
import { serve } from "./serve";

function parseArgs(argv: string[]) {
  const positional: string[] = [];
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const name = arg.slice(2);
      const next = argv[i + 1];
      if (next !== undefined && !next.startsWith("--")) {
        flags.set(name, next);
        i += 1;
      } else {
        flags.set(name, true);
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

function numberFlag(flags: Map<string, string | boolean>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined || raw === true) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new Error(`--${name} needs a number, got ${raw}`);
  return value;
}

function main(argv: string[]): void {
  const { positional, flags } = parseArgs(argv);
  const kind = positional[0] ?? "echo";
  const decl: ModelDecl = {
    maxBatch: numberFlag(flags, "max-batch", 8),
    inChannels: numberFlag(flags, "channels", 1),
    outChannels: numberFlag(flags, "out-channels", numberFlag(flags, "channels", 1)),
    spatialRank: numberFlag(flags, "rank", 2),
  };

  let model;
  if (kind === "echo") {
    model = echoModel(decl);
  } else if (kind === "blur") {
    const raw = String(flags.get("sigma") ?? "1.0");
    let sigma = raw.split(",").map(Number);
    if (sigma.length === 1) sigma = new Array(decl.spatialRank).fill(sigma[0]);
    model = blurModel(sigma, decl);
  } else if (kind === "threshold") {
    model = thresholdModel(numberFlag(flags, "t", 0.5), decl);
  } else {
    process.stderr.write(`unknown model ${kind}; use echo|blur|threshold\n`);
    process.exit(2);
  }

  serve(model, {
    helloVersion: flags.has("hello-version")
      ? numberFlag(flags, "hello-version", 1)
      : undefined,
    wrongShape: flags.get("wrong-shape") === true,
    dieAfter: flags.has("die-after") ? numberFlag(flags, "die-after", 0) : undefined,
  });
}

main(process.argv.slice(2));
