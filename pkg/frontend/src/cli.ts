#!/usr/bin/env node
/** Thin CLI: read a pipeline CSV, render one panel, write the SVG. */

import { readFileSync, writeFileSync } from "node:fs";
import { render, Panel } from "./render.js";
import { SchemaError } from "./csv.js";

const USAGE = "usage: scorelab-figures render --panel <signal|width|windows|coupling> --in <file.csv> [--out <file.svg>]";

function parseArgs(argv: string[]): { panel: Panel; input: string; output: string } {
  if (argv[0] !== "render") throw new Error(USAGE);
  const opts = new Map<string, string>();
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const val = argv[i + 1];
    if (!key.startsWith("--") || val === undefined) throw new Error(USAGE);
    opts.set(key.slice(2), val);
  }
  const panel = opts.get("panel");
  const input = opts.get("in");
  if (panel === undefined || input === undefined) throw new Error(USAGE);
  if (!["signal", "width", "windows", "coupling"].includes(panel)) {
    throw new Error(`unknown panel '${panel}'`);
  }
  return { panel: panel as Panel, input, output: opts.get("out") ?? `${panel}.svg` };
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(args.input, "utf-8");
  } catch (err) {
    console.error(`error: cannot read ${args.input}: ${(err as Error).message}`);
    return 1;
  }
  try {
    writeFileSync(args.output, render(args.panel, text), "utf-8");
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`error: ${args.input}: ${err.message}`);
      return 1;
    }
    throw err;
  }
  console.log(`wrote ${args.output}`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
