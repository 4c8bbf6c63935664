#!/usr/bin/env node
/** Command line wrapper: one subcommand per figure kind. */

import fs from "node:fs";
import path from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { RunFilter } from "./csv.js";
import { FigureResult, biasBars, decayCompare, keepprobCurves } from "./figures.js";

function writeFigure(result: FigureResult, out: string, dumpJson?: string): void {
  if (path.extname(out).toLowerCase() !== ".svg") {
    throw new Error(`only .svg output is supported, got ${out}`);
  }
  fs.mkdirSync(path.dirname(path.resolve(out)), { recursive: true });
  fs.writeFileSync(out, result.svg);
  console.log(`wrote ${out}`);
  if (dumpJson) {
    fs.writeFileSync(dumpJson, JSON.stringify(result.dump, null, 2) + "\n");
    console.log(`wrote ${dumpJson}`);
  }
}

function numberList(raw: string, flag: string): number[] {
  const values = raw
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part.length > 0)
    .map(Number);
  if (values.length === 0 || values.some((v) => !Number.isFinite(v))) {
    throw new Error(`${flag} wants a comma-separated number list, got "${raw}"`);
  }
  return values;
}

interface CommonArgs {
  out: string;
  "dump-json"?: string;
  lambda?: number;
  beta?: number;
}

function filterOf(argv: CommonArgs & { stage?: string }): RunFilter {
  const filter: RunFilter = {};
  if (argv.lambda !== undefined) filter.lambda = argv.lambda;
  if (argv.beta !== undefined) filter.beta = argv.beta;
  if (argv.stage !== undefined) filter.stage = argv.stage;
  return filter;
}

export function main(args: string[]): number {
  try {
    yargs(args)
      .scriptName("bislab-plots")
      .option("out", { type: "string", demandOption: true, describe: "output .svg path" })
      .option("dump-json", { type: "string", describe: "also write every plotted value as JSON" })
      .command(
        "bias_bars <csv>",
        "grouped per-class recall/precision bars from a per_class.csv",
        (y) =>
          y
            .positional("csv", { type: "string", demandOption: true })
            .option("lambda", { type: "number", describe: "keep only runs with this imbalance ratio" })
            .option("beta", { type: "number", describe: "keep only runs with this unlabeled ratio" })
            .option("stage", { type: "string", choices: ["joint", "bis"] as const }),
        (argv) => {
          writeFigure(biasBars(argv.csv as string, filterOf(argv)), argv.out, argv["dump-json"]);
        },
      )
      .command(
        "decay_compare <csv>",
        "alpha schedules next to blended-run accuracy from a summary.csv",
        (y) =>
          y
            .positional("csv", { type: "string", demandOption: true })
            .option("lambda", { type: "number" })
            .option("beta", { type: "number" }),
        (argv) => {
          writeFigure(decayCompare(argv.csv as string, filterOf(argv)), argv.out, argv["dump-json"]);
        },
      )
      .command(
        "keepprob_curves",
        "analytic per-class keep probabilities mu^q",
        (y) =>
          y
            .option("counts", {
              type: "string",
              demandOption: true,
              describe: "labeled per-class counts, e.g. 100,47,22,11,5",
            })
            .option("q", { type: "string", default: "0,0.5,1", describe: "comma-separated q values" }),
        (argv) => {
          const counts = numberList(argv.counts, "--counts");
          const qList = numberList(argv.q, "--q");
          writeFigure(keepprobCurves(qList, counts), argv.out, argv["dump-json"]);
        },
      )
      .demandCommand(1, "pick a figure kind")
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseSync();
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("cli.ts")) {
  process.exit(main(hideBin(process.argv)));
}
