import { readFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { ExtractorError } from "./errors.js";
import { extract, writeRepresentationFile } from "./extract.js";
import { SimulatedMaskedLM } from "./model.js";
import type { PromptSpec, SplitExample } from "./prompt.js";
import { sampleSentimentTask } from "./sample.js";

const USAGE = `usage: extractor (--data task.json | --sample-task) --out reps.jsonl
                 [--k 16] [--seed 0] [--n-test 200] [--hidden 64]
                 [--max-seq 512] [--model-name sim-mlm] [--shuffle-demos]

--data points at JSON {"spec": {...}, "examples": [...]}; --sample-task uses
the built-in deterministic sentiment sample instead.`;

interface Args {
  data?: string;
  sampleTask: boolean;
  out?: string;
  k: number;
  seed: number;
  nTest: number;
  hidden: number;
  maxSeq: number;
  modelName: string;
  shuffleDemos: boolean;
  help: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    sampleTask: false,
    k: 16,
    seed: 0,
    nTest: 200,
    hidden: 64,
    maxSeq: 512,
    modelName: "sim-mlm",
    shuffleDemos: false,
    help: false,
  };
  const takeValue = (flag: string, i: number): string => {
    const value = argv[i];
    if (value === undefined) {
      throw new ExtractorError(`${flag} needs a value`);
    }
    return value;
  };
  const takeInt = (flag: string, i: number): number => {
    const value = Number(takeValue(flag, i));
    if (!Number.isInteger(value)) {
      throw new ExtractorError(`${flag} needs an integer`);
    }
    return value;
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i]!;
    switch (flag) {
      case "--data": args.data = takeValue(flag, ++i); break;
      case "--sample-task": args.sampleTask = true; break;
      case "--out": args.out = takeValue(flag, ++i); break;
      case "--k": args.k = takeInt(flag, ++i); break;
      case "--seed": args.seed = takeInt(flag, ++i); break;
      case "--n-test": args.nTest = takeInt(flag, ++i); break;
      case "--hidden": args.hidden = takeInt(flag, ++i); break;
      case "--max-seq": args.maxSeq = takeInt(flag, ++i); break;
      case "--model-name": args.modelName = takeValue(flag, ++i); break;
      case "--shuffle-demos": args.shuffleDemos = true; break;
      case "--help": case "-h": args.help = true; break;
      default:
        throw new ExtractorError(`unknown flag ${flag}`);
    }
  }
  return args;
}

function loadTask(args: Args): { spec: PromptSpec; examples: SplitExample[] } {
  if (args.sampleTask === (args.data !== undefined)) {
    throw new ExtractorError("exactly one of --data and --sample-task is required");
  }
  if (args.sampleTask) {
    return sampleSentimentTask(args.k, args.nTest, args.seed);
  }
  const parsed: unknown = JSON.parse(readFileSync(args.data!, "utf8"));
  if (typeof parsed !== "object" || parsed === null || !("spec" in parsed) || !("examples" in parsed)) {
    throw new ExtractorError(`${args.data} must hold an object with "spec" and "examples"`);
  }
  const task = parsed as { spec: PromptSpec; examples: SplitExample[] };
  if (!Array.isArray(task.examples)) {
    throw new ExtractorError(`${args.data}: "examples" must be an array`);
  }
  return task;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    if (args.help) {
      console.log(USAGE);
      return 0;
    }
    if (args.out === undefined) {
      throw new ExtractorError("--out is required");
    }
    const { spec, examples } = loadTask(args);
    const model = new SimulatedMaskedLM({
      name: args.modelName,
      hiddenSize: args.hidden,
      maxSequenceLength: args.maxSeq,
    });
    const result = extract(examples, spec, model, {
      k: args.k,
      seed: args.seed,
      shuffleDemoOrder: args.shuffleDemos,
    });
    for (const t of result.truncations) {
      console.error(`warning: truncated ${t.droppedTokens} leading demonstration tokens for ${t.instanceId} variant ${t.variantIndex}`);
    }
    writeRepresentationFile(args.out, result);
    console.log(`wrote ${result.lines.length - 1} instances (dim ${args.hidden}, k ${args.k}) to ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof ExtractorError || err instanceof SyntaxError || (err as NodeJS.ErrnoException)?.code !== undefined) {
      console.error(`error: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(process.argv.slice(2));
}
