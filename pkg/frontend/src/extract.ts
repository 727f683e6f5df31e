import { writeFileSync } from "node:fs";

import { InvalidInput, TokenizationError } from "./errors.js";
import type { MaskedLM, TruncationEvent } from "./model.js";
import { truncateLeft } from "./model.js";
import type { PromptSpec, SplitExample } from "./prompt.js";
import { buildDemoParts, labelOrder, validatePromptSpec } from "./prompt.js";
import { deriveRng } from "./rng.js";
import { buildSchedules, checkCoverage } from "./sampling.js";

export const FORMAT_VERSION = 1;

export interface ExtractOptions {
  /** Shots per class; also the number of demonstration samplings per example. */
  k: number;
  seed: number;
  /** Shuffle demonstration order per variant instead of fixed label order. */
  shuffleDemoOrder?: boolean;
}

export interface ExtractResult {
  /** Header line plus one line per instance, ready to join with newlines. */
  lines: string[];
  truncations: TruncationEvent[];
}

function assertFinite(values: Float64Array, what: string): void {
  for (const v of values) {
    if (!Number.isFinite(v)) {
      throw new InvalidInput(`${what} contains a non-finite value`);
    }
  }
}

function validateExamples(
  examples: readonly SplitExample[],
  labels: readonly string[],
  k: number,
): void {
  const ids = new Set<string>();
  const counts = { train: new Map<string, number>(), dev: new Map<string, number>() };
  for (const ex of examples) {
    if (ids.has(ex.id)) {
      throw new InvalidInput(`duplicate example id ${ex.id}`);
    }
    ids.add(ex.id);
    if (ex.split !== "train" && ex.split !== "dev" && ex.split !== "test") {
      throw new InvalidInput(`example ${ex.id} has unknown split ${JSON.stringify(ex.split)}`);
    }
    if (ex.label != null && !labels.includes(ex.label)) {
      throw new InvalidInput(`example ${ex.id} has label ${JSON.stringify(ex.label)} outside the label set`);
    }
    if (ex.split === "train" || ex.split === "dev") {
      if (ex.label == null) {
        throw new InvalidInput(`${ex.split} example ${ex.id} must carry a label`);
      }
      const per = counts[ex.split];
      per.set(ex.label, (per.get(ex.label) ?? 0) + 1);
    }
  }
  // The reader insists on exactly k labeled examples per class in both
  // supervised splits, so fail here instead of writing a rejected file.
  for (const split of ["train", "dev"] as const) {
    for (const label of labels) {
      const n = counts[split].get(label) ?? 0;
      if (n !== k) {
        throw new InvalidInput(
          `${split} split has ${n} examples of label ${JSON.stringify(label)}, expected exactly ${k}`,
        );
      }
    }
  }
}

/**
 * Run the full pipeline: validate, build sampling schedules, encode every
 * (example, sampling) concatenation, and serialize a representation file.
 * Deterministic given (model name, options); rerunning yields identical
 * lines.
 */
export function extract(
  examples: readonly SplitExample[],
  spec: PromptSpec,
  model: MaskedLM,
  options: ExtractOptions,
): ExtractResult {
  validatePromptSpec(spec);
  const labels = labelOrder(spec);
  if (labels.length < 2) {
    throw new InvalidInput("representation files need at least two labels");
  }
  for (const label of labels) {
    const word = spec.verbalizers[label]!;
    if (!model.isSingleToken(word)) {
      throw new TokenizationError(
        `verbalizer ${JSON.stringify(word)} for label ${JSON.stringify(label)} is not a single vocabulary token`,
      );
    }
  }
  validateExamples(examples, labels, options.k);
  const schedules = buildSchedules(examples, labels, options.k, options.seed);
  checkCoverage(schedules, examples, labels);

  const byId = new Map(examples.map((ex) => [ex.id, ex]));
  const verbalizerWords = labels.map((l) => spec.verbalizers[l]!);
  const truncations: TruncationEvent[] = [];
  const lines: string[] = [
    JSON.stringify({
      format_version: FORMAT_VERSION,
      dim: model.hiddenSize,
      labels,
      k_shots: options.k,
    }),
  ];

  for (const ex of examples) {
    const schedule = schedules.get(ex.id)!;
    const variants = schedule.map((demoIds, j) => {
      let demos = demoIds.map((id) => byId.get(id)!);
      if (options.shuffleDemoOrder) {
        demos = deriveRng(options.seed, "order", ex.id, j).shuffled(demos);
      }
      const parts = buildDemoParts(ex, demos, spec);
      const { text, droppedTokens } = truncateLeft(model, parts.demoParts, parts.queryPart, parts.separator);
      if (droppedTokens > 0) {
        truncations.push({ instanceId: ex.id, variantIndex: j, droppedTokens });
      }
      const hidden = model.maskHiddenState(text);
      if (hidden.length !== model.hiddenSize) {
        throw new InvalidInput(`model returned a hidden state of length ${hidden.length}, declared ${model.hiddenSize}`);
      }
      const logits = model.verbalizerLogits(hidden, verbalizerWords);
      assertFinite(hidden, `${ex.id} embedding`);
      assertFinite(logits, `${ex.id} logits`);
      return { embedding: Array.from(hidden), plm_logits: Array.from(logits) };
    });
    lines.push(
      JSON.stringify({ id: ex.id, split: ex.split, label: ex.label ?? null, variants }),
    );
  }
  return { lines, truncations };
}

export function writeRepresentationFile(path: string, result: ExtractResult): void {
  writeFileSync(path, result.lines.join("\n") + "\n");
}
