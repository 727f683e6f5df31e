import { CoverageError, InvalidDemos, InvalidInput } from "./errors.js";
import type { SplitExample } from "./prompt.js";
import { deriveRng } from "./rng.js";

/** Per variant index, one demonstration id per label, in label order. */
export type Schedule = string[][];

export function trainPoolByLabel(
  examples: readonly SplitExample[],
  labels: readonly string[],
): Map<string, string[]> {
  const pools = new Map<string, string[]>(labels.map((l) => [l, []]));
  for (const ex of examples) {
    if (ex.split !== "train") continue;
    if (ex.label == null || !pools.has(ex.label)) {
      throw new InvalidInput(`train example ${ex.id} has label ${JSON.stringify(ex.label)} outside the label set`);
    }
    pools.get(ex.label)!.push(ex.id);
  }
  return pools;
}

/**
 * K demonstration samplings per example, without replacement per class: each
 * class slot across an example's variants is a seeded permutation of that
 * class's training pool. A training example is excluded from its own pool,
 * leaving K-1 distinct ids for K slots, so exactly one seeded repeat fills
 * the last slot; every other training example still appears.
 */
export function buildSchedules(
  examples: readonly SplitExample[],
  labels: readonly string[],
  k: number,
  seed: number,
): Map<string, Schedule> {
  if (!Number.isInteger(k) || k <= 0) {
    throw new InvalidInput(`k must be a positive integer, got ${k}`);
  }
  const pools = trainPoolByLabel(examples, labels);
  for (const [label, pool] of pools) {
    if (pool.length !== k) {
      throw new InvalidInput(
        `train split has ${pool.length} examples of label ${JSON.stringify(label)}, expected exactly ${k}`,
      );
    }
  }
  const schedules = new Map<string, Schedule>();
  for (const ex of examples) {
    const perLabel: string[][] = [];
    for (const label of labels) {
      const candidates = pools.get(label)!.filter((id) => id !== ex.id);
      if (candidates.length === 0) {
        throw new InvalidDemos(`no demonstration available for ${ex.id} in class ${JSON.stringify(label)}`);
      }
      const rng = deriveRng(seed, "demo", ex.id, label);
      const slots = rng.shuffled(candidates);
      while (slots.length < k) {
        slots.push(candidates[rng.int(candidates.length)]!);
      }
      perLabel.push(slots);
    }
    schedules.set(
      ex.id,
      Array.from({ length: k }, (_, j) => labels.map((_, li) => perLabel[li]![j]!)),
    );
  }
  return schedules;
}

/**
 * Every training example must appear as a demonstration in every other
 * example's schedule for its class. Holds by construction; asserted anyway
 * before anything is written.
 */
export function checkCoverage(
  schedules: Map<string, Schedule>,
  examples: readonly SplitExample[],
  labels: readonly string[],
): void {
  const train = examples.filter((ex) => ex.split === "train");
  const labelIndex = new Map(labels.map((l, i) => [l, i]));
  for (const ex of examples) {
    const schedule = schedules.get(ex.id);
    if (schedule === undefined) {
      throw new CoverageError(`no sampling schedule for ${ex.id}`);
    }
    const scheduled = labels.map(() => new Set<string>());
    for (const variant of schedule) {
      variant.forEach((id, li) => scheduled[li]!.add(id));
    }
    for (const t of train) {
      if (t.id === ex.id) continue;
      const li = labelIndex.get(t.label as string)!;
      if (!scheduled[li]!.has(t.id)) {
        throw new CoverageError(`training example ${t.id} never demonstrates for ${ex.id}`);
      }
    }
  }
}
