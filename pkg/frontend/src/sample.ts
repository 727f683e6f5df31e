import type { PromptSpec, SplitExample } from "./prompt.js";
import { deriveRng } from "./rng.js";

/** Sentiment review template in the classic "It was [MASK]." form. */
export const SENTIMENT_SPEC: PromptSpec = {
  template: "<TEXT> It was [MASK].",
  verbalizers: { negative: "terrible", positive: "great" },
};

const SUBJECTS = ["the movie", "the plot", "this film", "the acting", "the script", "the pacing"];
const POSITIVE = ["moving", "sharp", "delightful", "gripping", "charming", "inventive"];
const NEGATIVE = ["dull", "clumsy", "tedious", "hollow", "grating", "forgettable"];
const TAILS = ["from start to finish", "in every scene", "beyond expectation", "despite the hype", "all the way through"];

function sentence(label: "negative" | "positive", seed: number, ...path: Array<string | number>): string {
  const rng = deriveRng(seed, label, ...path);
  const bank = label === "positive" ? POSITIVE : NEGATIVE;
  const subject = SUBJECTS[rng.int(SUBJECTS.length)]!;
  const adjective = bank[rng.int(bank.length)]!;
  const tail = TAILS[rng.int(TAILS.length)]!;
  return `${subject} felt ${adjective} ${tail}`;
}

/**
 * Deterministic review-style sample task: k labeled examples per class in
 * train and dev, nTest labeled test examples. Exists so the pipeline can run
 * end to end without any external dataset.
 */
export function sampleSentimentTask(
  k: number,
  nTest: number,
  seed: number,
): { spec: PromptSpec; examples: SplitExample[] } {
  const labels = Object.keys(SENTIMENT_SPEC.verbalizers) as Array<"negative" | "positive">;
  const examples: SplitExample[] = [];
  for (const split of ["train", "dev"] as const) {
    for (const label of labels) {
      for (let i = 0; i < k; i++) {
        examples.push({
          id: `${split}-${label}-${i}`,
          split,
          label,
          text: sentence(label, seed, split, i),
        });
      }
    }
  }
  const testRng = deriveRng(seed, "test-labels");
  for (let i = 0; i < nTest; i++) {
    const label = labels[testRng.int(labels.length)]!;
    examples.push({ id: `test-${i}`, split: "test", label, text: sentence(label, seed, "test", i) });
  }
  return { spec: SENTIMENT_SPEC, examples };
}
